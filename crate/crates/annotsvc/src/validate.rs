//! Entity retention: a paraphrase must keep every slot value of its turn's
//! frame and at least one descriptor word of each visual object reference.
//! The check is lexical, so it is a lower bound on what a human reviewer
//! would catch.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use simmc_core::ontology::MentionKind;
use simmc_core::simulator::nlg::descriptor_tokens;
use simmc_core::text::{normalize, tokenize};

use crate::task::TaskTurn;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRejection {
    pub turn_index: usize,
    /// Slot values and object descriptions the paraphrase dropped.
    pub missing: Vec<String>,
    pub message: String,
}

/// Entities of `turn` that `paraphrase` fails to retain, in frame order:
/// slot values first, then object references.
pub fn missing_entities(turn: &TaskTurn, paraphrase: &str) -> Vec<String> {
    let text = normalize(paraphrase);
    let tokens: BTreeSet<String> = tokenize(&text).into_iter().collect();
    let mut missing = Vec::new();
    for value in turn.frame.slot_values.values() {
        let v = normalize(value);
        if !v.is_empty() && !text.contains(&v) && !missing.contains(value) {
            missing.push(value.clone());
        }
    }
    for m in &turn.mentions {
        if m.kind == MentionKind::Anaphoric || m.objects.is_empty() {
            continue;
        }
        let words = descriptor_tokens(&m.text);
        if !words.is_empty() && !words.iter().any(|w| tokens.contains(w)) && !missing.contains(&m.text) {
            missing.push(m.text.clone());
        }
    }
    missing
}

/// Per-turn problems with a full set of paraphrases; empty when all pass.
/// `paraphrases` must have one entry per turn.
pub fn validate_paraphrases(turns: &[TaskTurn], paraphrases: &[String]) -> Vec<TurnRejection> {
    turns
        .iter()
        .zip(paraphrases)
        .filter_map(|(t, p)| {
            if p.trim().is_empty() {
                return Some(TurnRejection {
                    turn_index: t.turn_index,
                    missing: Vec::new(),
                    message: "paraphrase is empty".into(),
                });
            }
            let missing = missing_entities(t, p);
            if missing.is_empty() {
                return None;
            }
            let quoted: Vec<String> = missing.iter().map(|m| format!("\"{m}\"")).collect();
            Some(TurnRejection {
                turn_index: t.turn_index,
                message: format!("turn {} is missing {}", t.turn_index, quoted.join(", ")),
                missing,
            })
        })
        .collect()
}
