//! Evaluators for the four benchmark tasks over gold corpora and prediction files.

mod bleu;
mod retrieval;
mod tasks;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::ontology::{Activity, DialogAct, Speaker};

pub use bleu::{bleu4, corpus_bleu, BLEU_SMOOTHING};
pub use retrieval::{
    build_retrieval_candidates, eval_retrieval, CandidateSet, RankedTurn, RetrievalCandidates, DEFAULT_POOL_SIZE,
};
pub use tasks::{
    cumulative_frame, eval_coref, eval_disambiguation, eval_dst, eval_generation, gold_frame, prf, slot_pairs,
    FrameMode, Prf,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{task}: missing predictions for {} turn(s): {}", turns.len(), turns.join(", "))]
    MissingPredictions { task: String, turns: Vec<String> },
    #[error("predictions reference unknown turns: {}", .0.join(", "))]
    UnknownTurns(Vec<String>),
    #[error("{dialog_id} turn {turn_index}: gold candidate {gold_index} missing from ranking")]
    GoldMissing {
        dialog_id: String,
        turn_index: usize,
        gold_index: usize,
    },
    #[error("corpus too small for pool size {pool_size}: {available} candidate responses available")]
    CorpusTooSmall { pool_size: usize, available: usize },
    #[error("pool size must be at least 1")]
    EmptyPool,
}

/// Predicted belief state for one user turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub act: DialogAct,
    pub activity: Activity,
    #[serde(default)]
    pub slot_values: BTreeMap<String, String>,
    #[serde(default)]
    pub request_slots: BTreeSet<String>,
    #[serde(default)]
    pub objects: Vec<u32>,
}

/// Task payloads for one user turn; every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnPrediction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disambiguation_label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FramePrediction>,
    /// Generated assistant response for the following turn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    /// Candidate indices, best first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<usize>>,
}

/// Model output keyed by dialog id, then user turn index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub dialogs: BTreeMap<String, BTreeMap<usize, TurnPrediction>>,
}

impl PredictionSet {
    pub fn get(&self, dialog_id: &str, turn_index: usize) -> Option<&TurnPrediction> {
        self.dialogs.get(dialog_id)?.get(&turn_index)
    }

    pub fn entry(&mut self, dialog_id: &str, turn_index: usize) -> &mut TurnPrediction {
        self.dialogs
            .entry(dialog_id.to_string())
            .or_default()
            .entry(turn_index)
            .or_default()
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, EvalError> {
        serde_json::from_slice(bytes).map_err(|source| EvalError::Parse {
            what: "prediction file".into(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        Self::from_slice(&read(path.as_ref())?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("predictions serialize")
    }

    /// Every key must name a user turn of a gold dialog.
    pub fn check_keys(&self, gold: &Corpus) -> Result<(), EvalError> {
        let mut bad = Vec::new();
        for (did, turns) in &self.dialogs {
            let dialog = gold.dialog(did);
            for &t in turns.keys() {
                let ok = dialog
                    .and_then(|d| d.turns.get(t))
                    .is_some_and(|turn| turn.speaker == Speaker::User);
                if !ok {
                    bad.push(turn_key(did, t));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(EvalError::UnknownTurns(bad))
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, EvalError> {
    std::fs::read(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn turn_key(dialog_id: &str, turn_index: usize) -> String {
    format!("{dialog_id}:{turn_index}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    pub support: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn new(task: &str) -> Self {
        Self {
            task: task.to_string(),
            metrics: BTreeMap::new(),
            support: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub(crate) fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub(crate) fn set_prf(&mut self, prefix: &str, p: Prf) {
        self.set(&format!("{prefix}precision"), p.precision);
        self.set(&format!("{prefix}recall"), p.recall);
        self.set(&format!("{prefix}f1"), p.f1);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("report serializes")
    }

    /// Aligned two-column table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: {}", self.task);
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        let width = self
            .metrics
            .keys()
            .chain(self.support.keys())
            .map(String::len)
            .max()
            .unwrap_or(0);
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "  {k:<width$}  {v:.4}");
        }
        for (k, v) in &self.support {
            let _ = writeln!(out, "  {k:<width$}  {v}");
        }
        out
    }
}

/// Predictions that reproduce the gold annotations on every task.
pub fn perfect_predictions(gold: &Corpus, mode: FrameMode, candidates: Option<&RetrievalCandidates>) -> PredictionSet {
    let mut preds = PredictionSet::default();
    for d in &gold.dialogs {
        for t in d.user_turns() {
            let i = t.turn_index;
            let p = preds.entry(&d.dialog_id, i);
            p.disambiguation_label = Some(t.frame.is_ambiguous());
            p.objects = Some(t.frame.objects.clone());
            p.frame = Some(gold_frame(d, i, mode));
            if let Some(next) = d.turns.get(i + 1) {
                p.response = Some(next.utterance.clone());
            }
            if let Some(set) = candidates.and_then(|c| c.get(&d.dialog_id, i)) {
                let mut ranking = vec![set.gold_index];
                ranking.extend((0..set.candidates.len()).filter(|&j| j != set.gold_index));
                p.ranking = Some(ranking);
            }
        }
    }
    preds
}
