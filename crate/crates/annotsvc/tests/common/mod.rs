#![allow(dead_code)]

use std::sync::{Arc, OnceLock};

use simmc_annotsvc::{ManualClock, StoreConfig, TaskStore, TaskTurn};
use simmc_core::corpus::{generate_corpus, Corpus};
use simmc_core::ontology::MentionKind;
use simmc_core::scenegen::{Execution, SceneConfig};
use simmc_core::simulator::nlg::descriptor_tokens;
use simmc_core::simulator::SimulatorConfig;

/// A 100-dialog corpus over a small pool, built once per test binary.
pub fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| {
        let scene = SceneConfig {
            rearrangements_per_seed: 2,
            snapshots_per_instance: 4,
            ..SceneConfig::default()
        };
        generate_corpus(&scene, &SimulatorConfig::default(), 100, 21, Execution::Parallel)
            .expect("corpus")
            .1
    })
}

pub fn first(n: usize) -> Corpus {
    let c = corpus();
    Corpus::new(c.snapshots.clone(), c.dialogs[..n].to_vec())
}

pub const T0: u64 = 1_700_000_000_000;

pub fn store(config: StoreConfig) -> (TaskStore, ManualClock) {
    let clock = ManualClock::new(T0);
    (TaskStore::in_memory(config, Arc::new(clock.clone())), clock)
}

/// A rewrite that differs from the template but keeps every slot value and
/// one descriptor word per visual reference.
pub fn paraphrase(t: &TaskTurn) -> String {
    let mut words = vec!["so,".to_string()];
    words.extend(t.frame.slot_values.values().cloned());
    for m in &t.mentions {
        if m.kind != MentionKind::Anaphoric {
            if let Some(w) = descriptor_tokens(&m.text).into_iter().next() {
                words.push(w);
            }
        }
    }
    words.push(format!("(turn {})", t.turn_index));
    words.join(" ")
}

pub fn paraphrases(turns: &[TaskTurn]) -> Vec<String> {
    turns.iter().map(paraphrase).collect()
}
