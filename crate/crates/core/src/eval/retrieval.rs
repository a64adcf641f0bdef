use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{read, turn_key, EvalError, MetricReport, PredictionSet};
use crate::corpus::Corpus;
use crate::ontology::Speaker;
use crate::rng::{label, stream, streams};

pub const DEFAULT_POOL_SIZE: usize = 100;

const RECALL_KS: [usize; 3] = [1, 5, 10];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<String>,
    pub gold_index: usize,
}

/// Candidate responses per (dialog, user turn); the gold is the next assistant utterance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalCandidates {
    pub pool_size: usize,
    pub seed: u64,
    pub dialogs: BTreeMap<String, BTreeMap<usize, CandidateSet>>,
}

impl RetrievalCandidates {
    pub fn get(&self, dialog_id: &str, turn_index: usize) -> Option<&CandidateSet> {
        self.dialogs.get(dialog_id)?.get(&turn_index)
    }

    pub fn len(&self) -> usize {
        self.dialogs.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        serde_json::from_slice(&read(path.as_ref())?).map_err(|source| EvalError::Parse {
            what: "candidate file".into(),
            source,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("candidates serialize")
    }

    /// Joins predicted rankings with the candidate sets.
    pub fn ranked_turns(&self, preds: &PredictionSet) -> Result<Vec<RankedTurn>, EvalError> {
        let mut out = Vec::with_capacity(self.len());
        let mut missing = Vec::new();
        for (did, turns) in &self.dialogs {
            for (&t, set) in turns {
                match preds.get(did, t).and_then(|p| p.ranking.as_ref()) {
                    Some(r) => out.push(RankedTurn {
                        dialog_id: did.clone(),
                        turn_index: t,
                        ranking: r.clone(),
                        gold_index: set.gold_index,
                    }),
                    None => missing.push(turn_key(did, t)),
                }
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(EvalError::MissingPredictions {
                task: "retrieval".into(),
                turns: missing,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedTurn {
    pub dialog_id: String,
    pub turn_index: usize,
    /// Candidate indices, best first.
    pub ranking: Vec<usize>,
    pub gold_index: usize,
}

pub fn eval_retrieval(turns: &[RankedTurn]) -> Result<MetricReport, EvalError> {
    let mut hits = [0usize; RECALL_KS.len()];
    let mut rank_sum = 0.0;
    let mut rr_sum = 0.0;
    for t in turns {
        let pos = t
            .ranking
            .iter()
            .position(|&c| c == t.gold_index)
            .ok_or_else(|| EvalError::GoldMissing {
                dialog_id: t.dialog_id.clone(),
                turn_index: t.turn_index,
                gold_index: t.gold_index,
            })?;
        let rank = pos + 1;
        for (h, &k) in hits.iter_mut().zip(&RECALL_KS) {
            if rank <= k {
                *h += 1;
            }
        }
        rank_sum += rank as f64;
        rr_sum += 1.0 / rank as f64;
    }
    let n = turns.len();
    let div = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    let mut report = MetricReport::new("retrieval");
    for (h, k) in hits.iter().zip(RECALL_KS) {
        report.set(&format!("r@{k}"), div(*h as f64));
    }
    report.set("mean_rank", div(rank_sum));
    report.set("mrr", div(rr_sum));
    report.support.insert("turns".into(), n);
    Ok(report)
}

/// Samples `pool_size - 1` distinct distractors from other dialogs for every
/// assistant turn that answers a user turn, then shuffles in the gold.
pub fn build_retrieval_candidates(
    corpus: &Corpus,
    pool_size: usize,
    seed: u64,
) -> Result<RetrievalCandidates, EvalError> {
    if pool_size == 0 {
        return Err(EvalError::EmptyPool);
    }
    let total = corpus
        .dialogs
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::Assistant)
        .count();
    if pool_size > total {
        return Err(EvalError::CorpusTooSmall {
            pool_size,
            available: total,
        });
    }
    let distinct: Vec<&str> = corpus
        .dialogs
        .iter()
        .flat_map(|d| &d.turns)
        .filter(|t| t.speaker == Speaker::Assistant)
        .map(|t| t.utterance.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut dialogs = BTreeMap::new();
    for d in &corpus.dialogs {
        let own: BTreeSet<&str> = d
            .turns
            .iter()
            .filter(|t| t.speaker == Speaker::Assistant)
            .map(|t| t.utterance.as_str())
            .collect();
        let available = distinct.iter().filter(|s| !own.contains(*s)).count();
        let mut sets = BTreeMap::new();
        for t in d.user_turns() {
            let Some(next) = d.turns.get(t.turn_index + 1) else {
                continue;
            };
            if available < pool_size - 1 {
                return Err(EvalError::CorpusTooSmall { pool_size, available });
            }
            let mut rng = stream(seed, &[streams::CANDIDATES, label(&d.dialog_id), t.turn_index as u64]);
            let mut chosen = BTreeSet::new();
            let mut picks: Vec<String> = Vec::with_capacity(pool_size);
            while picks.len() < pool_size - 1 {
                let s = distinct[rng.random_range(0..distinct.len())];
                if !own.contains(s) && chosen.insert(s) {
                    picks.push(s.to_string());
                }
            }
            picks.push(next.utterance.clone());
            picks.shuffle(&mut rng);
            let gold_index = picks.iter().position(|s| *s == next.utterance).expect("gold inserted");
            sets.insert(
                t.turn_index,
                CandidateSet {
                    candidates: picks,
                    gold_index,
                },
            );
        }
        dialogs.insert(d.dialog_id.clone(), sets);
    }
    Ok(RetrievalCandidates {
        pool_size,
        seed,
        dialogs,
    })
}
