use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};
use crate::ontology::{Dialog, Speaker};
use crate::scenegen::SceneSnapshot;
use crate::text::word_count;

/// Rounds covered by the default act-transition graph.
pub const DEFAULT_MAX_ROUND: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
    pub weight: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogs: usize,
    pub utterances: usize,
    pub snapshots: usize,
    pub avg_words_per_user_turn: f64,
    pub avg_words_per_assistant_turn: f64,
    pub avg_utterances_per_dialog: f64,
    pub avg_objects_mentioned_per_dialog: f64,
    pub avg_objects_in_scene_per_dialog: f64,
    pub two_snapshot_fraction: f64,
    /// Fraction of user turns labeled ambiguous.
    pub disambiguation_rate: f64,
    /// Utterances back to the previous mention of the same object → count.
    pub coref_distance_histogram: BTreeMap<usize, usize>,
    pub act_transitions: Vec<Edge>,
}

type Lookup<'a> = BTreeMap<&'a str, &'a SceneSnapshot>;

fn slots_of<'a>(d: &Dialog, snaps: &Lookup<'a>) -> Result<Vec<Vec<&'a str>>, CorpusError> {
    d.turns
        .iter()
        .map(|t| {
            let snap = snaps
                .get(t.active_snapshot.as_str())
                .ok_or_else(|| CorpusError::MissingSnapshot {
                    dialog_id: d.dialog_id.clone(),
                    snapshot_id: t.active_snapshot.clone(),
                })?;
            let mut v: Vec<&'a str> = t
                .frame
                .objects
                .iter()
                .filter_map(|&o| snap.object(o).map(|a| a.slot_id.as_str()))
                .collect();
            v.sort_unstable();
            v.dedup();
            Ok(v)
        })
        .collect()
}

/// Distances from each object mention to the previous mention of the same
/// object (by seed slot, so mentions carry across views). First mentions
/// contribute nothing.
pub fn coref_distances(corpus: &Corpus) -> Result<BTreeMap<usize, usize>, CorpusError> {
    let snaps = corpus.snapshot_index();
    let mut hist = BTreeMap::new();
    for d in &corpus.dialogs {
        let mut last: BTreeMap<&str, usize> = BTreeMap::new();
        for (t, slots) in slots_of(d, &snaps)?.into_iter().enumerate() {
            for s in slots {
                if let Some(prev) = last.insert(s, t) {
                    *hist.entry(t - prev).or_insert(0) += 1;
                }
            }
        }
    }
    Ok(hist)
}

fn node(d: &Dialog, i: usize) -> String {
    let t = &d.turns[i];
    let who = match t.speaker {
        Speaker::User => 'U',
        Speaker::Assistant => 'A',
    };
    format!("{}:{who}{}", t.frame.intent(), i / 2)
}

/// Transition counts between consecutive turns in the first `max_round`
/// rounds. Nodes read `ACT:ACTIVITY:U<round>` or `ACT:ACTIVITY:A<round>`.
pub fn act_transition_graph(corpus: &Corpus, max_round: usize) -> Vec<Edge> {
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for d in &corpus.dialogs {
        let end = d.turns.len().min(2 * max_round);
        for i in 1..end {
            *counts.entry((node(d, i - 1), node(d, i))).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .map(|((source, target), weight)| Edge { source, target, weight })
        .collect()
}

fn mean(sum: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum as f64 / n as f64
    }
}

pub fn compute_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    let n = corpus.dialogs.len();
    if n == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let snaps = corpus.snapshot_index();
    let (mut user_turns, mut user_words, mut asst_turns, mut asst_words) = (0, 0, 0, 0);
    let (mut utterances, mut mentioned, mut in_scene, mut two, mut ambiguous) = (0, 0, 0, 0, 0);
    let mut used_snapshots = BTreeSet::new();
    for d in &corpus.dialogs {
        utterances += d.turns.len();
        for t in &d.turns {
            let w = word_count(&t.utterance);
            match t.speaker {
                Speaker::User => {
                    user_turns += 1;
                    user_words += w;
                    ambiguous += usize::from(t.frame.is_ambiguous());
                }
                Speaker::Assistant => {
                    asst_turns += 1;
                    asst_words += w;
                }
            }
        }
        let objs: BTreeSet<&str> = slots_of(d, &snaps)?.into_iter().flatten().collect();
        mentioned += objs.len();
        let mut scene: BTreeSet<&str> = BTreeSet::new();
        for id in &d.snapshot_ids {
            let s = snaps.get(id.as_str()).ok_or_else(|| CorpusError::MissingSnapshot {
                dialog_id: d.dialog_id.clone(),
                snapshot_id: id.clone(),
            })?;
            scene.extend(s.objects.iter().map(|o| o.slot_id.as_str()));
            used_snapshots.insert(id.as_str());
        }
        in_scene += scene.len();
        two += usize::from(d.snapshot_ids.len() == 2);
    }
    Ok(CorpusStats {
        dialogs: n,
        utterances,
        snapshots: used_snapshots.len(),
        avg_words_per_user_turn: mean(user_words, user_turns),
        avg_words_per_assistant_turn: mean(asst_words, asst_turns),
        avg_utterances_per_dialog: mean(utterances, n),
        avg_objects_mentioned_per_dialog: mean(mentioned, n),
        avg_objects_in_scene_per_dialog: mean(in_scene, n),
        two_snapshot_fraction: mean(two, n),
        disambiguation_rate: mean(ambiguous, user_turns),
        coref_distance_histogram: coref_distances(corpus)?,
        act_transitions: act_transition_graph(corpus, DEFAULT_MAX_ROUND),
    })
}

impl CorpusStats {
    /// `distance,count` rows.
    pub fn histogram_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["distance", "count"]).expect("in-memory write");
        for (d, c) in &self.coref_distance_histogram {
            w.write_record([d.to_string(), c.to_string()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// `source,target,weight` rows.
    pub fn transitions_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.act_transitions {
            w.serialize(e).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
