use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bleu::{bleu4, BLEU_SMOOTHING};
use super::{turn_key, EvalError, FramePrediction, MetricReport, PredictionSet};
use crate::catalog::Decimal;
use crate::corpus::Corpus;
use crate::ontology::{Dialog, Speaker};
use crate::text::normalize;

/// Whether DST frames carry slot values accumulated over the dialog so far or
/// only those stated in the current turn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMode {
    #[default]
    Cumulative,
    Delta,
}

impl FrameMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameMode::Cumulative => "cumulative",
            FrameMode::Delta => "delta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Zero-guarded precision, recall and F1 from micro counts.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf { precision, recall, f1 }
}

#[derive(Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add<T: Ord>(&mut self, pred: &BTreeSet<T>, gold: &BTreeSet<T>) {
        let hit = pred.intersection(gold).count();
        self.tp += hit;
        self.fp += pred.len() - hit;
        self.fn_ += gold.len() - hit;
    }

    fn prf(&self) -> Prf {
        prf(self.tp, self.fp, self.fn_)
    }
}

fn value_key(value: &str) -> String {
    let v = normalize(value);
    match v.parse::<Decimal>() {
        Ok(d) => {
            let s = d.to_string();
            if s.contains('.') {
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                s
            }
        }
        Err(_) => v,
    }
}

/// (slot, value) pairs with values normalized; request slots pair with `"?"`.
pub fn slot_pairs(frame: &FramePrediction) -> BTreeSet<(String, String)> {
    frame
        .slot_values
        .iter()
        .map(|(k, v)| (k.clone(), value_key(v)))
        .chain(frame.request_slots.iter().map(|s| (s.clone(), "?".to_string())))
        .collect()
}

/// Slot values stated by the user up to and including `turn_index`; later values win.
pub fn cumulative_frame(dialog: &Dialog, turn_index: usize) -> BTreeMap<String, String> {
    let mut acc = BTreeMap::new();
    for t in dialog.turns.iter().take(turn_index + 1) {
        if t.speaker == Speaker::User {
            acc.extend(t.frame.slot_values.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
    }
    acc
}

/// Gold DST target for a user turn.
pub fn gold_frame(dialog: &Dialog, turn_index: usize, mode: FrameMode) -> FramePrediction {
    let f = &dialog.turns[turn_index].frame;
    FramePrediction {
        act: f.act,
        activity: f.activity,
        slot_values: match mode {
            FrameMode::Cumulative => cumulative_frame(dialog, turn_index),
            FrameMode::Delta => f.slot_values.clone(),
        },
        request_slots: f.request_slots.clone(),
        objects: f.objects.clone(),
    }
}

fn id_set(ids: &[u32]) -> BTreeSet<u32> {
    ids.iter().copied().collect()
}

pub fn eval_disambiguation(preds: &PredictionSet, gold: &Corpus) -> Result<MetricReport, EvalError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut positives = 0usize;
    let mut missing = Vec::new();
    for d in &gold.dialogs {
        for t in d.user_turns() {
            let want = t.frame.is_ambiguous();
            positives += usize::from(want);
            total += 1;
            match preds
                .get(&d.dialog_id, t.turn_index)
                .and_then(|p| p.disambiguation_label)
            {
                Some(got) => correct += usize::from(got == want),
                None => missing.push(turn_key(&d.dialog_id, t.turn_index)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions {
            task: "disamb".into(),
            turns: missing,
        });
    }
    let mut report = MetricReport::new("disamb");
    report.set("accuracy", if total == 0 { 0.0 } else { correct as f64 / total as f64 });
    report.support.insert("turns".into(), total);
    report.support.insert("positives".into(), positives);
    Ok(report)
}

/// Object-ID P/R/F1 over user turns, skipping turns answered by a
/// disambiguation request. Missing predictions count as empty sets.
pub fn eval_coref(preds: &PredictionSet, gold: &Corpus) -> MetricReport {
    let mut counts = Counts::default();
    let mut turns = 0usize;
    let mut excluded = 0usize;
    for d in &gold.dialogs {
        for t in d.user_turns() {
            if d.followed_by_disambiguation(t.turn_index) {
                excluded += 1;
                continue;
            }
            turns += 1;
            let pred = preds
                .get(&d.dialog_id, t.turn_index)
                .and_then(|p| p.objects.as_deref())
                .map(id_set)
                .unwrap_or_default();
            counts.add(&pred, &id_set(&t.frame.objects));
        }
    }
    let mut report = MetricReport::new("coref");
    report.set_prf("", counts.prf());
    report.support.insert("turns".into(), turns);
    report.support.insert("excluded_turns".into(), excluded);
    report.support.insert("gold_objects".into(), counts.tp + counts.fn_);
    report
}

pub fn eval_dst(preds: &PredictionSet, gold: &Corpus, mode: FrameMode) -> MetricReport {
    let mut intent = Counts::default();
    let mut slots = Counts::default();
    let mut objects = Counts::default();
    let mut joint = 0usize;
    let mut turns = 0usize;
    for d in &gold.dialogs {
        for t in d.user_turns() {
            turns += 1;
            let g = gold_frame(d, t.turn_index, mode);
            let g_slots = slot_pairs(&g);
            let g_objs = id_set(&g.objects);
            let g_intent = BTreeSet::from([(g.act, g.activity)]);
            match preds.get(&d.dialog_id, t.turn_index).and_then(|p| p.frame.as_ref()) {
                Some(p) => {
                    let p_slots = slot_pairs(p);
                    let p_objs = id_set(&p.objects);
                    let p_intent = BTreeSet::from([(p.act, p.activity)]);
                    intent.add(&p_intent, &g_intent);
                    slots.add(&p_slots, &g_slots);
                    objects.add(&p_objs, &g_objs);
                    if p_intent == g_intent && p_slots == g_slots && p_objs == g_objs {
                        joint += 1;
                    }
                }
                None => {
                    intent.add(&BTreeSet::new(), &g_intent);
                    slots.add(&BTreeSet::new(), &g_slots);
                    objects.add(&BTreeSet::new(), &g_objs);
                }
            }
        }
    }
    let mut report = MetricReport::new("dst");
    report.set_prf("intent_", intent.prf());
    report.set_prf("slot_", slots.prf());
    report.set_prf("object_", objects.prf());
    report.set(
        "joint_accuracy",
        if turns == 0 { 0.0 } else { joint as f64 / turns as f64 },
    );
    report.support.insert("turns".into(), turns);
    report.support.insert("gold_slots".into(), slots.tp + slots.fn_);
    report.support.insert("gold_objects".into(), objects.tp + objects.fn_);
    report.notes.push(format!("frame mode: {}", mode.as_str()));
    report
}

/// Mean sentence BLEU of the predicted response against the assistant turn
/// that follows each user turn. Missing responses score 0.
pub fn eval_generation(preds: &PredictionSet, gold: &Corpus) -> MetricReport {
    let mut sum = 0.0;
    let mut n = 0usize;
    for d in &gold.dialogs {
        for t in d.user_turns() {
            let Some(next) = d.turns.get(t.turn_index + 1) else {
                continue;
            };
            let cand = preds
                .get(&d.dialog_id, t.turn_index)
                .and_then(|p| p.response.as_deref())
                .unwrap_or("");
            sum += bleu4(cand, &[next.utterance.as_str()]);
            n += 1;
        }
    }
    let mut report = MetricReport::new("gen");
    report.set("bleu4", if n == 0 { 0.0 } else { sum / n as f64 });
    report.support.insert("turns".into(), n);
    report.notes.push(BLEU_SMOOTHING.to_string());
    report
}
