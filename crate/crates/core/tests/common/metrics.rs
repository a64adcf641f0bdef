//! Independent metric oracles: hand-computed BLEU values, random perturbation
//! of prediction sets and set-arithmetic recomputation of coref and DST scores.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use simmc_core::corpus::Corpus;
use simmc_core::eval::{eval_coref, eval_dst, FrameMode, MetricReport, PredictionSet};
use simmc_core::ontology::{Activity, Dialog, DialogAct};

use super::{f1_from_counts, set_counts};

/// (candidate, references, expected score). Precisions p1..p4 and the brevity
/// penalty were worked out by hand; an n-gram order with no candidate n-grams
/// and no matches smooths to 1 / (0 + 1) = 1.
pub fn bleu_cases() -> Vec<(&'static str, Vec<&'static str>, f64)> {
    let ten = "one two three four five six seven eight nine ten";
    vec![
        (ten, vec![ten], 1.0),
        // no unigram overlap: p1 = 0
        ("a b c d", vec!["w x y z"], 0.0),
        // p = 1, 1, 1, 1; c = 2, r = 6, BP = exp(1 - 3)
        ("the cat", vec!["the cat sat on the mat"], (-2.0f64).exp()),
        // p1 = 1/4 (clipped), p2 = 1/(3+1), p3 = 1/(2+1), p4 = 1/(1+1)
        ("the the the the", vec!["the cat"], (1.0f64 / 96.0).powf(0.25)),
        // p = 4/5, 3/4, 2/3, 1/2
        ("a b c d e", vec!["a b c d f"], (1.0f64 / 5.0).powf(0.25)),
        // reference lengths 6 and 2 tie at distance 2; the shorter wins, BP = 1
        ("a b c d", vec!["a b c d e f", "a b"], 1.0),
        // case folding and punctuation detachment
        ("Red jacket?", vec!["red jacket ?"], 1.0),
        // p = 1, 1/(1+1), 1, 1
        ("b a", vec!["a b"], 0.5f64.powf(0.25)),
        // p = 4/8, 3/7, 2/6, 1/5; c > r so BP = 1
        ("a b c d e f g h", vec!["a b c d"], (1.0f64 / 70.0).powf(0.25)),
        // counts clip against the per-reference maximum: p = 3/3, 2/2, 1/(1+1), 1
        ("a a b", vec!["a b b", "a a"], 0.5f64.powf(0.25)),
    ]
}

const VOCAB: &[&str] = &["red", "blue", "jacket", "shirt", "leather", "ikea", "29.9", "xl"];

/// Random corruption of each section of a prediction set.
pub fn perturb<R: Rng>(p: &PredictionSet, rng: &mut R) -> PredictionSet {
    let mut out = p.clone();
    for turns in out.dialogs.values_mut() {
        let keys: Vec<usize> = turns.keys().copied().collect();
        for k in keys {
            if rng.random_bool(0.05) {
                turns.remove(&k);
                continue;
            }
            let t = turns.get_mut(&k).unwrap();
            if let Some(objs) = t.objects.as_mut() {
                if rng.random_bool(0.3) && !objs.is_empty() {
                    objs.remove(rng.random_range(0..objs.len()));
                }
                if rng.random_bool(0.3) {
                    objs.push(rng.random_range(0..25));
                }
            }
            if rng.random_bool(0.1) {
                t.objects = None;
            }
            if let Some(f) = t.frame.as_mut() {
                if rng.random_bool(0.15) {
                    f.act = *DialogAct::ALL.choose(rng).unwrap();
                }
                if rng.random_bool(0.15) {
                    f.activity = *Activity::ALL.choose(rng).unwrap();
                }
                if rng.random_bool(0.3) {
                    let slot = ["color", "type", "brand", "price", "size"].choose(rng).unwrap();
                    f.slot_values
                        .insert(slot.to_string(), VOCAB.choose(rng).unwrap().to_string());
                }
                if rng.random_bool(0.2) {
                    if let Some(k) = f.slot_values.keys().next().cloned() {
                        f.slot_values.remove(&k);
                    }
                }
                if rng.random_bool(0.2) {
                    for v in f.slot_values.values_mut() {
                        *v = format!("  {} ", v.to_uppercase());
                    }
                }
                if rng.random_bool(0.2) {
                    f.request_slots.insert("price".into());
                }
                if rng.random_bool(0.2) {
                    f.objects.shuffle(rng);
                    f.objects.truncate(1);
                }
            }
            if rng.random_bool(0.1) {
                t.frame = None;
            }
        }
    }
    out
}

fn oracle_value(v: &str) -> String {
    let v = v.trim().to_lowercase();
    match v.parse::<f64>() {
        Ok(x) => format!("{x}"),
        Err(_) => v,
    }
}

type Pairs = BTreeSet<(String, String)>;

fn oracle_slots(values: &BTreeMap<String, String>, requests: &BTreeSet<String>) -> Pairs {
    let mut s: Pairs = values.iter().map(|(k, v)| (k.clone(), oracle_value(v))).collect();
    for r in requests {
        s.insert((r.clone(), "?".into()));
    }
    s
}

/// Slot values stated in user turns 0..=t, later turns overriding earlier ones.
fn oracle_cumulative(d: &Dialog, t: usize) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for i in (0..=t).filter(|i| i % 2 == 0) {
        for (k, v) in &d.turns[i].frame.slot_values {
            m.insert(k.clone(), v.clone());
        }
    }
    m
}

fn compare(report: &MetricReport, prefix: &str, want: (f64, f64, f64), out: &mut Vec<String>) {
    for (name, w) in [("precision", want.0), ("recall", want.1), ("f1", want.2)] {
        let key = format!("{prefix}{name}");
        let got = report.metric(&key).unwrap_or(f64::NAN);
        if (got - w).abs() > 1e-12 {
            out.push(format!("{}: {key} = {got}, oracle {w}", report.task));
        }
    }
}

/// Recomputes coref and cumulative DST P/R/F1 from raw turns and returns every
/// metric that disagrees with the evaluator.
pub fn oracle_mismatches(preds: &PredictionSet, c: &Corpus) -> Vec<String> {
    let mut coref = Vec::new();
    let mut slots = Vec::new();
    let mut objs = Vec::new();
    let mut intents = Vec::new();
    for d in &c.dialogs {
        for t in d.turns.iter().filter(|t| t.turn_index % 2 == 0) {
            let p = preds.get(&d.dialog_id, t.turn_index);
            let gold_objs: BTreeSet<u32> = t.frame.objects.iter().copied().collect();
            let excluded = d
                .turns
                .get(t.turn_index + 1)
                .is_some_and(|n| n.frame.act == DialogAct::Request && n.frame.activity == Activity::Disambiguate);
            if !excluded {
                let pred_objs = p.and_then(|p| p.objects.clone()).unwrap_or_default();
                coref.push((pred_objs.into_iter().collect(), gold_objs.clone()));
            }
            let gold_slots = oracle_slots(&oracle_cumulative(d, t.turn_index), &t.frame.request_slots);
            let gold_intent: Pairs = BTreeSet::from([(t.frame.act.to_string(), t.frame.activity.to_string())]);
            match p.and_then(|p| p.frame.as_ref()) {
                Some(f) => {
                    slots.push((oracle_slots(&f.slot_values, &f.request_slots), gold_slots));
                    objs.push((f.objects.iter().copied().collect(), gold_objs));
                    intents.push((
                        BTreeSet::from([(f.act.to_string(), f.activity.to_string())]),
                        gold_intent,
                    ));
                }
                None => {
                    slots.push((BTreeSet::new(), gold_slots));
                    objs.push((BTreeSet::new(), gold_objs));
                    intents.push((BTreeSet::new(), gold_intent));
                }
            }
        }
    }
    let mut out = Vec::new();
    let prf = |c: (usize, usize, usize)| f1_from_counts(c.0, c.1, c.2);
    compare(&eval_coref(preds, c), "", prf(set_counts(&coref)), &mut out);
    let dst = eval_dst(preds, c, FrameMode::Cumulative);
    compare(&dst, "slot_", prf(set_counts(&slots)), &mut out);
    compare(&dst, "intent_", prf(set_counts(&intents)), &mut out);
    compare(&dst, "object_", prf(set_counts(&objs)), &mut out);
    out
}

/// Keeps a random subset of dialogs, in shuffled order.
pub fn sub_corpus<R: Rng>(c: &Corpus, rng: &mut R) -> Corpus {
    let mut c = c.clone();
    c.dialogs.shuffle(rng);
    c.dialogs.truncate(rng.random_range(1..60));
    c
}
