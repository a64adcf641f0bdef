mod common;

use common::metrics::{bleu_cases, oracle_mismatches, perturb, sub_corpus};

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use simmc_core::corpus::Corpus;
use simmc_core::eval::*;
use simmc_core::ontology::Speaker;
use simmc_core::rng::seeded;

fn gold() -> &'static Corpus {
    &common::fixture().1
}

fn assert_prf_identity(r: &MetricReport) {
    for (k, &p) in &r.metrics {
        if let Some(prefix) = k.strip_suffix("precision") {
            let rec = r.metrics[&format!("{prefix}recall")];
            let f1 = r.metrics[&format!("{prefix}f1")];
            let want = if p + rec > 0.0 { 2.0 * p * rec / (p + rec) } else { 0.0 };
            assert!((f1 - want).abs() < 1e-12, "{k}");
        }
    }
    for (k, &v) in &r.metrics {
        if k != "mean_rank" {
            assert!((0.0..=1.0).contains(&v), "{k} = {v}");
        }
    }
}

#[test]
fn perfect_predictions_score_one_everywhere() {
    let cands = build_retrieval_candidates(gold(), DEFAULT_POOL_SIZE, 5).unwrap();
    for mode in [FrameMode::Cumulative, FrameMode::Delta] {
        let p = perfect_predictions(gold(), mode, Some(&cands));
        p.check_keys(gold()).unwrap();
        assert_eq!(eval_disambiguation(&p, gold()).unwrap().metric("accuracy"), Some(1.0));
        let c = eval_coref(&p, gold());
        assert_eq!(c.metric("f1"), Some(1.0));
        let d = eval_dst(&p, gold(), mode);
        for m in ["intent_f1", "slot_f1", "object_f1", "joint_accuracy"] {
            assert_eq!(d.metric(m), Some(1.0), "{m}");
        }
        assert!((eval_generation(&p, gold()).metric("bleu4").unwrap() - 1.0).abs() < 1e-12);
        let r = eval_retrieval(&cands.ranked_turns(&p).unwrap()).unwrap();
        for m in ["r@1", "r@5", "r@10", "mrr", "mean_rank"] {
            assert_eq!(r.metric(m), Some(1.0), "{m}");
        }
        for rep in [c, d, r] {
            assert_prf_identity(&rep);
        }
    }
}

/// One dialog whose user turns carry the given ambiguity labels.
fn labeled_corpus(labels: &[bool]) -> Corpus {
    let base = gold()
        .dialogs
        .iter()
        .find(|d| d.turns.len() >= 2 * labels.len())
        .unwrap();
    let mut d = base.clone();
    d.turns.truncate(2 * labels.len());
    for (t, &l) in d.turns.iter_mut().step_by(2).zip(labels) {
        t.frame.disambiguation_label = Some(l);
    }
    Corpus::new(gold().snapshots.clone(), vec![d])
}

fn label_preds(c: &Corpus, labels: &[bool]) -> PredictionSet {
    let mut p = PredictionSet::default();
    let d = &c.dialogs[0];
    for (i, &l) in labels.iter().enumerate() {
        p.entry(&d.dialog_id, 2 * i).disambiguation_label = Some(l);
    }
    p
}

#[test]
fn disambiguation_accuracy_examples() {
    let c = labeled_corpus(&[true, true, false, true]);
    let p = label_preds(&c, &[true, false, false, true]);
    let r = eval_disambiguation(&p, &c).unwrap();
    assert_eq!(r.metric("accuracy"), Some(0.75));
    assert_eq!(r.support["turns"], 4);

    let zeros = label_preds(&c, &[false; 4]);
    let acc = eval_disambiguation(&zeros, &c).unwrap().metric("accuracy").unwrap();
    assert_eq!(acc, 1.0 - 3.0 / 4.0);
}

#[test]
fn all_zero_baseline_is_complement_of_positive_rate() {
    let mut p = PredictionSet::default();
    let mut positives = 0;
    let mut total = 0;
    for d in &gold().dialogs {
        for t in d.user_turns() {
            p.entry(&d.dialog_id, t.turn_index).disambiguation_label = Some(false);
            positives += usize::from(t.frame.is_ambiguous());
            total += 1;
        }
    }
    assert!(positives > 0);
    let acc = eval_disambiguation(&p, gold()).unwrap().metric("accuracy").unwrap();
    assert!((acc - (1.0 - positives as f64 / total as f64)).abs() < 1e-12);
}

#[test]
fn missing_disambiguation_predictions_are_listed() {
    let c = labeled_corpus(&[true, false, false]);
    let mut p = label_preds(&c, &[true, false, false]);
    let did = c.dialogs[0].dialog_id.clone();
    p.dialogs.get_mut(&did).unwrap().remove(&2);
    match eval_disambiguation(&p, &c) {
        Err(EvalError::MissingPredictions { turns, .. }) => assert_eq!(turns, [format!("{did}:2")]),
        other => panic!("expected missing predictions, got {other:?}"),
    }
}

#[test]
fn unknown_prediction_keys_are_rejected() {
    let mut p = PredictionSet::default();
    p.entry("dialog_99999", 0).disambiguation_label = Some(false);
    p.entry(&gold().dialogs[0].dialog_id, 1).disambiguation_label = Some(false);
    match p.check_keys(gold()) {
        Err(EvalError::UnknownTurns(t)) => assert_eq!(t.len(), 2),
        other => panic!("{other:?}"),
    }
}

/// A dialog with one user turn referring to `gold` objects, not followed by a
/// disambiguation request.
fn single_turn_corpus(objects: Vec<u32>) -> Corpus {
    let base = gold()
        .dialogs
        .iter()
        .find(|d| !d.followed_by_disambiguation(0))
        .unwrap();
    let mut d = base.clone();
    d.turns.truncate(2);
    d.turns[0].frame.objects = objects;
    Corpus::new(gold().snapshots.clone(), vec![d])
}

#[test]
fn coref_examples() {
    let c = single_turn_corpus(vec![0, 8]);
    let mut p = PredictionSet::default();
    p.entry(&c.dialogs[0].dialog_id, 0).objects = Some(vec![8, 0]);
    let r = eval_coref(&p, &c);
    assert_eq!(
        (r.metric("precision"), r.metric("recall"), r.metric("f1")),
        (Some(1.0), Some(1.0), Some(1.0))
    );

    let c = single_turn_corpus(vec![8]);
    let mut p = PredictionSet::default();
    p.entry(&c.dialogs[0].dialog_id, 0).objects = Some(vec![3, 8]);
    let r = eval_coref(&p, &c);
    assert_eq!(r.metric("precision"), Some(0.5));
    assert_eq!(r.metric("recall"), Some(1.0));
    assert!((r.metric("f1").unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

fn excluded_turns(c: &Corpus) -> Vec<(String, usize)> {
    c.dialogs
        .iter()
        .flat_map(|d| {
            d.user_turns()
                .filter(|t| d.followed_by_disambiguation(t.turn_index))
                .map(|t| (d.dialog_id.clone(), t.turn_index))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn coref_ignores_predictions_on_excluded_turns() {
    let excluded = excluded_turns(gold());
    assert!(!excluded.is_empty());
    let mut rng = seeded(3);
    let base = perturb(&perfect_predictions(gold(), FrameMode::Cumulative, None), &mut rng);
    let before = eval_coref(&base, gold());
    let mut injected = base.clone();
    for (did, t) in &excluded {
        injected.entry(did, *t).objects = Some((0..rng.random_range(0..6)).map(|_| rng.random_range(0..30)).collect());
    }
    assert_eq!(eval_coref(&injected, gold()).metrics, before.metrics);
}

#[test]
fn removing_excluded_turns_leaves_coref_unchanged() {
    let mut rng = seeded(4);
    let preds = perturb(&perfect_predictions(gold(), FrameMode::Cumulative, None), &mut rng);
    let mut trimmed = gold().clone();
    let mut remapped = PredictionSet::default();
    for d in trimmed.dialogs.iter_mut() {
        let old = d.clone();
        d.turns.clear();
        let mut i = 0;
        while i < old.turns.len() {
            if old.turns[i].speaker == Speaker::User && old.followed_by_disambiguation(i) {
                i += 2;
                continue;
            }
            let mut t = old.turns[i].clone();
            let new_index = d.turns.len();
            if let Some(p) = preds.get(&old.dialog_id, i) {
                *remapped.entry(&old.dialog_id, new_index) = p.clone();
            }
            t.turn_index = new_index;
            d.turns.push(t);
            i += 1;
        }
    }
    assert!(excluded_turns(&trimmed).is_empty());
    let a = eval_coref(&preds, gold());
    let b = eval_coref(&remapped, &trimmed);
    for m in ["precision", "recall", "f1"] {
        assert_eq!(a.metric(m), b.metric(m), "{m}");
    }
}

#[test]
fn dst_slot_example() {
    let mut c = single_turn_corpus(vec![]);
    let f = &mut c.dialogs[0].turns[0].frame;
    f.request_slots.clear();
    f.slot_values = BTreeMap::from([("color".into(), "red".into()), ("type".into(), "jacket".into())]);
    let mut p = PredictionSet::default();
    p.entry(&c.dialogs[0].dialog_id, 0).frame = Some(FramePrediction {
        act: f.act,
        activity: f.activity,
        slot_values: BTreeMap::from([("color".into(), "Red".into())]),
        request_slots: BTreeSet::new(),
        objects: vec![],
    });
    let r = eval_dst(&p, &c, FrameMode::Cumulative);
    assert_eq!(r.metric("slot_precision"), Some(1.0));
    assert_eq!(r.metric("slot_recall"), Some(0.5));
    assert!((r.metric("slot_f1").unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(r.metric("joint_accuracy"), Some(0.0));
    assert_eq!(r.metric("intent_f1"), Some(1.0));
}

#[test]
fn cumulative_and_delta_frames_differ() {
    let d = gold()
        .dialogs
        .iter()
        .find(|d| d.user_turns().filter(|t| !t.frame.slot_values.is_empty()).count() >= 2)
        .unwrap();
    let last = d.user_turns().last().unwrap().turn_index;
    let cum = gold_frame(d, last, FrameMode::Cumulative);
    let delta = gold_frame(d, last, FrameMode::Delta);
    assert!(cum.slot_values.len() >= delta.slot_values.len());
    for (k, v) in &delta.slot_values {
        assert_eq!(&cum.slot_values[k], v);
    }
}

#[test]
fn coref_and_dst_match_set_arithmetic_oracle() {
    let perfect = perfect_predictions(gold(), FrameMode::Cumulative, None);
    for k in 0..100u64 {
        let mut rng = seeded(1000 + k);
        let c = sub_corpus(gold(), &mut rng);
        let bad = oracle_mismatches(&perturb(&perfect, &mut rng), &c);
        assert!(bad.is_empty(), "{bad:?}");
    }
}

fn bleu_close(got: f64, want: f64) {
    assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
}

#[test]
fn bleu_matches_hand_computed_values() {
    for (cand, refs, want) in bleu_cases() {
        bleu_close(bleu4(cand, &refs), want);
    }
}

#[test]
fn shorter_candidate_is_penalized() {
    let r = "the red jacket on the left is nice";
    let c = "the red jacket on the";
    let b = bleu4(c, &[r]);
    // Every n-gram of the candidate occurs in the reference.
    let unpenalized = 1.0;
    assert!(b < unpenalized);
    bleu_close(b, (1.0 - 8.0 / 5.0f64).exp());
}

#[test]
fn gold_first_ranking_scores_one() {
    let all_first: Vec<RankedTurn> = (0..20)
        .map(|i| RankedTurn {
            dialog_id: format!("d{i}"),
            turn_index: 0,
            ranking: (0..100).collect(),
            gold_index: 0,
        })
        .collect();
    let r = eval_retrieval(&all_first).unwrap();
    for m in ["r@1", "r@5", "r@10", "mean_rank", "mrr"] {
        assert_eq!(r.metric(m), Some(1.0));
    }
}

#[test]
fn random_ranker_mean_rank_is_half_the_pool() {
    let mut rng = seeded(77);
    let turns: Vec<RankedTurn> = (0..10_000)
        .map(|i| {
            let mut ranking: Vec<usize> = (0..100).collect();
            ranking.shuffle(&mut rng);
            RankedTurn {
                dialog_id: "d".into(),
                turn_index: i,
                ranking,
                gold_index: rng.random_range(0..100),
            }
        })
        .collect();
    let r = eval_retrieval(&turns).unwrap();
    let mean = r.metric("mean_rank").unwrap();
    assert!((mean - 50.5).abs() <= 2.0, "{mean}");
    assert!((1.0..=100.0).contains(&mean));
}

#[test]
fn candidate_sets_are_unique_and_seeded() {
    let a = build_retrieval_candidates(gold(), 100, 9).unwrap();
    let b = build_retrieval_candidates(gold(), 100, 9).unwrap();
    assert_eq!(a, b);
    let assistant_turns: usize = gold()
        .dialogs
        .iter()
        .map(|d| d.turns.iter().filter(|t| t.speaker == Speaker::Assistant).count())
        .sum();
    assert_eq!(a.len(), assistant_turns);
    let mut orderings = BTreeSet::new();
    for (did, turns) in &a.dialogs {
        let d = gold().dialog(did).unwrap();
        let own: BTreeSet<&str> = d
            .turns
            .iter()
            .filter(|t| t.speaker == Speaker::Assistant)
            .map(|t| t.utterance.as_str())
            .collect();
        for (&t, set) in turns {
            assert_eq!(set.candidates.len(), 100);
            let unique: BTreeSet<&String> = set.candidates.iter().collect();
            assert_eq!(unique.len(), 100);
            assert_eq!(set.candidates[set.gold_index], d.turns[t + 1].utterance);
            for (i, c) in set.candidates.iter().enumerate() {
                if i != set.gold_index {
                    assert!(!own.contains(c.as_str()));
                }
            }
            assert!(orderings.insert(set.candidates.clone()));
        }
    }
    let c = build_retrieval_candidates(gold(), 100, 10).unwrap();
    assert_ne!(a, c);
}

#[test]
fn pool_of_one_is_gold_only() {
    let a = build_retrieval_candidates(gold(), 1, 2).unwrap();
    let mut preds = PredictionSet::default();
    for (did, turns) in &a.dialogs {
        for (&t, set) in turns {
            assert_eq!(set.candidates.len(), 1);
            assert_eq!(set.gold_index, 0);
            preds.entry(did, t).ranking = Some(vec![0]);
        }
    }
    let r = eval_retrieval(&a.ranked_turns(&preds).unwrap()).unwrap();
    assert_eq!(r.metric("r@1"), Some(1.0));
}

#[test]
fn too_small_corpus_is_rejected() {
    let c = Corpus::new(gold().snapshots.clone(), gold().dialogs[..2].to_vec());
    assert!(matches!(
        build_retrieval_candidates(&c, 100, 1),
        Err(EvalError::CorpusTooSmall { pool_size: 100, .. })
    ));
    assert!(matches!(
        build_retrieval_candidates(&c, 0, 1),
        Err(EvalError::EmptyPool)
    ));
}

#[test]
fn missing_rankings_are_listed() {
    let a = build_retrieval_candidates(gold(), 10, 2).unwrap();
    let preds = PredictionSet::default();
    match a.ranked_turns(&preds) {
        Err(EvalError::MissingPredictions { turns, .. }) => assert_eq!(turns.len(), a.len()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn reports_serialize_with_smoothing_note() {
    let p = perfect_predictions(gold(), FrameMode::Cumulative, None);
    let r = eval_generation(&p, gold());
    assert!(r.notes.iter().any(|n| n.contains("add-one")));
    let json: serde_json::Value = serde_json::from_slice(&r.to_bytes()).unwrap();
    assert_eq!(json["task"], "gen");
    assert!(r.table().contains("bleu4"));
}

proptest! {
    #[test]
    fn bleu_is_invariant_to_vocabulary_relabeling(
        cand in prop::collection::vec(0usize..6, 1..12),
        refr in prop::collection::vec(0usize..6, 1..12),
        perm in Just((0usize..6).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let words = ["w0", "w1", "w2", "w3", "w4", "w5"];
        let render = |s: &[usize], map: &dyn Fn(usize) -> usize| s.iter().map(|&i| words[map(i)]).collect::<Vec<_>>().join(" ");
        let id = |i: usize| i;
        let pm = |i: usize| perm[i];
        let a = bleu4(&render(&cand, &id), &[&render(&refr, &id)]);
        let b = bleu4(&render(&cand, &pm), &[&render(&refr, &pm)]);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn reports_stay_in_range(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let preds = perturb(&perfect_predictions(gold(), FrameMode::Cumulative, None), &mut rng);
        assert_prf_identity(&eval_coref(&preds, gold()));
        assert_prf_identity(&eval_dst(&preds, gold(), FrameMode::Delta));
        let g = eval_generation(&preds, gold());
        prop_assert!((0.0..=1.0).contains(&g.metric("bleu4").unwrap()));
    }
}
