//! Acceptance checks for the generation and evaluation pipeline. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use simmc_core::corpus::{compute_stats, generate_corpus, split, Corpus, PoolFile, SplitSpec};
use simmc_core::eval::*;
use simmc_core::ontology::{Ontology, Speaker};
use simmc_core::rng::{seeded, stream};
use simmc_core::scenegen::capture::{primitive_visibility, project_primitives};
use simmc_core::scenegen::*;
use simmc_core::simulator::SimulatorConfig;

use common::metrics::{bleu_cases, oracle_mismatches, perturb, sub_corpus};

const MASTER_SEED: u64 = 2024;
const DIALOGS: usize = 1000;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

struct Harness {
    failures: usize,
}

impl Harness {
    fn run(&mut self, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let o = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let ok = o.ok && in_time;
        if !ok {
            self.failures += 1;
        }
        println!(
            "{} {name}: {} [{:.2}s, limit {}s{}]",
            if ok { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", too slow" },
        );
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn pool_arithmetic() -> Outcome {
    let config = SceneConfig::default();
    let seeds = config.load_seeds().expect("seeds");
    let catalogs = config.load_catalogs().expect("catalogs");
    let fashion = seeds
        .iter()
        .filter(|s| s.domain == simmc_core::catalog::Domain::Fashion)
        .count();
    let pool = generate_pool(&seeds, &catalogs, &config, MASTER_SEED, Execution::Parallel).expect("pool");
    let min_objects = pool.snapshots.iter().map(|s| s.objects.len()).min().unwrap_or(0);
    let ok =
        fashion == 7 && seeds.len() == 8 && pool.candidates == 1600 && pool.snapshots.len() <= 1600 && min_objects >= 5;
    outcome(
        ok,
        format!(
            "seeds {}+{}, pre-filter {}, post-filter {}, min objects {min_objects}",
            fashion,
            seeds.len() - fashion,
            pool.candidates,
            pool.snapshots.len()
        ),
    )
}

fn generate(execution: Execution) -> (Vec<u8>, Corpus) {
    let scene = SceneConfig::default();
    let (pool, corpus) =
        generate_corpus(&scene, &SimulatorConfig::default(), DIALOGS, MASTER_SEED, execution).expect("corpus");
    (PoolFile::new(&pool, &scene, MASTER_SEED).to_bytes(), corpus)
}

fn determinism(slot: &mut Option<Corpus>) -> Outcome {
    let (pool_a, a) = generate(Execution::Parallel);
    let (pool_b, b) = generate(Execution::Parallel);
    let (pool_c, c) = generate(Execution::Serial);
    let repeat = pool_a == pool_b && a.to_bytes() == b.to_bytes();
    let serial = pool_a == pool_c && a.to_bytes() == c.to_bytes();
    let detail = format!(
        "{DIALOGS} dialogs x3, repeat identical {repeat}, serial == parallel {serial}, corpus {} bytes",
        a.to_bytes().len()
    );
    *slot = Some(a);
    outcome(repeat && serial, detail)
}

fn signature(c: &Corpus) -> Outcome {
    let s = compute_stats(c).expect("stats");
    let snaps = c.snapshot_index();
    let min_scene = c
        .dialogs
        .iter()
        .map(|d| snaps[d.snapshot_ids[0].as_str()].objects.len())
        .min()
        .unwrap_or(0);
    let ok = (8.4..=12.4).contains(&s.avg_utterances_per_dialog)
        && s.avg_objects_in_scene_per_dialog >= 5.0
        && min_scene >= 5
        && (s.avg_objects_in_scene_per_dialog - 19.7).abs() <= 5.0
        && (s.two_snapshot_fraction - 0.17).abs() <= 0.05;
    outcome(
        ok,
        format!(
            "utterances/dialog {:.3} (in [8.4, 12.4]), objects in scene {:.3} (19.7 +- 5, min {min_scene}), two-snapshot {:.3} (0.17 +- 0.05), objects mentioned {:.3}",
            s.avg_utterances_per_dialog,
            s.avg_objects_in_scene_per_dialog,
            s.two_snapshot_fraction,
            s.avg_objects_mentioned_per_dialog
        ),
    )
}

fn geometry() -> Outcome {
    let seeds = builtin_seeds();
    let catalogs = CatalogSet::bundled();
    let cam_cfg = CameraConfig::default();
    let min_area = CaptureConfig::default().min_area_px;
    let (mut worst, mut worst_all, mut compared) = (0.0f64, 0.0f64, 0usize);
    for i in 0..200u64 {
        let seed = &seeds[i as usize % seeds.len()];
        let mut rng = stream(MASTER_SEED, &[99, i]);
        let inst = rearrange(seed, catalogs.get(seed.domain).unwrap(), &mut rng, format!("g{i}"), 50).expect("arrange");
        let cam = sample_camera(seed, &cam_cfg, &mut rng);
        let prims = project_primitives(&inst, &cam);
        let fast = primitive_visibility(&prims, &cam.image_rect(), 64);
        let oracle = common::zbuffer_visibility(&prims, &cam, 256);
        for (k, p) in prims.iter().enumerate() {
            if p.object.is_none() || !p.annotatable {
                continue;
            }
            let d = (fast[k] - oracle[k]).abs();
            worst_all = worst_all.max(d);
            if p.rect.intersect(&cam.image_rect()).area() >= min_area {
                worst = worst.max(d);
                compared += 1;
            }
        }
    }
    outcome(
        worst <= 0.05 && compared > 0,
        format!("200 pairs, {compared} objects above min area, max |diff| {worst:.4} (all objects {worst_all:.4})"),
    )
}

fn identities(c: &Corpus) -> Outcome {
    let cands = build_retrieval_candidates(c, DEFAULT_POOL_SIZE, MASTER_SEED).expect("candidates");
    let p = perfect_predictions(c, FrameMode::Cumulative, Some(&cands));
    let acc = eval_disambiguation(&p, c).expect("disamb").metric("accuracy").unwrap();
    let coref = eval_coref(&p, c);
    let dst = eval_dst(&p, c, FrameMode::Cumulative);
    let bleu = eval_generation(&p, c).metric("bleu4").unwrap();
    let ret = eval_retrieval(&cands.ranked_turns(&p).expect("rankings")).expect("retrieval");
    let values = [
        acc,
        coref.metric("f1").unwrap(),
        dst.metric("intent_f1").unwrap(),
        dst.metric("slot_f1").unwrap(),
        dst.metric("object_f1").unwrap(),
        ret.metric("r@1").unwrap(),
        ret.metric("mrr").unwrap(),
        ret.metric("mean_rank").unwrap(),
    ];
    let exact = values.iter().all(|&v| v == 1.0) && (bleu - 1.0).abs() < 1e-12;

    let mut rng = seeded(MASTER_SEED);
    let noisy = perturb(&p, &mut rng);
    let before = eval_coref(&noisy, c);
    let mut injected = noisy.clone();
    let mut excluded = 0;
    for d in &c.dialogs {
        for t in d.user_turns().filter(|t| d.followed_by_disambiguation(t.turn_index)) {
            injected.entry(&d.dialog_id, t.turn_index).objects =
                Some((0..rng.random_range(1..6)).map(|_| rng.random_range(0..30)).collect());
            excluded += 1;
        }
    }
    let unchanged = eval_coref(&injected, c).metrics == before.metrics;
    outcome(
        exact && unchanged && excluded > 0,
        format!(
            "acc/coref/intent/slot/object/r@1/mrr/mean_rank = {values:?}, bleu {bleu}, injection on {excluded} excluded turns unchanged {unchanged}"
        ),
    )
}

fn oracles(c: &Corpus) -> Outcome {
    let cases = bleu_cases();
    let bleu_bad = cases
        .iter()
        .filter(|(cand, refs, want)| (bleu4(cand, refs) - want).abs() > 1e-12)
        .count();

    let perfect = perfect_predictions(c, FrameMode::Cumulative, None);
    let mut set_bad = 0;
    for k in 0..100u64 {
        let mut rng = seeded(MASTER_SEED + k);
        let sub = sub_corpus(c, &mut rng);
        set_bad += usize::from(!oracle_mismatches(&perturb(&perfect, &mut rng), &sub).is_empty());
    }

    let pool = DEFAULT_POOL_SIZE;
    let mut rng = seeded(MASTER_SEED);
    let turns: Vec<RankedTurn> = (0..10_000)
        .map(|i| {
            let mut ranking: Vec<usize> = (0..pool).collect();
            ranking.shuffle(&mut rng);
            RankedTurn {
                dialog_id: "random".into(),
                turn_index: i,
                ranking,
                gold_index: rng.random_range(0..pool),
            }
        })
        .collect();
    let mean = eval_retrieval(&turns).expect("retrieval").metric("mean_rank").unwrap();
    let expect = (pool as f64 + 1.0) / 2.0;
    outcome(
        bleu_bad == 0 && set_bad == 0 && (mean - expect).abs() <= 2.0,
        format!(
            "bleu {}/{} exact, set oracle {}/100 corpora exact, random mean rank {mean:.3} (expected {expect} +- 2)",
            cases.len() - bleu_bad,
            cases.len(),
            100 - set_bad
        ),
    )
}

fn split_contract(c: &Corpus) -> Outcome {
    let a = split(c, &SplitSpec::default()).expect("split");
    let sizes: Vec<usize> = ["train", "dev", "devtest", "teststd"]
        .iter()
        .map(|k| a[*k].len())
        .collect();
    let mut all: Vec<&String> = a.values().flatten().collect();
    all.sort();
    let ids: Vec<&String> = {
        let mut v: Vec<&String> = c.dialogs.iter().map(|d| &d.dialog_id).collect();
        v.sort();
        v
    };
    let partition = all == ids;
    outcome(
        sizes == [650, 100, 100, 150] && partition,
        format!("sizes {sizes:?}, partition {partition}"),
    )
}

/// Independent structural checks; returns a description of the first problem.
fn structural_problem(c: &Corpus, max_turns: usize) -> Option<String> {
    let ontology = Ontology::builtin();
    let snaps = c.snapshot_index();
    for d in &c.dialogs {
        let id = &d.dialog_id;
        if d.turns.len() < 2 || d.turns.len() > max_turns {
            return Some(format!("{id}: length {}", d.turns.len()));
        }
        for (i, t) in d.turns.iter().enumerate() {
            let want = if i % 2 == 0 { Speaker::User } else { Speaker::Assistant };
            if t.speaker != want || t.turn_index != i {
                return Some(format!("{id}: turn {i} out of order"));
            }
            if !ontology.allows(t.speaker, t.frame.intent()) {
                return Some(format!("{id}: turn {i} intent {}", t.frame.intent()));
            }
            if !d.snapshot_ids.contains(&t.active_snapshot) {
                return Some(format!("{id}: turn {i} snapshot {}", t.active_snapshot));
            }
            let Some(snap) = snaps.get(t.active_snapshot.as_str()) else {
                return Some(format!("{id}: missing snapshot {}", t.active_snapshot));
            };
            let n = snap.objects.len() as u32;
            if let Some(o) = t.frame.objects.iter().find(|&&o| o >= n) {
                return Some(format!("{id}: turn {i} object {o} of {n}"));
            }
            if t.speaker == Speaker::User && t.frame.disambiguation_label == Some(true) {
                let next = d.turns.get(i + 1).map(|n| (n.speaker, n.frame.intent().to_string()));
                if next != Some((Speaker::Assistant, "REQUEST:DISAMBIGUATE".to_string())) {
                    return Some(format!("{id}: turn {i} ambiguous but followed by {next:?}"));
                }
            }
        }
    }
    None
}

fn structure(corpora: &[(&str, &Corpus, usize)]) -> Outcome {
    let mut checked = BTreeSet::new();
    for (name, c, max_turns) in corpora {
        if let Some(p) = structural_problem(c, *max_turns) {
            return outcome(false, format!("{name}: {p}"));
        }
        checked.insert(format!("{name} ({} dialogs)", c.dialogs.len()));
    }
    outcome(
        true,
        format!("checked {}", checked.into_iter().collect::<Vec<_>>().join(", ")),
    )
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };
    h.run("pool arithmetic", secs(30), pool_arithmetic);
    let mut corpus = None;
    // Three full generations, each within the per-generation budget.
    h.run("determinism", secs(3 * 120), || determinism(&mut corpus));
    let Some(c) = corpus else {
        println!("FAIL remaining criteria: no corpus");
        return ExitCode::FAILURE;
    };
    h.run("statistical signature", secs(120), || signature(&c));
    h.run("geometry oracle", secs(60), geometry);
    h.run("metric identities", secs(10), || identities(&c));
    h.run("metric oracles", secs(60), || oracles(&c));
    h.run("split contract", secs(1), || split_contract(&c));

    let sim = SimulatorConfig::default();
    let short = SimulatorConfig {
        max_turns: 6,
        ambiguity_injection_rate: 0.5,
        ..SimulatorConfig::default()
    };
    h.run("structural invariants", secs(120), || {
        let small = common::small_scene_config();
        let extra = generate_corpus(&small, &short, 300, 5, Execution::Parallel)
            .expect("corpus")
            .1;
        structure(&[
            ("default", &c, sim.max_turns),
            ("fixture", &common::fixture().1, sim.max_turns),
            ("short, ambiguous", &extra, short.max_turns),
        ])
    });

    if h.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", h.failures);
        ExitCode::FAILURE
    }
}
