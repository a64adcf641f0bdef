use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::{Arc, OnceLock};

use simmc_annotsvc::{StoreConfig, SystemClock, TaskStore};
use simmc_core::corpus::{Corpus, PoolFile, SplitInfo};
use simmc_core::eval::{perfect_predictions, FrameMode, RetrievalCandidates};

fn simmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simmc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = simmc(args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    corpus: PathBuf,
}

/// Small scene config, pool and 60-dialog corpus produced through the CLI.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let scene = root.join("scene.json");
        std::fs::write(&scene, r#"{"rearrangements_per_seed": 2, "snapshots_per_instance": 4}"#).unwrap();
        let pool = root.join("pool.json");
        ok(&["gen-scenes", "--config", p(&scene), "--seed", "3", "--out", p(&pool)]);
        let corpus = root.join("out/corpus.json");
        ok(&[
            "gen-dialogs",
            "--pool",
            p(&pool),
            "--count",
            "60",
            "--seed",
            "3",
            "--out",
            p(&corpus),
        ]);
        Fixture {
            _dir: dir,
            root,
            corpus,
        }
    })
}

#[test]
fn pool_and_dialog_generation_is_reproducible() {
    let f = fixture();
    let pool = PoolFile::load(f.root.join("pool.json")).unwrap();
    assert_eq!(pool.candidates, 8 * 2 * 4);
    let c = Corpus::load(&f.corpus).unwrap();
    assert_eq!(c.dialogs.len(), 60);
    assert!(c.generation.is_some());

    let scene = f.root.join("scene.json");
    let again = f.root.join("again.json");
    ok(&[
        "gen-dialogs",
        "--scene-config",
        p(&scene),
        "--count",
        "60",
        "--seed",
        "3",
        "--serial",
        "--out",
        p(&again),
    ]);
    assert_eq!(std::fs::read(&again).unwrap(), std::fs::read(&f.corpus).unwrap());
    ok(&["validate", "--corpus", p(&f.corpus)]);
}

#[test]
fn split_and_stats() {
    let f = fixture();
    let out = f.root.join("split.json");
    let with = f.root.join("corpus_split.json");
    ok(&[
        "split",
        "--corpus",
        p(&f.corpus),
        "--ratios",
        "0.5,0.2,0.1,0.2",
        "--out",
        p(&out),
        "--corpus-out",
        p(&with),
    ]);
    let info: SplitInfo = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let sizes: Vec<usize> = ["train", "dev", "devtest", "teststd"]
        .iter()
        .map(|k| info.assignment[*k].len())
        .collect();
    assert_eq!(sizes, [30, 12, 6, 12]);
    assert_eq!(Corpus::load(&with).unwrap().split_info.unwrap(), info);

    let o = simmc(&[
        "split",
        "--corpus",
        p(&f.corpus),
        "--ratios",
        "0.5,0.5,0.5,0.5",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let stats = f.root.join("stats.json");
    let csv = f.root.join("csv");
    ok(&[
        "stats",
        "--corpus",
        p(&f.corpus),
        "--out",
        p(&stats),
        "--csv-dir",
        p(&csv),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&stats).unwrap()).unwrap();
    assert_eq!(v["dialogs"], 60);
    assert!(csv.join("coref_distance.csv").exists());
    assert!(csv.join("act_transitions.csv").exists());
}

#[test]
fn eval_reports_perfect_scores_and_exit_codes() {
    let f = fixture();
    let gold = Corpus::load(&f.corpus).unwrap();
    let cands_path = f.root.join("cands.json");
    ok(&[
        "gen-candidates",
        "--corpus",
        p(&f.corpus),
        "--pool-size",
        "20",
        "--seed",
        "1",
        "--out",
        p(&cands_path),
    ]);
    let cands = RetrievalCandidates::load(&cands_path).unwrap();
    let preds = perfect_predictions(&gold, FrameMode::Delta, Some(&cands));
    let pred_path = f.root.join("pred.json");
    std::fs::write(&pred_path, preds.to_bytes()).unwrap();

    for (task, metric) in [
        ("disamb", "accuracy"),
        ("coref", "f1"),
        ("dst", "slot_f1"),
        ("gen", "bleu4"),
        ("retrieval", "mrr"),
    ] {
        let report = f.root.join(format!("{task}.json"));
        let o = ok(&[
            "eval",
            "--task",
            task,
            "--gold",
            p(&f.corpus),
            "--pred",
            p(&pred_path),
            "--frame-mode",
            "delta",
            "--candidates",
            p(&cands_path),
            "--out",
            p(&report),
        ]);
        assert!(String::from_utf8_lossy(&o.stdout).contains(metric), "{task}");
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
        assert!((v["metrics"][metric].as_f64().unwrap() - 1.0).abs() < 1e-12, "{task}");
    }

    // Missing predictions are a validation failure.
    let mut partial = preds.clone();
    let first = partial.dialogs.keys().next().unwrap().clone();
    partial.dialogs.remove(&first);
    let partial_path = f.root.join("partial.json");
    std::fs::write(&partial_path, partial.to_bytes()).unwrap();
    let o = simmc(&[
        "eval",
        "--task",
        "disamb",
        "--gold",
        p(&f.corpus),
        "--pred",
        p(&partial_path),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing predictions"));

    let o = simmc(&[
        "eval",
        "--task",
        "retrieval",
        "--gold",
        p(&f.corpus),
        "--pred",
        p(&pred_path),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = simmc(&[
        "eval",
        "--task",
        "coref",
        "--gold",
        "/nonexistent.json",
        "--pred",
        p(&pred_path),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = simmc(&["eval", "--task", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_flags_broken_corpora() {
    let f = fixture();
    let mut c = Corpus::load(&f.corpus).unwrap();
    c.dialogs[0].turns[0].frame.objects = vec![999];
    let bad = f.root.join("bad.json");
    c.save(&bad).unwrap();
    let o = simmc(&["validate", "--corpus", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains(&c.dialogs[0].dialog_id));
}

#[test]
fn catalog_generation() {
    let f = fixture();
    let out = f.root.join("cat.json");
    ok(&[
        "gen-catalog",
        "--domain",
        "furniture",
        "--count",
        "30",
        "--out",
        p(&out),
    ]);
    let cat = simmc_core::catalog::Catalog::load(&out).unwrap();
    assert_eq!(cat.items().len(), 30);
    let o = simmc(&["gen-catalog", "--domain", "toys", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

fn http_get(addr: &str, path: &str) -> (u16, String) {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut text = String::new();
    s.read_to_string(&mut text).unwrap();
    let status = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    let body = text
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

#[test]
fn serve_annotation_then_export() {
    let f = fixture();
    let journal = f.root.join("ann/journal.jsonl");
    std::fs::create_dir_all(journal.parent().unwrap()).unwrap();
    let ui = f.root.join("ui");
    std::fs::create_dir_all(&ui).unwrap();
    std::fs::write(ui.join("index.html"), "annotator").unwrap();

    let mut child = Command::new(env!("CARGO_BIN_EXE_simmc"))
        .args([
            "serve-annotation",
            "--port",
            "0",
            "--journal",
            p(&journal),
            "--corpus",
            p(&f.corpus),
            "--ui-dir",
            p(&ui),
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server prints its address").unwrap();
        if let Some(a) = line.strip_prefix("listening on http://") {
            break a.to_string();
        }
    };
    let (status, body) = http_get(&addr, "/progress");
    assert_eq!(status, 200);
    assert!(body.contains("\"total\":60"), "{body}");
    let (status, body) = http_get(&addr, "/");
    assert_eq!(status, 200);
    assert!(body.contains("annotator"));
    let (status, _) = http_get(&addr, "/tasks/next?worker=w1");
    assert_eq!(status, 200);
    child.kill().unwrap();
    child.wait().unwrap();

    // Complete two tasks directly against the journal, then export.
    {
        let store = TaskStore::open(&journal, StoreConfig::default(), Arc::new(SystemClock)).unwrap();
        for w in ["w1", "w2"] {
            let t = store.next_task(w).unwrap().unwrap();
            let p: Vec<String> = t
                .turns
                .iter()
                .map(|x| format!("{} (reworded)", x.template_utterance))
                .collect();
            store.submit(&t.task_id, w, p).unwrap();
        }
    }
    let out = f.root.join("paraphrased.json");
    ok(&[
        "export-paraphrased",
        "--corpus",
        p(&f.corpus),
        "--journal",
        p(&journal),
        "--out",
        p(&out),
    ]);
    let exported = Corpus::load(&out).unwrap();
    let changed = exported
        .dialogs
        .iter()
        .filter(|d| d.turns.iter().all(|t| t.utterance.ends_with("(reworded)")))
        .count();
    assert_eq!(changed, 2);
    let again = f.root.join("paraphrased2.json");
    ok(&[
        "export-paraphrased",
        "--corpus",
        p(&out),
        "--journal",
        p(&journal),
        "--out",
        p(&again),
    ]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let o = simmc(&[
        "export-paraphrased",
        "--corpus",
        p(&f.corpus),
        "--journal",
        "/nonexistent/j",
        "--out",
        p(&again),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn review_mode_needs_approval() {
    let f = fixture();
    let journal = f.root.join("review.jsonl");
    let task_id = {
        let store = TaskStore::open(
            &journal,
            StoreConfig {
                auto_approve: false,
                ..StoreConfig::default()
            },
            Arc::new(SystemClock),
        )
        .unwrap();
        store.enqueue(&Corpus::load(&f.corpus).unwrap()).unwrap();
        let t = store.next_task("w").unwrap().unwrap();
        let p: Vec<String> = t.turns.iter().map(|x| x.template_utterance.clone()).collect();
        store.submit(&t.task_id, "w", p).unwrap();
        t.task_id
    };
    ok(&["approve", "--journal", p(&journal), "--task", &task_id]);
    let o = simmc(&["approve", "--journal", p(&journal), "--task", &task_id]);
    assert_eq!(o.status.code(), Some(1));
}
