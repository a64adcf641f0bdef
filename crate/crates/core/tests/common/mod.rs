//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

pub mod metrics;

use simmc_core::catalog::{Catalog, CatalogItem};
use simmc_core::corpus::{generate_corpus, Corpus};
use simmc_core::scenegen::capture::Primitive;
use simmc_core::scenegen::{Camera, Execution, SceneConfig, ScenePool, SceneSnapshot};
use simmc_core::simulator::SimulatorConfig;

pub fn small_scene_config() -> SceneConfig {
    SceneConfig {
        rearrangements_per_seed: 3,
        snapshots_per_instance: 5,
        ..SceneConfig::default()
    }
}

/// A 200-dialog corpus over a small pool, built once per test binary.
pub fn fixture() -> &'static (ScenePool, Corpus) {
    static F: OnceLock<(ScenePool, Corpus)> = OnceLock::new();
    F.get_or_init(|| {
        generate_corpus(
            &small_scene_config(),
            &SimulatorConfig::default(),
            200,
            11,
            Execution::Parallel,
        )
        .expect("fixture corpus")
    })
}

/// Visibility of every object primitive from a `res x res` z-buffer laid over
/// that primitive's own projected rectangle. A sample counts as visible when it
/// lies inside the image and the target wins the depth test there; ties go to
/// the lower primitive index. Non-object primitives get 0.
pub fn zbuffer_visibility(prims: &[Primitive], camera: &Camera, res: usize) -> Vec<f64> {
    let w = f64::from(camera.image_size[0]);
    let h = f64::from(camera.image_size[1]);
    (0..prims.len())
        .map(|i| {
            let t = &prims[i];
            if t.object.is_none() || t.rect.area() <= 0.0 {
                return 0.0;
            }
            // Primitives that could win a sample inside the target rectangle.
            let nearer: Vec<&Primitive> = prims
                .iter()
                .enumerate()
                .filter(|&(j, q)| {
                    (q.depth, j) < (t.depth, i)
                        && q.rect.x0 < t.rect.x1
                        && q.rect.x1 > t.rect.x0
                        && q.rect.y0 < t.rect.y1
                        && q.rect.y1 > t.rect.y0
                })
                .map(|(_, q)| q)
                .collect();
            let mut won = 0usize;
            for v in 0..res {
                let y = t.rect.y0 + (v as f64 + 0.5) / res as f64 * (t.rect.y1 - t.rect.y0);
                if !(0.0..h).contains(&y) {
                    continue;
                }
                for u in 0..res {
                    let x = t.rect.x0 + (u as f64 + 0.5) / res as f64 * (t.rect.x1 - t.rect.x0);
                    if !(0.0..w).contains(&x) {
                        continue;
                    }
                    let hidden = nearer
                        .iter()
                        .any(|q| x >= q.rect.x0 && x < q.rect.x1 && y >= q.rect.y0 && y < q.rect.y1);
                    won += usize::from(!hidden);
                }
            }
            won as f64 / (res * res) as f64
        })
        .collect()
}

fn item_by_scan<'c>(catalog: &'c Catalog, item_id: &str) -> &'c CatalogItem {
    catalog
        .items()
        .iter()
        .find(|i| i.item_id == item_id)
        .expect("catalog item")
}

fn field_matches(item: &CatalogItem, slot: &str, value: &str) -> bool {
    let v = value.trim().to_lowercase();
    let eq = |s: &str| s.trim().to_lowercase() == v;
    match slot {
        "type" => eq(&item.category),
        "color" => eq(&item.color),
        "pattern" => eq(&item.pattern),
        "material" => item.material.as_deref().is_some_and(eq),
        "brand" => eq(&item.brand),
        "size" => item.available_sizes.iter().any(|s| eq(s)),
        "price" => v.parse::<f64>().is_ok_and(|x| (x - item.price.to_f64()).abs() < 1e-9),
        "customer_rating" => v.parse::<f64>().is_ok_and(|x| (x - item.customer_rating).abs() < 1e-9),
        _ => false,
    }
}

/// Linear scan over visible objects and the raw item list.
pub fn brute_force_search(
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    constraints: &BTreeMap<String, String>,
) -> Vec<u32> {
    let mut out: Vec<u32> = snapshot
        .objects
        .iter()
        .filter(|o| {
            let item = item_by_scan(catalog, &o.item_id);
            constraints.iter().all(|(k, v)| field_matches(item, k, v))
        })
        .map(|o| o.local_index)
        .collect();
    out.sort_unstable();
    out
}

/// Micro (tp, fp, fn) over a list of (predicted, gold) sets, by explicit membership loops.
pub fn set_counts<T: Ord + Clone>(pairs: &[(BTreeSet<T>, BTreeSet<T>)]) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (pred, gold) in pairs {
        for p in pred {
            if gold.iter().any(|g| g == p) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        for g in gold {
            if !pred.iter().any(|p| p == g) {
                fn_ += 1;
            }
        }
    }
    (tp, fp, fn_)
}

pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}
