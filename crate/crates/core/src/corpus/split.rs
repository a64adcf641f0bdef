use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};
use crate::rng::{self, streams};

pub const SPLIT_NAMES: [&str; 4] = ["train", "dev", "devtest", "teststd"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fractions for train, dev, devtest and teststd.
    pub ratios: [f64; 4],
    pub seed: u64,
    /// Keep all dialogs grounded in one scene instance inside one split.
    #[serde(default)]
    pub scene_disjoint: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            ratios: [0.65, 0.10, 0.10, 0.15],
            seed: 0,
            scene_disjoint: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(CorpusError::InvalidSplit(format!(
                "negative ratio in {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidSplit(format!("ratios sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Split name → dialog ids, in assignment order.
pub type SplitAssignment = BTreeMap<String, Vec<String>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub spec: SplitSpec,
    pub assignment: SplitAssignment,
}

/// Largest-remainder rounding of `ratios * n`; ties go to the earlier split.
pub fn split_sizes(n: usize, ratios: &[f64; 4]) -> [usize; 4] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 4];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut left = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..4).collect();
    // Remainders are compared on a 1e-9 grid so float noise cannot break ties.
    order.sort_by_key(|&i| {
        (
            std::cmp::Reverse(((exact[i] - exact[i].floor()) * 1e9).round() as i64),
            i,
        )
    });
    if ratios.iter().all(|&r| r <= 0.0) {
        return sizes;
    }
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            sizes[i] += 1;
            left -= 1;
        }
    }
    sizes
}

/// Dialog-level random partition with sizes from [`split_sizes`]. In
/// scene-disjoint mode whole scene instances are assigned greedily to the
/// split furthest below its target, so sizes are approximate.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<SplitAssignment, CorpusError> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, &[streams::SPLIT]);
    let n = corpus.dialogs.len();
    let sizes = split_sizes(n, &spec.ratios);
    let mut out: SplitAssignment = SPLIT_NAMES.iter().map(|s| (s.to_string(), Vec::new())).collect();

    if !spec.scene_disjoint {
        let mut ids: Vec<&str> = corpus.dialogs.iter().map(|d| d.dialog_id.as_str()).collect();
        ids.shuffle(&mut rng);
        let mut it = ids.into_iter();
        for (name, size) in SPLIT_NAMES.iter().zip(sizes) {
            out.get_mut(*name)
                .expect("split exists")
                .extend(it.by_ref().take(size).map(str::to_string));
        }
        return Ok(out);
    }

    let snaps = corpus.snapshot_index();
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for d in &corpus.dialogs {
        let key = d
            .snapshot_ids
            .first()
            .and_then(|id| snaps.get(id.as_str()))
            .map(|s| s.instance_id.clone())
            .unwrap_or_else(|| d.dialog_id.clone());
        groups.entry(key).or_default().push(d.dialog_id.clone());
    }
    let mut groups: Vec<Vec<String>> = groups.into_values().collect();
    groups.shuffle(&mut rng);
    let mut filled = [0usize; 4];
    for g in groups {
        let i = (0..4)
            .filter(|&i| spec.ratios[i] > 0.0)
            .max_by(|&a, &b| {
                let da = sizes[a] as f64 - filled[a] as f64;
                let db = sizes[b] as f64 - filled[b] as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("some ratio is positive");
        filled[i] += g.len();
        out.get_mut(SPLIT_NAMES[i]).expect("split exists").extend(g);
    }
    Ok(out)
}
