//! End-to-end corpus generation, splits and statistics.

mod split;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::CatalogError;
use crate::ontology::{validate_dialog, Dialog, Ontology};
use crate::rng::{self, streams};
use crate::scenegen::{generate_pool, Execution, SceneConfig, SceneError, ScenePool, SceneSnapshot};
use crate::simulator::{run_self_play, SimError, SimulatorConfig};

pub use split::{split, split_sizes, SplitAssignment, SplitInfo, SplitSpec, SPLIT_NAMES};
pub use stats::{act_transition_graph, compute_stats, coref_distances, CorpusStats, Edge, DEFAULT_MAX_ROUND};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read or write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {what}: {source}")]
    Parse { what: String, source: serde_json::Error },
    #[error("unsupported schema_version {0}")]
    Schema(u32),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Simulator(#[from] SimError),
    #[error("dialog {ordinal}: {source}")]
    Dialog { ordinal: usize, source: SimError },
    #[error("dialog {dialog_id} is invalid: {violations:?}")]
    Invalid { dialog_id: String, violations: Vec<String> },
    #[error("the scene pool is empty; no snapshot has enough objects")]
    EmptyPool,
    #[error("invalid split spec: {0}")]
    InvalidSplit(String),
    #[error("corpus carries no generation info")]
    NoGenerationInfo,
    #[error("statistics need a non-empty corpus")]
    EmptyCorpus,
    #[error("dialog {dialog_id} references unknown snapshot {snapshot_id}")]
    MissingSnapshot { dialog_id: String, snapshot_id: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Everything needed to regenerate a corpus byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationInfo {
    pub master_seed: u64,
    pub dialog_count: usize,
    pub scene_config: SceneConfig,
    pub simulator_config: SimulatorConfig,
}

/// Dialog corpus file. `snapshots` holds every snapshot a dialog refers to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_info: Option<SplitInfo>,
    pub snapshots: Vec<SceneSnapshot>,
    pub dialogs: Vec<Dialog>,
}

impl Corpus {
    pub fn new(snapshots: Vec<SceneSnapshot>, dialogs: Vec<Dialog>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            generation: None,
            split_info: None,
            snapshots,
            dialogs,
        }
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CorpusError> {
        let c: Corpus = serde_json::from_slice(bytes).map_err(|e| CorpusError::Parse {
            what: "corpus".into(),
            source: e,
        })?;
        if c.schema_version != SCHEMA_VERSION {
            return Err(CorpusError::Schema(c.schema_version));
        }
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        Self::from_slice(&std::fs::read(path).map_err(io_err(path))?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("corpus serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn snapshot_index(&self) -> BTreeMap<&str, &SceneSnapshot> {
        self.snapshots.iter().map(|s| (s.snapshot_id.as_str(), s)).collect()
    }

    pub fn dialog(&self, dialog_id: &str) -> Option<&Dialog> {
        self.dialogs.iter().find(|d| d.dialog_id == dialog_id)
    }

    /// All ontology violations, per dialog id.
    pub fn validate(&self, ontology: &Ontology) -> BTreeMap<String, Vec<String>> {
        let index = self.snapshot_index();
        self.dialogs
            .iter()
            .filter_map(|d| {
                let v = validate_dialog(d, ontology, |id| index.get(id).copied());
                (!v.is_empty()).then(|| (d.dialog_id.clone(), v.iter().map(ToString::to_string).collect()))
            })
            .collect()
    }
}

/// Scene pool file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolFile {
    pub schema_version: u32,
    pub master_seed: u64,
    pub scene_config: SceneConfig,
    pub candidates: usize,
    pub snapshots: Vec<SceneSnapshot>,
}

impl PoolFile {
    pub fn new(pool: &ScenePool, config: &SceneConfig, master_seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed,
            scene_config: config.clone(),
            candidates: pool.candidates,
            snapshots: pool.snapshots.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let p: PoolFile = serde_json::from_slice(&bytes).map_err(|e| CorpusError::Parse {
            what: "scene pool".into(),
            source: e,
        })?;
        if p.schema_version != SCHEMA_VERSION {
            return Err(CorpusError::Schema(p.schema_version));
        }
        Ok(p)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        crate::canonical::to_canonical_bytes(self).expect("pool serializes")
    }

    pub fn pool(&self) -> ScenePool {
        ScenePool {
            candidates: self.candidates,
            snapshots: self.snapshots.clone(),
        }
    }
}

/// Picks the grounding view(s) for one dialog: a uniform pool snapshot and,
/// with the configured probability, a second view of the same instance that
/// shares at least one object.
pub fn sample_grounding<'p, R: Rng + ?Sized>(
    pool: &'p [SceneSnapshot],
    by_instance: &BTreeMap<&str, Vec<usize>>,
    two_snapshot_fraction: f64,
    rng: &mut R,
) -> Vec<&'p SceneSnapshot> {
    let first = &pool[rng.random_range(0..pool.len())];
    let mut out = vec![first];
    if rng.random_bool(two_snapshot_fraction) {
        let slots: BTreeSet<&str> = first.objects.iter().map(|o| o.slot_id.as_str()).collect();
        let others: Vec<&SceneSnapshot> = by_instance[first.instance_id.as_str()]
            .iter()
            .map(|&i| &pool[i])
            .filter(|s| s.snapshot_id != first.snapshot_id)
            .filter(|s| s.objects.iter().any(|o| slots.contains(o.slot_id.as_str())))
            .collect();
        if !others.is_empty() {
            out.push(others[rng.random_range(0..others.len())]);
        }
    }
    out
}

pub fn dialog_id(ordinal: usize) -> String {
    format!("dialog_{ordinal:05}")
}

/// Runs self-play over an existing pool. Dialog `i` draws from its own RNG
/// stream, so the result does not depend on scheduling.
pub fn generate_dialogs(
    pool: &ScenePool,
    catalogs: &crate::scenegen::CatalogSet,
    config: &SimulatorConfig,
    count: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<Corpus, CorpusError> {
    config.validate()?;
    if pool.snapshots.is_empty() {
        return Err(CorpusError::EmptyPool);
    }
    let templates = config.template_set()?;
    let mut by_instance: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in pool.snapshots.iter().enumerate() {
        by_instance.entry(s.instance_id.as_str()).or_default().push(i);
    }
    let ontology = Ontology::builtin();
    let run = |i: usize| -> Result<(Dialog, Vec<SceneSnapshot>), CorpusError> {
        let mut r = rng::stream(master_seed, &[streams::DIALOG, i as u64]);
        let grounding = sample_grounding(&pool.snapshots, &by_instance, config.two_snapshot_fraction, &mut r);
        let snaps: Vec<SceneSnapshot> = grounding.into_iter().cloned().collect();
        let catalog = catalogs
            .get(snaps[0].domain)
            .ok_or(CorpusError::Scene(SceneError::MissingCatalog(snaps[0].domain)))?;
        let d = run_self_play(&dialog_id(i), &snaps, catalog, config, &templates, &mut r)
            .map_err(|e| CorpusError::Dialog { ordinal: i, source: e })?;
        let v = validate_dialog(&d, ontology, |id| snaps.iter().find(|s| s.snapshot_id == id));
        if !v.is_empty() {
            return Err(CorpusError::Invalid {
                dialog_id: d.dialog_id,
                violations: v.iter().map(ToString::to_string).collect(),
            });
        }
        let used = snaps
            .into_iter()
            .filter(|s| d.snapshot_ids.contains(&s.snapshot_id))
            .collect();
        Ok((d, used))
    };
    let results: Vec<(Dialog, Vec<SceneSnapshot>)> = match execution {
        Execution::Serial => (0..count).map(run).collect::<Result<_, _>>()?,
        Execution::Parallel => (0..count).into_par_iter().map(run).collect::<Result<_, _>>()?,
    };
    let mut snapshots: BTreeMap<String, SceneSnapshot> = BTreeMap::new();
    let mut dialogs = Vec::with_capacity(count);
    for (d, snaps) in results {
        for s in snaps {
            snapshots.entry(s.snapshot_id.clone()).or_insert(s);
        }
        dialogs.push(d);
    }
    Ok(Corpus::new(snapshots.into_values().collect(), dialogs))
}

/// Snapshot pool followed by `count` self-play dialogs, all determined by
/// `master_seed`.
pub fn generate_corpus(
    scene_config: &SceneConfig,
    sim_config: &SimulatorConfig,
    count: usize,
    master_seed: u64,
    execution: Execution,
) -> Result<(ScenePool, Corpus), CorpusError> {
    let seeds = scene_config.load_seeds()?;
    let catalogs = scene_config.load_catalogs()?;
    let pool = generate_pool(&seeds, &catalogs, scene_config, master_seed, execution)?;
    let mut corpus = generate_dialogs(&pool, &catalogs, sim_config, count, master_seed, execution)?;
    corpus.generation = Some(GenerationInfo {
        master_seed,
        dialog_count: count,
        scene_config: scene_config.clone(),
        simulator_config: sim_config.clone(),
    });
    Ok((pool, corpus))
}

/// Regenerates a corpus from the configs and seed embedded in it.
pub fn regenerate(corpus: &Corpus, execution: Execution) -> Result<Corpus, CorpusError> {
    let g = corpus.generation.as_ref().ok_or(CorpusError::NoGenerationInfo)?;
    let (_, mut c) = generate_corpus(
        &g.scene_config,
        &g.simulator_config,
        g.dialog_count,
        g.master_seed,
        execution,
    )?;
    c.split_info = corpus.split_info.clone();
    Ok(c)
}
