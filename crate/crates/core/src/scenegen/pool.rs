use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{sample_camera, CameraConfig};
use super::capture::{accept_snapshot, capture_snapshot, CaptureConfig, SceneSnapshot};
use super::rearrange::{rearrange, DEFAULT_MAX_RETRIES};
use super::seed::{builtin_seeds, SeedScene};
use super::SceneError;
use crate::catalog::{bundled, Catalog, CatalogError, Domain};
use crate::rng::{self, streams};

/// Scene-generation configuration. Missing fields take defaults; `seeds` and
/// `catalogs` default to the bundled data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub catalogs: Option<BTreeMap<Domain, String>>,
    pub rearrangements_per_seed: usize,
    pub snapshots_per_instance: usize,
    pub max_retries: usize,
    pub camera: CameraConfig,
    pub capture: CaptureConfig,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seeds: None,
            catalogs: None,
            rearrangements_per_seed: 20,
            snapshots_per_instance: 10,
            max_retries: DEFAULT_MAX_RETRIES,
            camera: CameraConfig::default(),
            capture: CaptureConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &str) -> String {
    let path = Path::new(p);
    if path.is_absolute() {
        p.to_string()
    } else {
        base.join(path).display().to_string()
    }
}

impl SceneConfig {
    /// Reads a config file; relative data paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut cfg: SceneConfig = serde_json::from_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(PathBuf::new);
        if let Some(seeds) = &mut cfg.seeds {
            for s in seeds.iter_mut() {
                *s = resolve(&base, s);
            }
        }
        if let Some(cats) = &mut cfg.catalogs {
            for p in cats.values_mut() {
                *p = resolve(&base, p);
            }
        }
        Ok(cfg)
    }

    pub fn load_seeds(&self) -> Result<Vec<SeedScene>, SceneError> {
        match &self.seeds {
            None => Ok(builtin_seeds()),
            Some(paths) => paths.iter().map(SeedScene::load).collect(),
        }
    }

    pub fn load_catalogs(&self) -> Result<CatalogSet, CatalogError> {
        let mut set = CatalogSet::default();
        for d in Domain::ALL {
            let cat = match self.catalogs.as_ref().and_then(|m| m.get(&d)) {
                Some(p) => Catalog::load(p)?,
                None => bundled::for_domain(d),
            };
            set.insert(cat);
        }
        Ok(set)
    }
}

/// One catalog per domain.
#[derive(Clone, Debug, Default)]
pub struct CatalogSet {
    by_domain: BTreeMap<Domain, Catalog>,
}

impl CatalogSet {
    pub fn bundled() -> Self {
        let mut s = Self::default();
        for d in Domain::ALL {
            s.insert(bundled::for_domain(d));
        }
        s
    }

    pub fn insert(&mut self, catalog: Catalog) {
        self.by_domain.insert(catalog.domain(), catalog);
    }

    pub fn get(&self, domain: Domain) -> Option<&Catalog> {
        self.by_domain.get(&domain)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenePool {
    /// Snapshots captured before the object-count filter.
    pub candidates: usize,
    pub snapshots: Vec<SceneSnapshot>,
}

/// Rearranges each seed `rearrangements_per_seed` times, captures
/// `snapshots_per_instance` random views of each arrangement and keeps the
/// views that pass [`accept_snapshot`].
///
/// Each (seed, rearrangement) pair draws from its own RNG stream, so the result
/// is identical under serial and parallel execution.
pub fn generate_pool(
    seeds: &[SeedScene],
    catalogs: &CatalogSet,
    config: &SceneConfig,
    master_seed: u64,
    execution: Execution,
) -> Result<ScenePool, SceneError> {
    if seeds.is_empty() {
        return Err(SceneError::NoSeeds);
    }
    let jobs: Vec<(&SeedScene, usize)> = seeds
        .iter()
        .flat_map(|s| (0..config.rearrangements_per_seed).map(move |r| (s, r)))
        .collect();

    let run = |&(seed, r): &(&SeedScene, usize)| -> Result<Vec<SceneSnapshot>, SceneError> {
        let catalog = catalogs
            .get(seed.domain)
            .ok_or(SceneError::MissingCatalog(seed.domain))?;
        let key = rng::label(&seed.scene_id);
        let mut arrange_rng = rng::stream(master_seed, &[streams::REARRANGE, key, r as u64]);
        let instance_id = format!("{}_r{:02}", seed.scene_id, r);
        let instance = rearrange(seed, catalog, &mut arrange_rng, &instance_id, config.max_retries)?;
        let mut cam_rng = rng::stream(master_seed, &[streams::CAMERA, key, r as u64]);
        Ok((0..config.snapshots_per_instance)
            .map(|v| {
                let cam = sample_camera(seed, &config.camera, &mut cam_rng);
                capture_snapshot(&instance, &cam, &config.capture, format!("{instance_id}_v{v:02}"))
            })
            .collect())
    };

    let batches: Vec<Vec<SceneSnapshot>> = match execution {
        Execution::Serial => jobs.iter().map(run).collect::<Result<_, _>>()?,
        Execution::Parallel => jobs.par_iter().map(run).collect::<Result<_, _>>()?,
    };
    let candidates = batches.iter().map(Vec::len).sum();
    let snapshots = batches.into_iter().flatten().filter(accept_snapshot).collect();
    Ok(ScenePool { candidates, snapshots })
}
