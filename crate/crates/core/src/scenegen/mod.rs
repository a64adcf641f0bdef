//! Geometric scene simulator.
//!
//! Seed scenes are rearranged within compatibility groups, viewed from random
//! cameras and annotated with 2D boxes, visibility and snapshot-local object
//! indices. Visibility treats every object and fixture as its projected
//! bounding rectangle at the depth of its center.

pub mod camera;
pub mod capture;
pub mod geometry;
pub mod pool;
pub mod rearrange;
pub mod seed;

use thiserror::Error;

use crate::catalog::Domain;

pub use camera::{sample_camera, Camera, CameraConfig};
pub use capture::{accept_snapshot, capture_snapshot, CaptureConfig, ObjectAnnotation, SceneSnapshot};
pub use pool::{generate_pool, CatalogSet, Execution, SceneConfig, ScenePool};
pub use rearrange::{rearrange, SceneInstance};
pub use seed::{builtin_seeds, SeedScene};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scene data: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("seed scene {scene_id}: {reason}")]
    InvalidSeed { scene_id: String, reason: String },
    #[error("seed scene {scene_id} needs a {catalog} catalog")]
    DomainMismatch { scene_id: String, catalog: Domain },
    #[error("no catalog loaded for domain {0}")]
    MissingCatalog(Domain),
    #[error("slot {slot_id}: no catalog item in group {group:?}")]
    EmptyGroup { slot_id: String, group: String },
    #[error("slot {slot_id}: no compatible item fits without collision after {retries} retries")]
    UnsatisfiableSlot { slot_id: String, retries: usize },
    #[error("no seed scenes given")]
    NoSeeds,
}
