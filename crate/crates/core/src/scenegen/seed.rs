use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Vec3};
use super::SceneError;
use crate::catalog::Domain;

/// Ground-plane rectangle; coordinates are `[x, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorBounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl FloorBounds {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && z >= self.min[1] && z <= self.max[1]
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.max[0] > self.min[0] && self.max[1] > self.min[1])
    }

    /// The rectangle scaled by `f` about its center.
    pub fn scaled(&self, f: f64) -> FloorBounds {
        let cx = 0.5 * (self.min[0] + self.max[0]);
        let cz = 0.5 * (self.min[1] + self.max[1]);
        let hx = 0.5 * f * (self.max[0] - self.min[0]);
        let hz = 0.5 * f * (self.max[1] - self.min[1]);
        FloorBounds {
            min: [cx - hx, cz - hz],
            max: [cx + hx, cz + hz],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementSlot {
    pub slot_id: String,
    /// Bottom-center of the placed object.
    pub position: Vec3,
    /// Yaw in radians.
    #[serde(default)]
    pub orientation: f64,
    pub allowed_group: String,
}

/// Static occluder (shelving, pillar, partition). Not annotated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub fixture_id: String,
    pub min: Vec3,
    pub max: Vec3,
}

impl Fixture {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedScene {
    pub scene_id: String,
    pub domain: Domain,
    pub floor_bounds: FloorBounds,
    pub slots: Vec<PlacementSlot>,
    #[serde(default)]
    pub fixtures: Vec<Fixture>,
}

pub const MIN_SLOTS: usize = 5;

impl SeedScene {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SceneError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let seed: SeedScene = serde_json::from_str(text)?;
        seed.validate()?;
        Ok(seed)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |reason: String| SceneError::InvalidSeed {
            scene_id: self.scene_id.clone(),
            reason,
        };
        if self.floor_bounds.is_degenerate() {
            return Err(bad("degenerate floor bounds".into()));
        }
        if self.slots.len() < MIN_SLOTS {
            return Err(bad(format!(
                "{} slots, at least {MIN_SLOTS} required",
                self.slots.len()
            )));
        }
        let mut seen = HashSet::new();
        for s in &self.slots {
            if !seen.insert(s.slot_id.as_str()) {
                return Err(bad(format!("duplicate slot_id {}", s.slot_id)));
            }
            if !self.floor_bounds.contains(s.position.x, s.position.z) {
                return Err(bad(format!("slot {} lies outside the floor", s.slot_id)));
            }
        }
        for f in &self.fixtures {
            let inside = self.floor_bounds.contains(f.min.x, f.min.z) && self.floor_bounds.contains(f.max.x, f.max.z);
            if !inside || f.min.x > f.max.x || f.min.y > f.max.y || f.min.z > f.max.z {
                return Err(bad(format!(
                    "fixture {} is malformed or outside the floor",
                    f.fixture_id
                )));
            }
        }
        Ok(())
    }
}

const BUILTIN_SEEDS: &[&str] = &[
    include_str!("../../data/scenes/fashion_01.json"),
    include_str!("../../data/scenes/fashion_02.json"),
    include_str!("../../data/scenes/fashion_03.json"),
    include_str!("../../data/scenes/fashion_04.json"),
    include_str!("../../data/scenes/fashion_05.json"),
    include_str!("../../data/scenes/fashion_06.json"),
    include_str!("../../data/scenes/fashion_07.json"),
    include_str!("../../data/scenes/furniture_01.json"),
];

/// The bundled seed scenes: seven fashion stores and one furniture store.
pub fn builtin_seeds() -> Vec<SeedScene> {
    BUILTIN_SEEDS
        .iter()
        .map(|s| SeedScene::from_json(s).expect("bundled seed scene is valid"))
        .collect()
}
