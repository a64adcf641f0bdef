use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::Aabb;
use super::seed::SeedScene;
use super::SceneError;
use crate::catalog::{Catalog, Domain};

/// Interpenetration tolerance between placed objects, in meters.
pub const COLLISION_EPS: f64 = 0.01;
pub const DEFAULT_MAX_RETRIES: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub slot_id: String,
    pub item_id: String,
    pub category: String,
    pub world_box: Aabb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub instance_id: String,
    pub seed_id: String,
    pub domain: Domain,
    pub placements: BTreeMap<String, String>,
    /// In seed slot order.
    pub objects: Vec<PlacedObject>,
    pub fixtures: Vec<Aabb>,
}

/// Fills every slot of `seed` with a random item from the slot's
/// compatibility group, redrawing until the item's box does not interpenetrate
/// any object already placed.
pub fn rearrange<R: Rng>(
    seed: &SeedScene,
    catalog: &Catalog,
    rng: &mut R,
    instance_id: impl Into<String>,
    max_retries: usize,
) -> Result<SceneInstance, SceneError> {
    if catalog.domain() != seed.domain {
        return Err(SceneError::DomainMismatch {
            scene_id: seed.scene_id.clone(),
            catalog: catalog.domain(),
        });
    }
    let mut objects: Vec<PlacedObject> = Vec::with_capacity(seed.slots.len());
    for slot in &seed.slots {
        let pool = catalog.items_in_group(&slot.allowed_group);
        if pool.is_empty() {
            return Err(SceneError::EmptyGroup {
                slot_id: slot.slot_id.clone(),
                group: slot.allowed_group.clone(),
            });
        }
        let mut placed = None;
        for _ in 0..max_retries.max(1) {
            let item = *pool.choose(rng).expect("non-empty pool");
            let b = Aabb::placed(slot.position, item.extent, slot.orientation);
            if objects.iter().all(|o| !o.world_box.interpenetrates(&b, COLLISION_EPS)) {
                placed = Some(PlacedObject {
                    slot_id: slot.slot_id.clone(),
                    item_id: item.item_id.clone(),
                    category: item.category.clone(),
                    world_box: b,
                });
                break;
            }
        }
        match placed {
            Some(p) => objects.push(p),
            None => {
                return Err(SceneError::UnsatisfiableSlot {
                    slot_id: slot.slot_id.clone(),
                    retries: max_retries,
                })
            }
        }
    }
    Ok(SceneInstance {
        instance_id: instance_id.into(),
        seed_id: seed.scene_id.clone(),
        domain: seed.domain,
        placements: objects.iter().map(|o| (o.slot_id.clone(), o.item_id.clone())).collect(),
        objects,
        fixtures: seed.fixtures.iter().map(|f| f.aabb()).collect(),
    })
}
