use std::collections::BTreeMap;

use super::SimError;
use crate::catalog::{Catalog, CatalogItem};
use crate::ontology::{Activity, BeliefFrame, Ontology};
use crate::scenegen::SceneSnapshot;

/// Slot compared when a compare request names none.
const DEFAULT_COMPARE_SLOT: &str = "price";

/// What the simulated catalog/scene API returns for a user frame.
#[derive(Clone, Debug, PartialEq)]
pub enum ApiResult {
    /// Visible objects satisfying the frame's slot values, by local index.
    Matches(Vec<u32>),
    /// Requested attributes of each referenced object.
    Metadata(Vec<(u32, BTreeMap<String, String>)>),
    /// Attribute table over the compared objects, one value per object.
    Comparison {
        objects: Vec<u32>,
        table: BTreeMap<String, Vec<String>>,
    },
    /// Objects to add to the cart, with the requested options.
    CartAdd {
        objects: Vec<u32>,
        options: BTreeMap<String, String>,
    },
    /// Nothing to look up (clarification turns).
    Nothing,
}

fn item<'c>(snapshot: &SceneSnapshot, catalog: &'c Catalog, local: u32) -> Result<&'c CatalogItem, SimError> {
    let ann = snapshot.object(local).ok_or_else(|| SimError::UnknownObject {
        snapshot_id: snapshot.snapshot_id.clone(),
        object: local,
    })?;
    catalog
        .get(&ann.item_id)
        .ok_or_else(|| SimError::UnknownItem(ann.item_id.clone()))
}

/// Visible objects whose item satisfies every constraint, ordered by local index.
pub fn search(
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    constraints: &BTreeMap<String, String>,
) -> Result<Vec<u32>, SimError> {
    let mut out = Vec::new();
    for o in &snapshot.objects {
        let it = item(snapshot, catalog, o.local_index)?;
        if constraints.iter().all(|(k, v)| it.matches(k, v)) {
            out.push(o.local_index);
        }
    }
    Ok(out)
}

pub fn execute_api(frame: &BeliefFrame, snapshot: &SceneSnapshot, catalog: &Catalog) -> Result<ApiResult, SimError> {
    Ok(match frame.activity {
        Activity::Disambiguate => ApiResult::Nothing,
        Activity::Refine => ApiResult::Matches(search(snapshot, catalog, &frame.slot_values)?),
        Activity::Get if frame.objects.is_empty() => ApiResult::Matches(search(snapshot, catalog, &frame.slot_values)?),
        Activity::Get => {
            let slots: Vec<String> = if frame.request_slots.is_empty() {
                Ontology::builtin().slots(catalog.domain()).to_vec()
            } else {
                frame.request_slots.iter().cloned().collect()
            };
            let mut rows = Vec::new();
            for &o in &frame.objects {
                let it = item(snapshot, catalog, o)?;
                let values = slots
                    .iter()
                    .filter_map(|s| it.attribute(s).map(|v| (s.clone(), v)))
                    .collect();
                rows.push((o, values));
            }
            ApiResult::Metadata(rows)
        }
        Activity::Compare => {
            let slots: Vec<String> = if frame.request_slots.is_empty() {
                vec![DEFAULT_COMPARE_SLOT.to_string()]
            } else {
                frame.request_slots.iter().cloned().collect()
            };
            let items = frame
                .objects
                .iter()
                .map(|&o| item(snapshot, catalog, o))
                .collect::<Result<Vec<_>, _>>()?;
            let table = slots
                .into_iter()
                .map(|s| {
                    let row = items
                        .iter()
                        .map(|it| it.attribute(&s).unwrap_or_else(|| "n/a".to_string()))
                        .collect();
                    (s, row)
                })
                .collect();
            ApiResult::Comparison {
                objects: frame.objects.clone(),
                table,
            }
        }
        Activity::AddToCart => {
            for &o in &frame.objects {
                item(snapshot, catalog, o)?;
            }
            ApiResult::CartAdd {
                objects: frame.objects.clone(),
                options: frame.slot_values.clone(),
            }
        }
    })
}
