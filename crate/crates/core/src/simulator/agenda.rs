use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::config::{GoalKind, SimulatorConfig};
use super::SimError;
use crate::catalog::Catalog;
use crate::scenegen::SceneSnapshot;

/// Slots never used as search constraints; equality on them makes poor requests.
const UNCONSTRAINED: &[&str] = &["price", "customer_rating"];

#[derive(Clone, Debug, PartialEq)]
pub struct Goal {
    pub kind: GoalKind,
    /// Attributes of an anchor object visible in the grounding snapshot.
    pub constraints: BTreeMap<String, String>,
    pub target_count: usize,
    /// Answered user turns needed to complete the goal.
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agenda {
    pub goals: Vec<Goal>,
}

impl Agenda {
    pub fn names(&self) -> Vec<String> {
        self.goals.iter().map(|g| g.kind.to_string()).collect()
    }

    pub fn len(&self) -> usize {
        self.goals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.goals.is_empty()
    }
}

fn weighted<R: Rng + ?Sized, T: Copy>(items: &[(T, f64)], rng: &mut R) -> Option<T> {
    let dist = WeightedIndex::new(items.iter().map(|(_, w)| *w)).ok()?;
    Some(items[dist.sample(rng)].0)
}

fn anchor_constraints<R: Rng + ?Sized>(
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<BTreeMap<String, String>, SimError> {
    let mut out = BTreeMap::new();
    if snapshot.objects.is_empty() {
        return Ok(out);
    }
    let anchor = &snapshot.objects[rng.random_range(0..snapshot.objects.len())];
    let item = catalog
        .get(&anchor.item_id)
        .ok_or_else(|| SimError::UnknownItem(anchor.item_id.clone()))?;
    for slot in crate::ontology::Ontology::builtin().slots(catalog.domain()) {
        if UNCONSTRAINED.contains(&slot.as_str()) {
            continue;
        }
        let value = if slot == "size" {
            if item.available_sizes.is_empty() {
                continue;
            }
            Some(item.available_sizes[rng.random_range(0..item.available_sizes.len())].clone())
        } else {
            item.attribute(slot)
        };
        if let Some(v) = value {
            out.insert(slot.clone(), v);
        }
    }
    Ok(out)
}

/// Whether a goal can be pursued against the snapshot.
pub fn goal_satisfiable(goal: &Goal, snapshot: &SceneSnapshot, catalog: &Catalog) -> bool {
    let n = snapshot.objects.len();
    match goal.kind {
        GoalKind::Browse | GoalKind::Refine => snapshot.objects.iter().any(|o| {
            catalog
                .get(&o.item_id)
                .is_some_and(|it| goal.constraints.iter().all(|(k, v)| it.matches(k, v)))
        }),
        GoalKind::DisambiguationProbe => n >= 2,
        _ => n >= goal.target_count,
    }
}

fn sample_once<R: Rng + ?Sized>(
    config: &SimulatorConfig,
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    min_goals: usize,
    rng: &mut R,
) -> Result<Agenda, SimError> {
    let g = &config.goal_grammar;
    let mut lw = config.length_weights(min_goals);
    if lw.iter().all(|&w| w == 0.0) {
        lw = config.length_weights(1);
    }
    let lens: Vec<(usize, f64)> = lw.into_iter().enumerate().map(|(i, w)| (i + 1, w)).collect();
    let len = weighted(&lens, rng).ok_or_else(|| SimError::Config("empty agenda length distribution".into()))?;
    let mut goals = Vec::with_capacity(len);
    let start: Vec<(GoalKind, f64)> = g.start.iter().map(|(k, w)| (*k, *w)).collect();
    let mut kind = weighted(&start, rng).ok_or_else(|| SimError::Config("empty start distribution".into()))?;
    for i in 0..len {
        if i > 0 {
            let row: Vec<(GoalKind, f64)> = g
                .transitions
                .get(&kind)
                .map(|r| r.iter().map(|(k, w)| (*k, *w)).collect())
                .unwrap_or_default();
            match weighted(&row, rng) {
                Some(k) => kind = k,
                None => break,
            }
        }
        let steps: Vec<(usize, f64)> = g
            .steps
            .get(&kind)
            .map(|v| v.iter().enumerate().map(|(i, w)| (i + 1, *w)).collect())
            .unwrap_or_default();
        let steps = weighted(&steps, rng).unwrap_or(1);
        let constraints = anchor_constraints(snapshot, catalog, rng)?;
        goals.push(Goal {
            kind,
            constraints,
            target_count: kind.target_count(),
            steps,
        });
    }
    Ok(Agenda { goals })
}

/// Samples an agenda from the goal grammar, resampling until every goal is
/// satisfiable against the snapshot.
pub fn generate_agenda<R: Rng + ?Sized>(
    config: &SimulatorConfig,
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<Agenda, SimError> {
    generate_agenda_with(config, snapshot, catalog, 1, rng)
}

pub(crate) fn generate_agenda_with<R: Rng + ?Sized>(
    config: &SimulatorConfig,
    snapshot: &SceneSnapshot,
    catalog: &Catalog,
    min_goals: usize,
    rng: &mut R,
) -> Result<Agenda, SimError> {
    let attempts = config.agenda_resamples.max(1);
    for _ in 0..attempts {
        let agenda = sample_once(config, snapshot, catalog, min_goals, rng)?;
        if agenda.goals.iter().all(|g| goal_satisfiable(g, snapshot, catalog)) {
            return Ok(agenda);
        }
    }
    Err(SimError::UnsatisfiableAgenda {
        snapshot_id: snapshot.snapshot_id.clone(),
        attempts,
    })
}
