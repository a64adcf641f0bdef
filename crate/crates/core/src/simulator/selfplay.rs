use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::agenda::{generate_agenda_with, Agenda};
use super::api::{execute_api, ApiResult};
use super::config::{Phase, ProbabilityTable, SimulatorConfig};
use super::nlg::{realize, RenderContext, TemplateSet};
use super::SimError;
use crate::catalog::Catalog;
use crate::ontology::{Activity, BeliefFrame, Dialog, DialogAct, Speaker, Turn};
use crate::scenegen::SceneSnapshot;

/// A clarification in progress: the ambiguous request and the object the
/// user actually meant.
#[derive(Clone, Debug, PartialEq)]
pub struct Pending {
    pub frame: BeliefFrame,
    pub target: String,
}

/// Mutable self-play state. Objects are tracked by seed slot id, which is
/// stable across the two views of a two-snapshot dialog.
#[derive(Clone, Debug)]
pub struct SelfPlayState<'a> {
    pub snapshots: &'a [SceneSnapshot],
    pub active: usize,
    /// Slot id → index of the last turn that mentioned it.
    pub history: BTreeMap<String, usize>,
    pub cart: BTreeSet<String>,
    pub agenda: Agenda,
    pub goal_index: usize,
    pub steps_done: usize,
    /// Referents of the current goal.
    pub targets: Vec<String>,
    /// Slots already requested within the current goal.
    pub asked: BTreeSet<String>,
    pub pending: Option<Pending>,
    pub turn_count: usize,
}

impl<'a> SelfPlayState<'a> {
    pub fn new(snapshots: &'a [SceneSnapshot], agenda: Agenda) -> Self {
        Self {
            snapshots,
            active: 0,
            history: BTreeMap::new(),
            cart: BTreeSet::new(),
            agenda,
            goal_index: 0,
            steps_done: 0,
            targets: Vec::new(),
            asked: BTreeSet::new(),
            pending: None,
            turn_count: 0,
        }
    }

    pub fn snapshot(&self) -> &'a SceneSnapshot {
        &self.snapshots[self.active]
    }

    pub fn finished(&self) -> bool {
        self.goal_index >= self.agenda.len()
    }

    fn local(&self, slot: &str) -> Option<u32> {
        self.snapshot().index_of_slot(slot)
    }

    fn slot(&self, local: u32) -> String {
        self.snapshot().objects[local as usize].slot_id.clone()
    }

    fn remember(&mut self, frame: &BeliefFrame, turn: usize) {
        for &o in &frame.objects {
            let s = self.slot(o);
            self.history.insert(s, turn);
        }
    }

    /// Previously mentioned objects visible now, most recent first.
    fn visible_history(&self) -> Vec<(usize, String)> {
        let mut v: Vec<(usize, String)> = self
            .history
            .iter()
            .filter(|(s, _)| self.local(s).is_some())
            .map(|(s, &t)| (t, s.clone()))
            .collect();
        v.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        v
    }
}

/// A user frame together with which of its objects are dialog references.
#[derive(Clone, Debug, PartialEq)]
pub struct UserMove {
    pub frame: BeliefFrame,
    pub anaphoric: BTreeSet<u32>,
}

fn pick_targets<R: Rng + ?Sized>(
    state: &SelfPlayState<'_>,
    config: &SimulatorConfig,
    n: usize,
    rng: &mut R,
) -> (Vec<String>, BTreeSet<String>) {
    let p_dialog = config.coref_source_distribution.dialog;
    let mut picked: Vec<String> = Vec::new();
    let mut from_dialog = BTreeSet::new();
    let history = state.visible_history();
    for _ in 0..n {
        let use_dialog = rng.random_bool(p_dialog);
        let open: Vec<&(usize, String)> = history.iter().filter(|(_, s)| !picked.contains(s)).collect();
        if use_dialog && !open.is_empty() {
            let latest = open[0].0;
            let recent: Vec<&String> = open.iter().filter(|(t, _)| *t == latest).map(|(_, s)| s).collect();
            let s = recent[rng.random_range(0..recent.len())].clone();
            from_dialog.insert(s.clone());
            picked.push(s);
            continue;
        }
        let objs = &state.snapshot().objects;
        let fresh: Vec<&String> = objs
            .iter()
            .map(|o| &o.slot_id)
            .filter(|s| !picked.contains(s) && !state.history.contains_key(*s))
            .collect();
        let pool: Vec<&String> = if fresh.is_empty() {
            objs.iter()
                .map(|o| &o.slot_id)
                .filter(|s| !picked.contains(s))
                .collect()
        } else {
            fresh
        };
        if pool.is_empty() {
            break;
        }
        picked.push(pool[rng.random_range(0..pool.len())].clone());
    }
    (picked, from_dialog)
}

/// Candidate referents for an underspecified mention of `target`: objects of
/// the same type, else the same color, else the nearest on screen. Always at
/// least two when the snapshot has two objects.
pub fn ambiguity_candidates(snapshot: &SceneSnapshot, catalog: &Catalog, target: u32) -> Vec<u32> {
    const MAX_CANDIDATES: usize = 3;
    let item = |o: u32| catalog.get(&snapshot.objects[o as usize].item_id);
    let me = item(target);
    let (tx, ty) = snapshot.objects[target as usize].center();
    let dist = |o: u32| {
        let (x, y) = snapshot.objects[o as usize].center();
        (x - tx).hypot(y - ty)
    };
    let others: Vec<u32> = (0..snapshot.objects.len() as u32).filter(|&o| o != target).collect();
    let by = |pred: &dyn Fn(u32) -> bool| -> Vec<u32> { others.iter().copied().filter(|&o| pred(o)).collect() };
    let same_type = by(&|o| item(o).zip(me).is_some_and(|(a, b)| a.category == b.category));
    let same_color = by(&|o| item(o).zip(me).is_some_and(|(a, b)| a.color == b.color));
    let mut pool = if !same_type.is_empty() {
        same_type
    } else if !same_color.is_empty() {
        same_color
    } else {
        others
    };
    pool.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    pool.truncate(MAX_CANDIDATES - 1);
    pool.push(target);
    pool.sort_unstable();
    pool
}

/// Draws the next user frame for the current goal.
pub fn user_step<R: Rng + ?Sized>(
    state: &mut SelfPlayState<'_>,
    table: &ProbabilityTable,
    config: &SimulatorConfig,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<UserMove, SimError> {
    let goal = state.agenda.goals[state.goal_index].clone();
    let phase = if state.pending.is_some() {
        Phase::Resolve
    } else if state.steps_done == 0 {
        Phase::Open
    } else {
        Phase::Followup
    };
    let phases = table
        .get(&goal.kind)
        .ok_or_else(|| SimError::Config(format!("no probability table for {}", goal.kind)))?;
    let entries = phases
        .get(&phase)
        .or_else(|| phases.get(&Phase::Open))
        .ok_or_else(|| SimError::Config(format!("no {phase:?} patterns for {}", goal.kind)))?;
    // Follow-ups prefer patterns that ask something new.
    let fresh: Vec<f64> = entries
        .iter()
        .map(|e| {
            let repeat = !e.request_slots.is_empty() && e.request_slots.iter().all(|s| state.asked.contains(s));
            if repeat {
                0.0
            } else {
                e.weight
            }
        })
        .collect();
    let dist = WeightedIndex::new(&fresh)
        .or_else(|_| WeightedIndex::new(entries.iter().map(|e| e.weight)))
        .map_err(|e| SimError::Config(format!("{} {phase:?}: {e}", goal.kind)))?;
    let pattern = &entries[dist.sample(rng)];

    let mut frame = BeliefFrame::user(pattern.intent.act, pattern.intent.activity);
    if let Some(p) = &state.pending {
        let target = state.local(&p.target).expect("pending target stays visible");
        frame.objects = vec![target];
        return Ok(UserMove {
            frame,
            anaphoric: BTreeSet::new(),
        });
    }
    frame.request_slots = pattern.request_slots.iter().cloned().collect();
    state.asked.extend(pattern.request_slots.iter().cloned());

    let mut anaphoric = BTreeSet::new();
    if goal.target_count > 0 {
        let valid = state.targets.len() == goal.target_count && state.targets.iter().all(|s| state.local(s).is_some());
        let from_dialog = if phase == Phase::Open || !valid {
            let (t, d) = pick_targets(state, config, goal.target_count, rng);
            state.targets = t;
            d
        } else {
            state.targets.iter().cloned().collect()
        };
        for s in &state.targets {
            let l = state.local(s).expect("targets are visible");
            frame.objects.push(l);
            if from_dialog.contains(s) && state.history.contains_key(s) {
                anaphoric.insert(l);
            }
        }
    }

    let target_item = match frame.objects.as_slice() {
        [o] => catalog.get(&state.snapshot().objects[*o as usize].item_id),
        _ => None,
    };
    for slot in &pattern.constraint_slots {
        let value = match (slot.as_str(), target_item) {
            ("size", Some(it)) if !it.available_sizes.is_empty() => {
                Some(it.available_sizes[rng.random_range(0..it.available_sizes.len())].clone())
            }
            ("size", Some(_)) => None,
            (_, Some(it)) => it.attribute(slot),
            (_, None) => goal.constraints.get(slot).cloned(),
        };
        if let Some(v) = value {
            frame.slot_values.insert(slot.clone(), v);
        }
    }

    if goal.kind.can_be_ambiguous() && frame.objects.len() == 1 {
        let forced = goal.kind == super::GoalKind::DisambiguationProbe && phase == Phase::Open;
        if forced || rng.random_bool(config.ambiguity_injection_rate) {
            let target = frame.objects[0];
            let candidates = ambiguity_candidates(state.snapshot(), catalog, target);
            if candidates.len() >= 2 {
                frame.objects = candidates;
                frame.disambiguation_label = Some(true);
                anaphoric.clear();
                state.pending = Some(Pending {
                    frame: frame.clone(),
                    target: state.slot(target),
                });
            }
        }
    }
    Ok(UserMove { frame, anaphoric })
}

/// The frame the API should answer: a resolved clarification answers the
/// original request for the chosen object.
pub fn effective_frame(state: &SelfPlayState<'_>, user: &BeliefFrame) -> Option<BeliefFrame> {
    if user.is_ambiguous() {
        return None;
    }
    if user.activity == Activity::Disambiguate {
        let p = state.pending.as_ref()?;
        let mut f = p.frame.clone();
        f.objects = user.objects.clone();
        f.disambiguation_label = Some(false);
        return Some(f);
    }
    Some(user.clone())
}

/// Builds the assistant reply and advances goal progress.
pub fn assistant_step(
    state: &mut SelfPlayState<'_>,
    config: &SimulatorConfig,
    user: &BeliefFrame,
    api: &ApiResult,
) -> BeliefFrame {
    if user.is_ambiguous() {
        let mut f = BeliefFrame::new(DialogAct::Request, Activity::Disambiguate);
        f.objects = user.objects.clone();
        return f;
    }
    let activity = match (&state.pending, user.activity) {
        (Some(p), Activity::Disambiguate) => p.frame.activity,
        (_, a) => a,
    };
    let mut f = match api {
        ApiResult::Matches(found) => {
            let mut f = BeliefFrame::new(DialogAct::Inform, activity);
            f.objects = found.iter().copied().take(config.max_results).collect();
            if found.is_empty() {
                f.no_match = true;
            }
            if found.is_empty() || activity == Activity::Refine {
                f.slot_values = user.slot_values.clone();
            }
            f
        }
        ApiResult::Metadata(rows) => {
            let mut f = BeliefFrame::new(DialogAct::Inform, Activity::Get);
            for (o, values) in rows {
                f.objects.push(*o);
                f.slot_values.extend(values.clone());
            }
            f
        }
        ApiResult::Comparison { objects, table } => {
            let mut f = BeliefFrame::new(DialogAct::Inform, Activity::Compare);
            f.objects = objects.clone();
            f.slot_values = table.iter().map(|(k, v)| (k.clone(), v.join(" vs "))).collect();
            f
        }
        ApiResult::CartAdd { objects, options } => {
            let mut f = BeliefFrame::new(DialogAct::Confirm, Activity::AddToCart);
            f.objects = objects.clone();
            f.slot_values = options.clone();
            for &o in objects {
                let s = state.slot(o);
                state.cart.insert(s);
            }
            f
        }
        ApiResult::Nothing => BeliefFrame::new(DialogAct::Inform, activity),
    };
    f.disambiguation_label = None;
    state.pending = None;
    state.steps_done += 1;
    if state.steps_done >= state.agenda.goals[state.goal_index].steps {
        state.goal_index += 1;
        state.steps_done = 0;
        state.targets.clear();
        state.asked.clear();
    }
    f
}

/// Utterances left in the budget below which a pending view switch happens
/// at the next goal boundary.
const SWITCH_RESERVE: usize = 4;

/// Runs one dialog over one or two views of the same scene instance.
///
/// With two views, the agenda has at least two goals and the view switches
/// at a goal boundary sampled up front, or earlier when the utterance budget
/// is nearly spent. If no boundary is reached the dialog keeps one view.
pub fn run_self_play<R: Rng + ?Sized>(
    dialog_id: &str,
    snapshots: &[SceneSnapshot],
    catalog: &Catalog,
    config: &SimulatorConfig,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<Dialog, SimError> {
    let first = snapshots
        .first()
        .ok_or_else(|| SimError::Snapshots("no snapshot given".into()))?;
    if snapshots.len() > 2 {
        return Err(SimError::Snapshots(format!(
            "{} snapshots given, at most 2",
            snapshots.len()
        )));
    }
    if snapshots.iter().any(|s| s.instance_id != first.instance_id) {
        return Err(SimError::Snapshots(
            "snapshots come from different scene instances".into(),
        ));
    }
    if first.domain != catalog.domain() {
        return Err(SimError::Snapshots(format!(
            "snapshot domain {} does not match catalog domain {}",
            first.domain,
            catalog.domain()
        )));
    }
    let table = config
        .probability_tables
        .get(&first.domain)
        .ok_or(SimError::MissingTable(first.domain))?;
    let budget = config.max_turns - config.max_turns % 2;

    let min_goals = snapshots.len();
    let agenda = generate_agenda_with(config, first, catalog, min_goals, rng)?;
    let switch_goal = (snapshots.len() == 2 && agenda.len() >= 2).then(|| rng.random_range(1..agenda.len()));
    let names = agenda.names();
    let mut state = SelfPlayState::new(snapshots, agenda);
    let mut switch_turn = None;
    let mut turns: Vec<Turn> = Vec::new();

    while !state.finished() && turns.len() + 2 <= budget {
        // Switch at the sampled boundary, or at an earlier one when the
        // budget would likely run out first.
        let at_boundary = state.goal_index > 0 && state.steps_done == 0 && state.pending.is_none();
        let due = switch_goal
            .is_some_and(|g| state.goal_index == g || (state.goal_index < g && turns.len() + SWITCH_RESERVE >= budget));
        if at_boundary && due && switch_turn.is_none() {
            state.active = 1;
            switch_turn = Some(turns.len());
        }
        let snap = state.snapshot();
        let mv = user_step(&mut state, table, config, catalog, rng)?;
        let ctx = RenderContext {
            snapshot: snap,
            catalog,
            anaphoric: &mv.anaphoric,
        };
        let r = realize(&mv.frame, Speaker::User, &ctx, templates, rng)?;
        let ti = turns.len();
        turns.push(Turn {
            turn_index: ti,
            speaker: Speaker::User,
            utterance: r.text.clone(),
            template_utterance: r.text,
            frame: mv.frame.clone(),
            active_snapshot: snap.snapshot_id.clone(),
            mentions: r.mentions,
        });

        let api = match effective_frame(&state, &mv.frame) {
            Some(f) => execute_api(&f, snap, catalog)?,
            None => ApiResult::Nothing,
        };
        state.remember(&mv.frame, ti);
        let reply = assistant_step(&mut state, config, &mv.frame, &api);
        let anaphoric: BTreeSet<u32> = if reply.is_disambiguation_request() {
            BTreeSet::new()
        } else {
            reply
                .objects
                .iter()
                .copied()
                .filter(|&o| state.history.contains_key(&snap.objects[o as usize].slot_id))
                .collect()
        };
        let ctx = RenderContext {
            snapshot: snap,
            catalog,
            anaphoric: &anaphoric,
        };
        let r = realize(&reply, Speaker::Assistant, &ctx, templates, rng)?;
        let ti = turns.len();
        turns.push(Turn {
            turn_index: ti,
            speaker: Speaker::Assistant,
            utterance: r.text.clone(),
            template_utterance: r.text,
            frame: reply.clone(),
            active_snapshot: snap.snapshot_id.clone(),
            mentions: r.mentions,
        });
        state.remember(&reply, ti);
        state.turn_count = turns.len();
    }

    let snapshot_ids = match switch_turn {
        Some(_) => snapshots.iter().map(|s| s.snapshot_id.clone()).collect(),
        None => vec![first.snapshot_id.clone()],
    };
    Ok(Dialog {
        dialog_id: dialog_id.to_string(),
        domain: first.domain,
        snapshot_ids,
        viewpoint_switch_turn: switch_turn,
        agenda: names,
        turns,
    })
}
