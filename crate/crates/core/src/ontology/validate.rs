use std::fmt;

use super::{BeliefFrame, Dialog, Ontology, Speaker};
use crate::catalog::Domain;
use crate::ontology::Intent;
use crate::scenegen::SceneSnapshot;

/// A broken invariant. Validation reports these as data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    UnknownSlot {
        turn: Option<usize>,
        slot: String,
    },
    UnresolvableObject {
        turn: Option<usize>,
        object: u32,
    },
    IllegalIntent {
        turn: Option<usize>,
        speaker: Speaker,
        intent: Intent,
    },
    LabelMismatch {
        turn: Option<usize>,
        speaker: Speaker,
    },
    DisambiguationArity {
        turn: Option<usize>,
        objects: usize,
    },
    TooFewTurns(usize),
    TurnIndex {
        position: usize,
        found: usize,
    },
    Alternation {
        turn: usize,
        found: Speaker,
    },
    SnapshotCount(usize),
    SwitchTurn(Option<usize>),
    WrongActiveSnapshot {
        turn: usize,
        found: String,
    },
    UnknownSnapshot(String),
    DifferentInstances,
    NotFollowedByDisambiguation(usize),
}

impl Violation {
    fn at(turn: Option<usize>) -> String {
        turn.map(|t| format!("turn {t}: ")).unwrap_or_default()
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownSlot { turn, slot } => write!(f, "{}unknown slot {slot}", Self::at(*turn)),
            Self::UnresolvableObject { turn, object } => {
                write!(f, "{}unresolvable object {object}", Self::at(*turn))
            }
            Self::IllegalIntent { turn, speaker, intent } => {
                write!(f, "{}illegal {speaker} intent {intent}", Self::at(*turn))
            }
            Self::LabelMismatch { turn, speaker } => write!(
                f,
                "{}disambiguation_label must be present exactly on user frames (found on {speaker})",
                Self::at(*turn)
            ),
            Self::DisambiguationArity { turn, objects } => write!(
                f,
                "{}disambiguation request names {objects} objects, needs at least 2",
                Self::at(*turn)
            ),
            Self::TooFewTurns(n) => write!(f, "dialog has {n} turns, needs at least 2"),
            Self::TurnIndex { position, found } => {
                write!(f, "turn at position {position} has turn_index {found}")
            }
            Self::Alternation { turn, found } => {
                write!(f, "turn {turn}: speaker {found} breaks user/assistant alternation")
            }
            Self::SnapshotCount(n) => write!(f, "dialog has {n} snapshots, expected 1 or 2"),
            Self::SwitchTurn(t) => write!(f, "invalid viewpoint_switch_turn {t:?}"),
            Self::WrongActiveSnapshot { turn, found } => {
                write!(f, "turn {turn}: unexpected active snapshot {found}")
            }
            Self::UnknownSnapshot(id) => write!(f, "unknown snapshot {id}"),
            Self::DifferentInstances => {
                write!(f, "the two snapshots come from different scene instances")
            }
            Self::NotFollowedByDisambiguation(t) => {
                write!(f, "turn {t}: ambiguous user turn not followed by REQUEST:DISAMBIGUATE")
            }
        }
    }
}

pub(super) fn frame(
    ontology: &Ontology,
    frame: &BeliefFrame,
    speaker: Speaker,
    snapshot: &SceneSnapshot,
    domain: Domain,
) -> Vec<Violation> {
    frame_at(ontology, frame, speaker, snapshot, domain, None)
}

fn frame_at(
    ontology: &Ontology,
    frame: &BeliefFrame,
    speaker: Speaker,
    snapshot: &SceneSnapshot,
    domain: Domain,
    turn: Option<usize>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for slot in frame.slot_values.keys().chain(frame.request_slots.iter()) {
        if !ontology.has_slot(domain, slot) {
            out.push(Violation::UnknownSlot {
                turn,
                slot: slot.clone(),
            });
        }
    }
    let n = snapshot.objects.len();
    for &o in &frame.objects {
        if o as usize >= n {
            out.push(Violation::UnresolvableObject { turn, object: o });
        }
    }
    if !ontology.allows(speaker, frame.intent()) {
        out.push(Violation::IllegalIntent {
            turn,
            speaker,
            intent: frame.intent(),
        });
    }
    if frame.disambiguation_label.is_some() != (speaker == Speaker::User) {
        out.push(Violation::LabelMismatch { turn, speaker });
    }
    if frame.is_disambiguation_request() && frame.objects.len() < 2 {
        out.push(Violation::DisambiguationArity {
            turn,
            objects: frame.objects.len(),
        });
    }
    out
}

/// Checks the invariants that need no scene data.
pub fn validate_dialog_structure(dialog: &Dialog) -> Vec<Violation> {
    let mut out = Vec::new();
    if dialog.turns.len() < 2 {
        out.push(Violation::TooFewTurns(dialog.turns.len()));
    }
    let n_snap = dialog.snapshot_ids.len();
    if !(1..=2).contains(&n_snap) {
        out.push(Violation::SnapshotCount(n_snap));
    }
    let switch_ok = match (n_snap, dialog.viewpoint_switch_turn) {
        (1, None) => true,
        (2, Some(t)) => t > 0 && t < dialog.turns.len() && t % 2 == 0,
        _ => false,
    };
    if !switch_ok {
        out.push(Violation::SwitchTurn(dialog.viewpoint_switch_turn));
    }
    for (i, t) in dialog.turns.iter().enumerate() {
        if t.turn_index != i {
            out.push(Violation::TurnIndex {
                position: i,
                found: t.turn_index,
            });
        }
        if t.speaker != Speaker::at(i) {
            out.push(Violation::Alternation {
                turn: i,
                found: t.speaker,
            });
        }
        if switch_ok && n_snap > 0 {
            let expected = match dialog.viewpoint_switch_turn {
                Some(s) if i >= s => &dialog.snapshot_ids[1],
                _ => &dialog.snapshot_ids[0],
            };
            if &t.active_snapshot != expected {
                out.push(Violation::WrongActiveSnapshot {
                    turn: i,
                    found: t.active_snapshot.clone(),
                });
            }
        }
        if t.frame.is_ambiguous() && !dialog.followed_by_disambiguation(i) {
            out.push(Violation::NotFollowedByDisambiguation(i));
        }
    }
    out
}

/// Full validation: structure plus every frame against its active snapshot.
pub fn validate_dialog<'a>(
    dialog: &Dialog,
    ontology: &Ontology,
    snapshot: impl Fn(&str) -> Option<&'a SceneSnapshot>,
) -> Vec<Violation> {
    let mut out = validate_dialog_structure(dialog);
    let mut instances = Vec::new();
    for id in &dialog.snapshot_ids {
        match snapshot(id) {
            Some(s) => instances.push(s.instance_id.clone()),
            None => out.push(Violation::UnknownSnapshot(id.clone())),
        }
    }
    if instances.len() == 2 && instances[0] != instances[1] {
        out.push(Violation::DifferentInstances);
    }
    for t in &dialog.turns {
        let Some(snap) = snapshot(&t.active_snapshot) else {
            out.push(Violation::UnknownSnapshot(t.active_snapshot.clone()));
            continue;
        };
        out.extend(frame_at(
            ontology,
            &t.frame,
            t.speaker,
            snap,
            dialog.domain,
            Some(t.turn_index),
        ));
    }
    out
}
