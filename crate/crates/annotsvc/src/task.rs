use serde::{Deserialize, Serialize};
use simmc_core::catalog::Domain;
use simmc_core::ontology::{BeliefFrame, Dialog, ObjectMention, Speaker};
use simmc_core::scenegen::SceneSnapshot;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskState {
    Open,
    Leased,
    Submitted,
    Approved,
}

impl TaskState {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Open => "open",
            Self::Leased => "leased",
            Self::Submitted => "submitted",
            Self::Approved => "approved",
        }
    }
}

impl std::fmt::Display for TaskState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub worker_id: String,
    /// Milliseconds since the Unix epoch.
    pub expires_at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlayBox {
    pub local_index: u32,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [u32; 4],
    pub item_id: String,
    pub visibility: f64,
}

/// Box geometry the UI draws over a neutral canvas of `image_size`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub snapshot_id: String,
    pub image_size: [u32; 2],
    pub boxes: Vec<OverlayBox>,
}

impl Overlay {
    pub fn from_snapshot(s: &SceneSnapshot) -> Self {
        Self {
            snapshot_id: s.snapshot_id.clone(),
            image_size: s.camera.image_size,
            boxes: s
                .objects
                .iter()
                .map(|o| OverlayBox {
                    local_index: o.local_index,
                    bbox: o.bbox_2d,
                    item_id: o.item_id.clone(),
                    visibility: o.visibility,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSnapshot {
    pub snapshot: SceneSnapshot,
    pub overlay: Overlay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTurn {
    pub turn_index: usize,
    pub speaker: Speaker,
    pub template_utterance: String,
    pub frame: BeliefFrame,
    pub active_snapshot: String,
    #[serde(default)]
    pub mentions: Vec<ObjectMention>,
}

/// A note from an annotator that the dialog flow is broken. Flagged tasks are
/// no longer handed out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flag {
    pub worker_id: String,
    pub reason: String,
    pub at: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationTask {
    /// Same as `dialog_id`.
    pub task_id: String,
    pub dialog_id: String,
    pub domain: Domain,
    pub snapshots: Vec<TaskSnapshot>,
    pub turns: Vec<TaskTurn>,
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lease: Option<Lease>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<Flag>,
}

impl AnnotationTask {
    /// Builds the open task for one dialog. `snapshots` must hold every
    /// snapshot the dialog names.
    pub fn from_dialog<'a>(dialog: &Dialog, lookup: impl Fn(&str) -> Option<&'a SceneSnapshot>) -> Option<Self> {
        let snapshots = dialog
            .snapshot_ids
            .iter()
            .map(|id| {
                lookup(id).map(|s| TaskSnapshot {
                    overlay: Overlay::from_snapshot(s),
                    snapshot: s.clone(),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            task_id: dialog.dialog_id.clone(),
            dialog_id: dialog.dialog_id.clone(),
            domain: dialog.domain,
            snapshots,
            turns: dialog
                .turns
                .iter()
                .map(|t| TaskTurn {
                    turn_index: t.turn_index,
                    speaker: t.speaker,
                    template_utterance: t.template_utterance.clone(),
                    frame: t.frame.clone(),
                    active_snapshot: t.active_snapshot.clone(),
                    mentions: t.mentions.clone(),
                })
                .collect(),
            state: TaskState::Open,
            lease: None,
            flags: Vec::new(),
        })
    }

    /// State as seen at `now`: a lease past its expiry reads as open.
    pub fn state_at(&self, now: u64) -> TaskState {
        match (&self.state, &self.lease) {
            (TaskState::Leased, Some(l)) if l.expires_at <= now => TaskState::Open,
            (s, _) => *s,
        }
    }

    pub fn active_lease(&self, now: u64) -> Option<&Lease> {
        match self.state_at(now) {
            TaskState::Leased => self.lease.as_ref(),
            _ => None,
        }
    }

    /// Copy with expired leases cleared, for handing to clients.
    pub fn view_at(&self, now: u64) -> Self {
        let mut t = self.clone();
        if t.state_at(now) != t.state {
            t.state = TaskState::Open;
            t.lease = None;
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseSubmission {
    pub task_id: String,
    pub worker_id: String,
    /// One entry per turn, in turn order.
    pub paraphrases: Vec<String>,
    pub submitted_at: u64,
}
