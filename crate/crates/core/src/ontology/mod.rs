//! Multimodal dialog ontology: intents, belief frames, turns and dialogs.

mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Domain;

pub use validate::{validate_dialog, validate_dialog_structure, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DialogAct {
    Inform,
    Confirm,
    Request,
    Ask,
}

impl DialogAct {
    pub const ALL: [DialogAct; 4] = [Self::Inform, Self::Confirm, Self::Request, Self::Ask];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Inform => "INFORM",
            Self::Confirm => "CONFIRM",
            Self::Request => "REQUEST",
            Self::Ask => "ASK",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Activity {
    Get,
    Disambiguate,
    Refine,
    AddToCart,
    Compare,
}

impl Activity {
    pub const ALL: [Activity; 5] = [
        Self::Get,
        Self::Disambiguate,
        Self::Refine,
        Self::AddToCart,
        Self::Compare,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Get => "GET",
            Self::Disambiguate => "DISAMBIGUATE",
            Self::Refine => "REFINE",
            Self::AddToCart => "ADD_TO_CART",
            Self::Compare => "COMPARE",
        }
    }
}

impl fmt::Display for DialogAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An (act, activity) pair such as `REQUEST:DISAMBIGUATE`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Intent {
    pub act: DialogAct,
    pub activity: Activity,
}

impl Intent {
    pub const fn new(act: DialogAct, activity: Activity) -> Self {
        Self { act, activity }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.act, self.activity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid intent {0:?}")]
pub struct ParseIntentError(pub String);

impl FromStr for Intent {
    type Err = ParseIntentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseIntentError(s.to_string());
        let (a, b) = s.trim().split_once(':').ok_or_else(err)?;
        let act = DialogAct::ALL.into_iter().find(|x| x.as_str() == a).ok_or_else(err)?;
        let activity = Activity::ALL.into_iter().find(|x| x.as_str() == b).ok_or_else(err)?;
        Ok(Self { act, activity })
    }
}

impl Serialize for Intent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Intent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Assistant,
}

impl Speaker {
    pub fn as_str(&self) -> &'static str {
        match self {
            Speaker::User => "user",
            Speaker::Assistant => "assistant",
        }
    }

    pub fn at(turn_index: usize) -> Self {
        if turn_index.is_multiple_of(2) {
            Speaker::User
        } else {
            Speaker::Assistant
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Per-turn semantic parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefFrame {
    pub act: DialogAct,
    pub activity: Activity,
    #[serde(default)]
    pub request_slots: BTreeSet<String>,
    #[serde(default)]
    pub slot_values: BTreeMap<String, String>,
    /// Snapshot-local object indices.
    #[serde(default)]
    pub objects: Vec<u32>,
    /// Present on user frames only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disambiguation_label: Option<bool>,
    /// Set on assistant frames that report an empty search result.
    #[serde(default, skip_serializing_if = "is_false")]
    pub no_match: bool,
}

impl BeliefFrame {
    pub fn new(act: DialogAct, activity: Activity) -> Self {
        Self {
            act,
            activity,
            request_slots: BTreeSet::new(),
            slot_values: BTreeMap::new(),
            objects: Vec::new(),
            disambiguation_label: None,
            no_match: false,
        }
    }

    pub fn user(act: DialogAct, activity: Activity) -> Self {
        Self {
            disambiguation_label: Some(false),
            ..Self::new(act, activity)
        }
    }

    pub fn intent(&self) -> Intent {
        Intent::new(self.act, self.activity)
    }

    pub fn is_ambiguous(&self) -> bool {
        self.disambiguation_label == Some(true)
    }

    pub fn is_disambiguation_request(&self) -> bool {
        self.act == DialogAct::Request && self.activity == Activity::Disambiguate
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionKind {
    /// Attribute plus spatial description of objects in the scene.
    Visual,
    /// Reference back to objects mentioned earlier in the dialog.
    Anaphoric,
    /// Underspecified reference that fits several candidates.
    Ambiguous,
}

/// A rendered object reference inside an utterance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMention {
    pub objects: Vec<u32>,
    pub text: String,
    pub kind: MentionKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_index: usize,
    pub speaker: Speaker,
    pub utterance: String,
    /// Simulator output before paraphrasing.
    pub template_utterance: String,
    pub frame: BeliefFrame,
    pub active_snapshot: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<ObjectMention>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialog {
    pub dialog_id: String,
    pub domain: Domain,
    pub snapshot_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewpoint_switch_turn: Option<usize>,
    pub agenda: Vec<String>,
    pub turns: Vec<Turn>,
}

impl Dialog {
    pub fn user_turns(&self) -> impl Iterator<Item = &Turn> {
        self.turns.iter().filter(|t| t.speaker == Speaker::User)
    }

    /// Whether the assistant turn right after `turn_index` asks to disambiguate.
    pub fn followed_by_disambiguation(&self, turn_index: usize) -> bool {
        self.turns
            .get(turn_index + 1)
            .is_some_and(|t| t.speaker == Speaker::Assistant && t.frame.is_disambiguation_request())
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("cannot parse ontology: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("dialog {dialog_id} is invalid: {violations:?}")]
    Invalid { dialog_id: String, violations: Vec<String> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OntologyDoc {
    slots: BTreeMap<Domain, Vec<String>>,
    intents: BTreeMap<Speaker, Vec<Intent>>,
}

/// Slot vocabulary per domain and whitelisted intents per speaker.
#[derive(Clone, Debug)]
pub struct Ontology {
    slots: BTreeMap<Domain, Vec<String>>,
    intents: BTreeMap<Speaker, BTreeSet<Intent>>,
}

pub const BUILTIN_ONTOLOGY_JSON: &str = include_str!("../../data/ontology.json");

impl Ontology {
    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let doc: OntologyDoc = serde_json::from_str(text)?;
        Ok(Self {
            slots: doc.slots,
            intents: doc
                .intents
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().collect()))
                .collect(),
        })
    }

    pub fn builtin() -> &'static Ontology {
        static BUILTIN: OnceLock<Ontology> = OnceLock::new();
        BUILTIN.get_or_init(|| Ontology::from_json(BUILTIN_ONTOLOGY_JSON).expect("builtin ontology is valid"))
    }

    pub fn slots(&self, domain: Domain) -> &[String] {
        self.slots.get(&domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_slot(&self, domain: Domain, slot: &str) -> bool {
        self.slots(domain).iter().any(|s| s == slot)
    }

    pub fn allows(&self, speaker: Speaker, intent: Intent) -> bool {
        self.intents.get(&speaker).is_some_and(|set| set.contains(&intent))
    }

    pub fn intents(&self, speaker: Speaker) -> impl Iterator<Item = Intent> + '_ {
        self.intents.get(&speaker).into_iter().flatten().copied()
    }

    /// Checks one frame against the snapshot that was active for its turn.
    pub fn validate_frame(
        &self,
        frame: &BeliefFrame,
        speaker: Speaker,
        snapshot: &crate::scenegen::SceneSnapshot,
        domain: Domain,
    ) -> Vec<Violation> {
        validate::frame(self, frame, speaker, snapshot, domain)
    }
}

/// Serializes a structurally valid dialog to canonical JSON bytes.
pub fn canonical_serialize(dialog: &Dialog) -> Result<Vec<u8>, OntologyError> {
    let violations = validate_dialog_structure(dialog);
    if !violations.is_empty() {
        return Err(OntologyError::Invalid {
            dialog_id: dialog.dialog_id.clone(),
            violations: violations.iter().map(ToString::to_string).collect(),
        });
    }
    Ok(crate::canonical::to_canonical_bytes(dialog)?)
}

pub fn parse_dialog(bytes: &[u8]) -> Result<Dialog, OntologyError> {
    Ok(serde_json::from_slice(bytes)?)
}
