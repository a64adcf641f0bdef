//! Agenda-based self-play: a goal generator, a user simulator drawing dialog
//! acts from probability tables, an assistant backed by simulated scene and
//! catalog lookups, and template realization.

mod agenda;
mod api;
mod config;
pub mod nlg;
mod selfplay;

use thiserror::Error;

use crate::catalog::Domain;
use crate::ontology::{Intent, Speaker};

pub use agenda::{generate_agenda, goal_satisfiable, Agenda, Goal};
pub use api::{execute_api, search, ApiResult};
pub use config::{
    CorefSourceDistribution, GoalGrammar, GoalKind, Phase, PhaseTable, ProbabilityTable, SimulatorConfig,
    TemplateSource, UserActPattern, DEFAULT_CONFIG_JSON, DEFAULT_TEMPLATES, SUM_TOLERANCE,
};
pub use nlg::{realize, Realized, RenderContext, TemplateSet};
pub use selfplay::{
    ambiguity_candidates, assistant_step, effective_frame, run_self_play, user_step, Pending, SelfPlayState, UserMove,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse simulator config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid simulator config: {0}")]
    Config(String),
    #[error("templates line {line}: {message}")]
    Template { line: usize, message: String },
    #[error("no {speaker} template for {intent} ({shape})")]
    MissingTemplate {
        speaker: Speaker,
        intent: Intent,
        shape: String,
    },
    #[error("snapshot {snapshot_id}: no satisfiable agenda after {attempts} samples")]
    UnsatisfiableAgenda { snapshot_id: String, attempts: usize },
    #[error("snapshot {snapshot_id} has no object {object}")]
    UnknownObject { snapshot_id: String, object: u32 },
    #[error("catalog has no item {0}")]
    UnknownItem(String),
    #[error("invalid grounding snapshots: {0}")]
    Snapshots(String),
    #[error("no probability table for domain {0}")]
    MissingTable(Domain),
}
