//! Paraphrase collection for simulated dialogs: annotators lease one dialog
//! at a time, rewrite every turn, and submissions are accepted only when they
//! keep the slot values and object references of the underlying frames.

pub mod api;
pub mod clock;
mod export;
pub mod store;
pub mod task;
pub mod validate;

pub use api::{router, serve};
pub use clock::{Clock, ManualClock, SystemClock};
pub use export::export_paraphrased;
pub use store::{Progress, StoreConfig, StoreError, TaskStore};
pub use task::{AnnotationTask, Overlay, ParaphraseSubmission, TaskState, TaskTurn};
pub use validate::{missing_entities, validate_paraphrases, TurnRejection};
