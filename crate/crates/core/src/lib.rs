//! Two-phase synthetic multimodal dialog pipeline.
//!
//! Phase one renders geometric shopping scenes ([`scenegen`]) and runs
//! agenda-driven user/assistant self-play over them ([`simulator`]), producing
//! fully annotated dialogs ([`ontology`]). [`corpus`] orchestrates generation,
//! splits and statistics; [`eval`] scores model predictions on the four
//! benchmark tasks.

pub mod canonical;
pub mod catalog;
pub mod corpus;
pub mod eval;
pub mod ontology;
pub mod rng;
pub mod scenegen;
pub mod simulator;
pub mod text;
