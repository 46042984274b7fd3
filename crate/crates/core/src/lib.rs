//! Implicit Association Test toolkit: session model and D-scoring, respondent
//! simulation, per-block latency features, and detectors that tell natural
//! first attempts from (possibly faked) second attempts.
//!
//! The data-parallel loops (cohort generation, batch featurization, cohort
//! statistics, cross-validation folds) run on rayon when the default
//! `parallel` feature is enabled; see [`exec::Execution`].

pub mod detectors;
pub mod error;
pub mod eval;
pub mod exec;
pub mod features;
pub mod fixtures;
pub mod scoring;
pub mod session;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
