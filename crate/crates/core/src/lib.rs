//! Cross-lingual tweet sentiment classification.
//!
//! The crate is organised around the stages of the method:
//!
//! * [`corpus`] ingests datasets into a canonical, split-aware corpus.
//! * [`translate`] expands training corpora into the five studied languages
//!   through a cached translation backend.
//! * [`classifier`] trains a three-class classifier with class-weighted
//!   cross-entropy, Adam and dev-set early stopping.
//! * [`metrics`] computes average recall, macro F1 and positive/negative F1.
//! * [`pipeline`] runs the staged experiments and writes reports.

pub mod classifier;
pub mod corpus;
pub mod metrics;
pub mod pipeline;
pub mod synthetic;
pub mod translate;

/// Coarse failure classes, mapped to process exit codes by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Training,
    Io,
}
