//! Staged experiments: optional English pre-training, optional translation
//! augmentation, target-language fine-tuning and test evaluation, plus the
//! full configuration grid.
//!
//! Artifacts of one experiment live under `<run_root>/run-<config hash>/`.
//! Pre-training checkpoints are keyed by their inputs and stored once under
//! `<run_root>/pretrain-<hash>/` so every target reuses them.

mod config;
mod plan;
mod run;
mod store;

use std::path::PathBuf;

pub use config::{
    BackendKind, EvaluationConfig, ExperimentConfig, MatrixConfig, SourceConfig, TranslationConfig, DEFAULT_SEED,
    FINETUNE_LR, PRETRAIN_LR,
};
pub use plan::{build_stage_plan, InitFrom, Stage, StageKind, StagePlan};
pub use run::{
    descriptor, emit_report, evaluate_checkpoint, ingest_sources, matrix_cells, report_from_predictions, run_dir,
    run_experiment, run_matrix, ExperimentOutcome, MatrixOutcome, StageOutcome, Translator, REPORT_FILE, TABLE_FILE,
};
pub use store::{DataAccess, DataStore, Phase};

use crate::classifier::ClassifierError;
use crate::corpus::{CorpusError, Language, Split};
use crate::metrics::MetricsError;
use crate::translate::TranslateError;
use crate::ErrorCategory;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data augmentation requested but no translation backend is configured")]
    NoBackend,
    #[error("no {split} corpus declared for {language}")]
    MissingCorpus { language: Language, split: Split },
    #[error("test split of {language} requested during {phase:?}")]
    SealedTestSplit { language: Language, phase: store::Phase },
    #[error("checkpoint {path} was built from different inputs (expected {expected}, found {found})")]
    StaleCheckpoint {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: StageKind,
        #[source]
        source: ClassifierError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl PipelineError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::Config(_) | Self::NoBackend => ErrorCategory::Config,
            Self::MissingCorpus { .. } | Self::SealedTestSplit { .. } | Self::StaleCheckpoint { .. } => {
                ErrorCategory::Data
            }
            Self::Stage { source, .. } => source.category(),
            Self::Io { .. } => ErrorCategory::Io,
            Self::Corpus(e) => e.category(),
            Self::Translate(e) => e.category(),
            Self::Classifier(e) => e.category(),
            Self::Metrics(e) => e.category(),
        }
    }
}
