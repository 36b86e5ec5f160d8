//! Three-class polarity classifier: a pluggable encoder with an affine head,
//! trained with class-weighted cross-entropy and Adam, with per-epoch dev
//! evaluation and best-epoch retention.

mod checkpoint;
mod encoder;
mod loss;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION, LAYOUT_FILE, META_FILE, PARAMS_FILE};
pub use encoder::{EncoderBackend, EncoderSpec, SparseVec, TinyHashConfig, TinyHashEncoder};
pub use loss::{class_weights, log_softmax, softmax, weighted_cross_entropy, ClassWeightMode, ClassWeights};
pub(crate) use model::json_hash;
pub use model::{argmax_label, ClassifierModel, ModelMeta, NUM_CLASSES};
pub use train::{
    evaluate, train, train_with_evaluator, Adam, AdamConfig, EarlyStopping, EncodedSet, EpochRecord, StopDecision,
    TrainConfig, TrainingLog,
};

use crate::corpus::SentimentLabel;
use crate::metrics::MetricsError;
use crate::ErrorCategory;

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{0} set is empty")]
    EmptyCorpus(String),
    #[error("class {0} is absent from the training set; inverse-frequency weights are undefined")]
    AbsentClass(SentimentLabel),
    #[error("non-finite logits {0:?}")]
    NonFiniteLogits([f64; 3]),
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("checkpoint layout mismatch: expected [{expected}], found [{found}]")]
    LayoutMismatch { expected: String, found: String },
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("parameter file {path} holds {found} bytes, expected {expected}")]
    Truncated { path: String, expected: usize, found: usize },
    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: String, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl ClassifierError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::InvalidConfig(_) => ErrorCategory::Config,
            Self::EmptyCorpus(_) | Self::AbsentClass(_) => ErrorCategory::Data,
            Self::NonFiniteLogits(_) | Self::Diverged { .. } => ErrorCategory::Training,
            Self::Metrics(e) => e.category(),
            _ => ErrorCategory::Io,
        }
    }
}

/// Name and shape of one tensor in the flat parameter store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn new(name: &str, shape: &[usize]) -> Self {
        Self {
            name: name.to_string(),
            shape: shape.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for TensorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        write!(f, "{} {}", self.name, dims.join("x"))
    }
}

impl FromStr for TensorSpec {
    type Err = ClassifierError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = || ClassifierError::Checkpoint {
            path: LAYOUT_FILE.into(),
            detail: format!("malformed layout line {line:?}"),
        };
        let (name, dims) = line.trim().split_once(' ').ok_or_else(bad)?;
        let shape = dims
            .split('x')
            .map(|d| d.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(name, &shape))
    }
}
