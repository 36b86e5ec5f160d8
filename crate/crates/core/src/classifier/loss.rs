use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::corpus::{Corpus, SentimentLabel};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightMode {
    None,
    /// `w_c = N / (3 n_c)`, so a balanced corpus gets unit weights.
    #[default]
    InverseFrequency,
}

impl std::str::FromStr for ClassWeightMode {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "inverse_frequency" => Ok(Self::InverseFrequency),
            other => Err(ClassifierError::InvalidConfig(format!(
                "unknown class weight mode {other:?}"
            ))),
        }
    }
}

/// Per-class loss weights in canonical label order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; 3]);

impl Default for ClassWeights {
    fn default() -> Self {
        Self::UNIT
    }
}

impl ClassWeights {
    pub const UNIT: ClassWeights = ClassWeights([1.0; 3]);

    pub fn get(&self, label: SentimentLabel) -> f64 {
        self.0[label.index()]
    }

    /// Weights from per-class counts.
    pub fn from_counts(counts: [usize; 3], mode: ClassWeightMode) -> Result<Self, ClassifierError> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(ClassifierError::EmptyCorpus("class weights".into()));
        }
        match mode {
            ClassWeightMode::None => Ok(Self::UNIT),
            ClassWeightMode::InverseFrequency => {
                let mut w = [0.0; 3];
                for label in SentimentLabel::ALL {
                    let n = counts[label.index()];
                    if n == 0 {
                        return Err(ClassifierError::AbsentClass(label));
                    }
                    w[label.index()] = total as f64 / (3.0 * n as f64);
                }
                Ok(Self(w))
            }
        }
    }
}

pub fn class_weights(train: &Corpus, mode: ClassWeightMode) -> Result<ClassWeights, ClassifierError> {
    let mut counts = [0usize; 3];
    for ex in train {
        counts[ex.label.index()] += 1;
    }
    ClassWeights::from_counts(counts, mode)
}

/// Numerically stable log-softmax.
pub fn log_softmax(logits: &[f64; 3]) -> Result<[f64; 3], ClassifierError> {
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(ClassifierError::NonFiniteLogits(*logits));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(logits.map(|z| z - lse))
}

pub fn softmax(logits: &[f64; 3]) -> Result<[f64; 3], ClassifierError> {
    Ok(log_softmax(logits)?.map(f64::exp))
}

/// `w_gold · (−log softmax(logits)[gold])`.
pub fn weighted_cross_entropy(
    logits: &[f64; 3],
    gold: SentimentLabel,
    weights: &ClassWeights,
) -> Result<f64, ClassifierError> {
    Ok(-weights.get(gold) * log_softmax(logits)?[gold.index()])
}
