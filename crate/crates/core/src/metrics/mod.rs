//! Evaluation metrics for three-class polarity: average recall, macro F1 and
//! the positive/negative F1 average, plus cross-language aggregation.
//!
//! All arithmetic is done at full precision from a [`ConfusionMatrix`];
//! rounding to one-decimal percentages happens only when reports are
//! rendered.

mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{Language, SentimentLabel};
use crate::ErrorCategory;

pub use report::{
    confusion_from_predictions, read_predictions, render_table, table_rows, write_predictions, EvalReport, ExperimentDescriptor,
    LanguageResult, PredictionRow, TableRow, AGGREGATE_LABEL,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("nothing to score")]
    Empty,
    #[error("no languages left to aggregate")]
    NoLanguages,
    #[error("predictions file {path}: {detail}")]
    Predictions { path: String, detail: String },
    #[error("unknown selection metric {0:?}")]
    UnknownMetric(String),
}

impl MetricsError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::UnknownMetric(_) => ErrorCategory::Config,
            _ => ErrorCategory::Data,
        }
    }
}

/// How a class with no gold examples enters the averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSupport {
    /// The class contributes 0 (and a warning is logged).
    #[default]
    Zero,
    /// The class is left out of the averages.
    Exclude,
}

/// `counts[gold][pred]` in canonical label order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[u64; 3]; 3],
}

/// Builds the confusion matrix of paired gold and predicted labels.
pub fn confusion(gold: &[SentimentLabel], pred: &[SentimentLabel]) -> Result<ConfusionMatrix, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; 3]; 3]) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[[u64; 3]; 3] {
        &self.counts
    }

    pub fn get(&self, gold: SentimentLabel, pred: SentimentLabel) -> u64 {
        self.counts[gold.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Gold support of a class.
    pub fn row_sum(&self, class: SentimentLabel) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// Number of predictions of a class.
    pub fn col_sum(&self, class: SentimentLabel) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    pub fn recall(&self, class: SentimentLabel) -> f64 {
        ratio(self.get(class, class), self.row_sum(class))
    }

    pub fn precision(&self, class: SentimentLabel) -> f64 {
        ratio(self.get(class, class), self.col_sum(class))
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub fn f1(&self, class: SentimentLabel) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn rec_avg(&self) -> Result<f64, MetricsError> {
        self.rec_avg_with(ZeroSupport::Zero)
    }

    pub fn f1_macro(&self) -> Result<f64, MetricsError> {
        self.f1_macro_with(ZeroSupport::Zero)
    }

    pub fn f1_pn(&self) -> Result<f64, MetricsError> {
        self.f1_pn_with(ZeroSupport::Zero)
    }

    pub fn rec_avg_with(&self, mode: ZeroSupport) -> Result<f64, MetricsError> {
        self.class_mean(&SentimentLabel::ALL, mode, |c| self.recall(c))
    }

    pub fn f1_macro_with(&self, mode: ZeroSupport) -> Result<f64, MetricsError> {
        self.class_mean(&SentimentLabel::ALL, mode, |c| self.f1(c))
    }

    /// Mean of the negative and positive F1 scores; neutral is ignored.
    pub fn f1_pn_with(&self, mode: ZeroSupport) -> Result<f64, MetricsError> {
        self.class_mean(
            &[SentimentLabel::Negative, SentimentLabel::Positive],
            mode,
            |c| self.f1(c),
        )
    }

    pub fn triple(&self) -> Result<MetricTriple, MetricsError> {
        self.triple_with(ZeroSupport::Zero)
    }

    pub fn triple_with(&self, mode: ZeroSupport) -> Result<MetricTriple, MetricsError> {
        Ok(MetricTriple {
            rec_avg: self.rec_avg_with(mode)?,
            f1_macro: self.f1_macro_with(mode)?,
            f1_pn: self.f1_pn_with(mode)?,
        })
    }

    fn class_mean(
        &self,
        classes: &[SentimentLabel],
        mode: ZeroSupport,
        score: impl Fn(SentimentLabel) -> f64,
    ) -> Result<f64, MetricsError> {
        if self.total() == 0 {
            return Err(MetricsError::Empty);
        }
        let mut sum = 0.0;
        let mut n = 0usize;
        for &class in classes {
            if self.row_sum(class) == 0 {
                match mode {
                    ZeroSupport::Zero => {
                        warn!("class {class} has no gold examples; scoring it as 0");
                        n += 1;
                    }
                    ZeroSupport::Exclude => {}
                }
                continue;
            }
            sum += score(class);
            n += 1;
        }
        if n == 0 {
            return Err(MetricsError::Empty);
        }
        Ok(sum / n as f64)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "gold\\pred  negative   neutral  positive")?;
        for class in SentimentLabel::ALL {
            let row = &self.counts[class.index()];
            writeln!(f, "{:<9} {:>9} {:>9} {:>9}", class.as_str(), row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

/// Free-function forms of the matrix methods.
pub fn rec_avg(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.rec_avg()
}

pub fn f1_macro(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.f1_macro()
}

pub fn f1_pn(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    cm.f1_pn()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub rec_avg: f64,
    pub f1_macro: f64,
    pub f1_pn: f64,
}

impl MetricTriple {
    pub fn get(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::AvgRec => self.rec_avg,
            SelectionMetric::F1Macro => self.f1_macro,
            SelectionMetric::F1Pn => self.f1_pn,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.rec_avg, self.f1_macro, self.f1_pn]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }

    /// The three values as one-decimal percentages.
    pub fn percent(&self) -> [f64; 3] {
        [
            round_percent(self.rec_avg),
            round_percent(self.f1_macro),
            round_percent(self.f1_pn),
        ]
    }
}

/// `x` as a percentage rounded to one decimal.
pub fn round_percent(x: f64) -> f64 {
    (x * 1000.0).round() / 10.0
}

/// The metric used for dev-set model selection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    AvgRec,
    F1Macro,
    F1Pn,
}

impl FromStr for SelectionMetric {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "avg_rec" => Ok(Self::AvgRec),
            "f1_macro" => Ok(Self::F1Macro),
            "f1_pn" => Ok(Self::F1Pn),
            other => Err(MetricsError::UnknownMetric(other.to_string())),
        }
    }
}

/// Unweighted mean of each metric over the languages not in `exclude`.
pub fn aggregate_languages(
    per_language: &BTreeMap<Language, MetricTriple>,
    exclude: &[Language],
) -> Result<MetricTriple, MetricsError> {
    let kept: Vec<&MetricTriple> = per_language
        .iter()
        .filter(|(lang, _)| !exclude.contains(lang))
        .map(|(_, t)| t)
        .collect();
    if kept.is_empty() {
        return Err(MetricsError::NoLanguages);
    }
    let n = kept.len() as f64;
    let mean = |f: fn(&MetricTriple) -> f64| kept.iter().map(|t| f(t)).sum::<f64>() / n;
    Ok(MetricTriple {
        rec_avg: mean(|t| t.rec_avg),
        f1_macro: mean(|t| t.f1_macro),
        f1_pn: mean(|t| t.f1_pn),
    })
}
