use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::classifier::{EncoderSpec, TrainConfig};
use crate::corpus::{ColumnLayout, FormatDescriptor, Language, Split, UnknownLabelPolicy};
use crate::metrics::ZeroSupport;

pub const DEFAULT_SEED: u64 = 42;
pub const PRETRAIN_LR: f64 = 2e-6;
pub const FINETUNE_LR: f64 = 5e-7;

/// One dataset file holding a single (language, split).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub dataset: String,
    pub language: Language,
    pub split: Split,
    pub path: PathBuf,
    /// Column mapping for non-canonical files; canonical TSV when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<ColumnLayout>,
    #[serde(default)]
    pub unknown_labels: UnknownLabelPolicy,
}

impl SourceConfig {
    pub fn canonical(dataset: &str, language: Language, split: Split, path: PathBuf) -> Self {
        Self {
            dataset: dataset.to_string(),
            language,
            split,
            path,
            columns: None,
            unknown_labels: UnknownLabelPolicy::Skip,
        }
    }

    pub fn format(&self) -> FormatDescriptor {
        match &self.columns {
            Some(layout) => FormatDescriptor::Columns(layout.clone()),
            None => FormatDescriptor::Canonical,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Word-by-word lexicon lookup.
    #[default]
    Dictionary,
    /// Prefixes `[xx] `; for dry runs.
    Tagging,
    /// JSON-over-HTTP service; endpoint and token may come from the
    /// environment.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslationConfig {
    pub backend: BackendKind,
    pub lexicon: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    /// Defaults to `<run_root>/translations.cache`.
    pub cache: Option<PathBuf>,
    pub targets: Vec<Language>,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Dictionary,
            lexicon: None,
            endpoint: None,
            timeout_secs: 30,
            cache: None,
            targets: Language::ALL.to_vec(),
            retries: 3,
            max_in_flight: 8,
        }
    }
}

/// Cells and targets covered by the `matrix` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatrixConfig {
    pub targets: Vec<Language>,
    /// Also run augmentation without English pre-training.
    pub include_extra: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        Self {
            targets: vec![Language::De, Language::Es, Language::Fr, Language::It],
            include_extra: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub zero_support: ZeroSupport,
}

fn default_model() -> String {
    "Multilingual".into()
}

fn default_run_root() -> PathBuf {
    PathBuf::from("runs")
}

fn default_pretrain() -> TrainConfig {
    TrainConfig {
        learning_rate: PRETRAIN_LR,
        ..TrainConfig::default()
    }
}

fn default_finetune() -> TrainConfig {
    TrainConfig {
        learning_rate: FINETUNE_LR,
        ..TrainConfig::default()
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Everything one experiment needs. Relative paths are resolved against the
/// config file's directory by [`ExperimentConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Label for the Model column of reports.
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_run_root")]
    pub run_root: PathBuf,
    pub target: Language,
    #[serde(default)]
    pub using_english: bool,
    #[serde(default)]
    pub data_augmentation: bool,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub corpora: Vec<SourceConfig>,
    #[serde(default)]
    pub translation: Option<TranslationConfig>,
    #[serde(default = "default_pretrain")]
    pub pretrain: TrainConfig,
    #[serde(default = "default_finetune")]
    pub finetune: TrainConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub matrix: MatrixConfig,
}

impl ExperimentConfig {
    pub fn new(target: Language) -> Self {
        Self {
            seed: DEFAULT_SEED,
            model: default_model(),
            run_root: default_run_root(),
            target,
            using_english: false,
            data_augmentation: false,
            encoder: EncoderSpec::default(),
            corpora: Vec::new(),
            translation: None,
            pretrain: default_pretrain(),
            finetune: default_finetune(),
            evaluation: EvaluationConfig::default(),
            matrix: MatrixConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let config: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run_root);
        for source in &mut self.corpora {
            fix(&mut source.path);
        }
        if let Some(t) = &mut self.translation {
            if let Some(p) = &mut t.lexicon {
                fix(p);
            }
            if let Some(p) = &mut t.cache {
                fix(p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, stage) in [("pretrain", &self.pretrain), ("finetune", &self.finetune)] {
            stage
                .validate()
                .map_err(|e| PipelineError::Config(format!("[{name}] {e}")))?;
        }
        if self.data_augmentation && self.translation.is_none() {
            return Err(PipelineError::NoBackend);
        }
        if let Some(t) = &self.translation {
            if t.backend == BackendKind::Dictionary && t.lexicon.is_none() {
                return Err(PipelineError::Config(
                    "dictionary translation needs a `lexicon` path".into(),
                ));
            }
            if t.max_in_flight == 0 {
                return Err(PipelineError::Config("max_in_flight must be at least 1".into()));
            }
        }
        Ok(())
    }

    /// Same experiment, different grid cell.
    pub fn with_cell(&self, target: Language, using_english: bool, data_augmentation: bool) -> Self {
        Self {
            target,
            using_english,
            data_augmentation,
            ..self.clone()
        }
    }

    pub fn hash(&self) -> String {
        crate::classifier::json_hash(self)
    }
}
