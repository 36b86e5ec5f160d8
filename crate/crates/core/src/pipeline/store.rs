use std::sync::Mutex;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::SourceConfig;
use super::PipelineError;
use crate::corpus::{ingest_with, merge, Corpus, IngestOptions, Language, Manifest, Split};

/// Run phase, recorded with every corpus read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Planning,
    Training,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataAccess {
    pub phase: Phase,
    pub language: Language,
    pub split: Split,
    pub dataset: String,
}

/// Loads declared sources and keeps an audit trail of every file read.
/// Test splits stay sealed until the evaluation phase begins.
pub struct DataStore {
    sources: Vec<SourceConfig>,
    phase: Mutex<Phase>,
    log: Mutex<Vec<DataAccess>>,
}

impl DataStore {
    pub fn new(sources: Vec<SourceConfig>) -> Self {
        Self {
            sources,
            phase: Mutex::new(Phase::Planning),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn sources(&self) -> &[SourceConfig] {
        &self.sources
    }

    pub fn phase(&self) -> Phase {
        *self.phase.lock().expect("phase lock")
    }

    pub fn enter(&self, phase: Phase) {
        *self.phase.lock().expect("phase lock") = phase;
    }

    pub fn accesses(&self) -> Vec<DataAccess> {
        self.log.lock().expect("audit lock").clone()
    }

    /// Whether any source declares this (language, split).
    pub fn has(&self, language: Language, split: Split) -> bool {
        self.sources
            .iter()
            .any(|s| s.language == language && s.split == split)
    }

    /// Every declared source of one (language, split), merged in declaration
    /// order.
    pub fn load(&self, language: Language, split: Split) -> Result<Corpus, PipelineError> {
        let phase = self.phase();
        if split == Split::Test && phase != Phase::Evaluation {
            return Err(PipelineError::SealedTestSplit { language, phase });
        }
        let mut parts = Vec::new();
        for source in self.sources.iter().filter(|s| s.language == language && s.split == split) {
            self.log.lock().expect("audit lock").push(DataAccess {
                phase,
                language,
                split,
                dataset: source.dataset.clone(),
            });
            let options = IngestOptions {
                unknown_labels: source.unknown_labels,
                ..IngestOptions::default()
            };
            let (corpus, stats) =
                ingest_with(&source.path, &source.format(), &source.dataset, language, split, &options)?;
            info!(
                "{}: kept {} of {} rows ({} {})",
                source.path.display(),
                stats.kept,
                stats.rows,
                language,
                split
            );
            parts.push(corpus);
        }
        if parts.is_empty() {
            return Err(PipelineError::MissingCorpus { language, split });
        }
        Ok(merge(parts))
    }

    /// Counts of every train and dev source. Test files are not opened.
    pub fn manifest(&self) -> Result<Manifest, PipelineError> {
        let mut manifest = Manifest::default();
        let mut seen = Vec::new();
        for s in &self.sources {
            if s.split == Split::Test || seen.contains(&(s.language, s.split)) {
                continue;
            }
            seen.push((s.language, s.split));
            manifest.merge_from(self.load(s.language, s.split)?.manifest());
        }
        Ok(manifest)
    }
}
