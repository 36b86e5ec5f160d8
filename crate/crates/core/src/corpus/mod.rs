//! Canonical, split-aware tweet corpora.
//!
//! Every dataset, whatever its original layout, is ingested into a [`Corpus`]
//! of [`LabeledExample`]s with normalized text. A corpus keeps insertion
//! order, guarantees unique ids (and therefore disjoint splits) and carries a
//! [`Manifest`] of per-(dataset, split, language) counts that always matches
//! its examples.

mod ingest;
mod normalize;
mod tsv;
mod types;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ingest::{
    ingest, ingest_with, ColumnLayout, FormatDescriptor, IngestOptions, IngestStats, LabelMapping,
    LabelSource, RawRow, UnknownLabelPolicy,
};
pub use normalize::{clean_text, normalize_text, MAX_TEXT_CHARS, MENTION_TOKEN, URL_TOKEN};
pub use tsv::{
    escape_field, manifest_path, read_canonical, read_manifest, unescape_field, write_canonical,
    write_manifest, CANONICAL_HEADER,
};
pub use types::{Language, LabeledExample, Origin, SentimentLabel, Split};

use crate::ErrorCategory;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus file not found: {0}")]
    MissingFile(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },
    #[error("{path}:{line}: {detail}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        detail: String,
    },
    #[error("{path}:{line}: label {value:?} is outside the label mapping")]
    LabelOutsideMapping {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("unknown sentiment label {0:?}")]
    UnknownLabel(String),
    #[error("unsupported language {0:?} (expected one of en, fr, de, es, it)")]
    UnsupportedLanguage(String),
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
    #[error("unknown origin {0:?}")]
    UnknownOrigin(String),
    #[error("duplicate example id {0:?}")]
    DuplicateId(String),
    #[error("example {0:?} has empty text")]
    EmptyText(String),
    #[error("example {0:?} is marked as translated from its own language")]
    SelfTranslation(String),
    #[error("{path}:{line}: row language {found} does not belong to a {expected} dataset")]
    LanguageMismatch {
        path: PathBuf,
        line: u64,
        expected: Language,
        found: Language,
    },
    #[error("invalid manifest {path}: {detail}")]
    Manifest { path: PathBuf, detail: String },
}

impl CorpusError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::Io { .. } => ErrorCategory::Io,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestKey {
    pub dataset: String,
    pub language: Language,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dataset: String,
    pub language: Language,
    pub split: Split,
    pub count: usize,
}

/// Per-(dataset, split, language) example counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "ManifestDoc", into = "ManifestDoc")]
pub struct Manifest {
    counts: BTreeMap<ManifestKey, usize>,
}

#[derive(Serialize, Deserialize)]
struct ManifestDoc {
    entries: Vec<ManifestEntry>,
}

impl From<ManifestDoc> for Manifest {
    fn from(doc: ManifestDoc) -> Self {
        let mut manifest = Manifest::default();
        for e in doc.entries {
            manifest.add(&e.dataset, e.language, e.split, e.count);
        }
        manifest
    }
}

impl From<Manifest> for ManifestDoc {
    fn from(m: Manifest) -> Self {
        ManifestDoc {
            entries: m.entries().collect(),
        }
    }
}

impl Manifest {
    pub fn from_examples<'a>(examples: impl IntoIterator<Item = &'a LabeledExample>) -> Self {
        let mut manifest = Manifest::default();
        for ex in examples {
            manifest.add(&ex.dataset, ex.language, ex.split, 1);
        }
        manifest
    }

    pub fn add(&mut self, dataset: &str, language: Language, split: Split, count: usize) {
        let key = ManifestKey {
            dataset: dataset.to_string(),
            language,
            split,
        };
        *self.counts.entry(key).or_insert(0) += count;
    }

    pub fn get(&self, dataset: &str, language: Language, split: Split) -> usize {
        let key = ManifestKey {
            dataset: dataset.to_string(),
            language,
            split,
        };
        self.counts.get(&key).copied().unwrap_or(0)
    }

    /// Sum of counts over entries matching the given split and language.
    pub fn count(&self, language: Option<Language>, split: Option<Split>) -> usize {
        self.counts
            .iter()
            .filter(|(k, _)| language.map_or(true, |l| k.language == l))
            .filter(|(k, _)| split.map_or(true, |s| k.split == s))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = ManifestEntry> + '_ {
        self.counts.iter().map(|(k, &count)| ManifestEntry {
            dataset: k.dataset.clone(),
            language: k.language,
            split: k.split,
            count,
        })
    }

    pub fn merge_from(&mut self, other: &Manifest) {
        for (k, &c) in &other.counts {
            *self.counts.entry(k.clone()).or_insert(0) += c;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// An ordered, immutable collection of examples with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    examples: Vec<LabeledExample>,
    manifest: Manifest,
}

impl Corpus {
    /// Validates id uniqueness, non-empty text and translation provenance.
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.id.as_str()) {
                return Err(CorpusError::DuplicateId(ex.id.clone()));
            }
            if ex.text.is_empty() {
                return Err(CorpusError::EmptyText(ex.id.clone()));
            }
            if ex.origin == Origin::Translated(ex.language) {
                return Err(CorpusError::SelfTranslation(ex.id.clone()));
            }
        }
        Ok(Self::from_checked(examples))
    }

    fn from_checked(examples: Vec<LabeledExample>) -> Self {
        let manifest = Manifest::from_examples(&examples);
        Self { examples, manifest }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<LabeledExample> {
        self.examples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledExample> {
        self.examples.iter()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Examples of one split, order preserved.
    pub fn split(&self, split: Split) -> Corpus {
        self.filter(|ex| ex.split == split)
    }

    pub fn filter(&self, keep: impl Fn(&LabeledExample) -> bool) -> Corpus {
        Self::from_checked(self.examples.iter().filter(|ex| keep(ex)).cloned().collect())
    }

    pub fn texts(&self) -> Vec<&str> {
        self.examples.iter().map(|ex| ex.text.as_str()).collect()
    }

    pub fn labels(&self) -> Vec<SentimentLabel> {
        self.examples.iter().map(|ex| ex.label).collect()
    }

    /// Counts per class in canonical label order.
    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for ex in &self.examples {
            counts[ex.label.index()] += 1;
        }
        counts
    }

    /// Recomputes the manifest from the examples and compares.
    pub fn manifest_is_consistent(&self) -> bool {
        Manifest::from_examples(&self.examples) == self.manifest
    }

    /// Hex SHA-256 over every field of every example, in order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for ex in &self.examples {
            for field in [
                ex.id.as_str(),
                ex.language.code(),
                ex.label.as_str(),
                &ex.origin.to_string(),
                ex.dataset.as_str(),
                ex.split.as_str(),
                ex.text.as_str(),
            ] {
                hasher.update(field.as_bytes());
                hasher.update([0u8]);
            }
            hasher.update([b'\n']);
        }
        hex::encode(hasher.finalize())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a LabeledExample;
    type IntoIter = std::slice::Iter<'a, LabeledExample>;

    fn into_iter(self) -> Self::IntoIter {
        self.examples.iter()
    }
}

/// Concatenates corpora in order. An id already taken by an earlier example
/// is rewritten as `<dataset>/<id>` (with a `~k` suffix if still taken).
pub fn merge(corpora: impl IntoIterator<Item = Corpus>) -> Corpus {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::new();
    for corpus in corpora {
        for mut ex in corpus.examples {
            if seen.contains(&ex.id) {
                let base = format!("{}/{}", ex.dataset, ex.id);
                let mut candidate = base.clone();
                let mut k = 1;
                while seen.contains(&candidate) {
                    k += 1;
                    candidate = format!("{base}~{k}");
                }
                ex.id = candidate;
            }
            seen.insert(ex.id.clone());
            out.push(ex);
        }
    }
    Corpus::from_checked(out)
}
