use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::normalize::clean_text;
use super::tsv::{unescape_field, CANONICAL_HEADER};
use super::{Corpus, CorpusError, Language, LabeledExample, Origin, SentimentLabel, Split};

/// Target of a raw label value in a dataset's label mapping table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMapping {
    Negative,
    Neutral,
    Positive,
    /// Drop the row (counted as an unmapped label).
    Skip,
}

impl LabelMapping {
    fn label(self) -> Option<SentimentLabel> {
        match self {
            Self::Negative => Some(SentimentLabel::Negative),
            Self::Neutral => Some(SentimentLabel::Neutral),
            Self::Positive => Some(SentimentLabel::Positive),
            Self::Skip => None,
        }
    }
}

/// What to do with a label value that neither the mapping table nor the
/// canonical label names cover.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownLabelPolicy {
    #[default]
    Skip,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelSource {
    /// A single column holding a label string.
    Column { column: String },
    /// Two 0/1 flag columns (Sentipolc style). Both flags set means mixed
    /// polarity, which has no three-class home and is skipped.
    PolarityFlags { positive: String, negative: String },
}

/// Column mapping for a non-canonical delimited dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnLayout {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub quoted: bool,
    /// Falls back to `<dataset>-<line>` when absent.
    #[serde(default)]
    pub id_column: Option<String>,
    pub text_column: String,
    pub label: LabelSource,
    #[serde(default)]
    pub label_map: BTreeMap<String, LabelMapping>,
}

fn default_delimiter() -> char {
    '\t'
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormatDescriptor {
    /// `id language label origin text`, escaped text.
    Canonical,
    Columns(ColumnLayout),
}

/// Read-only view of one raw input row, handed to row filters.
pub struct RawRow<'a> {
    pub line: u64,
    headers: &'a csv::StringRecord,
    record: &'a csv::StringRecord,
}

impl RawRow<'_> {
    pub fn get(&self, column: &str) -> Option<&str> {
        self.headers
            .iter()
            .position(|h| h == column)
            .and_then(|i| self.record.get(i))
    }
}

pub type RowFilter = Arc<dyn Fn(&RawRow<'_>) -> bool + Send + Sync>;

#[derive(Clone, Default)]
pub struct IngestOptions {
    pub unknown_labels: UnknownLabelPolicy,
    /// Rows for which the filter returns false are dropped and counted.
    pub row_filter: Option<RowFilter>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: usize,
    pub kept: usize,
    pub skipped_unmapped_label: usize,
    pub skipped_mixed_polarity: usize,
    pub skipped_empty_text: usize,
    pub filtered: usize,
}

/// [`ingest_with`] using default options.
pub fn ingest(
    path: &Path,
    format: &FormatDescriptor,
    dataset: &str,
    language: Language,
    split: Split,
) -> Result<(Corpus, IngestStats), CorpusError> {
    ingest_with(path, format, dataset, language, split, &IngestOptions::default())
}

/// Reads one dataset file into a normalized corpus tagged with the given
/// dataset, language and split.
///
/// Rows whose label cannot be mapped are skipped and counted unless
/// `options.unknown_labels` is [`UnknownLabelPolicy::Reject`]. A repeated id
/// rejects the whole file.
pub fn ingest_with(
    path: &Path,
    format: &FormatDescriptor,
    dataset: &str,
    language: Language,
    split: Split,
    options: &IngestOptions,
) -> Result<(Corpus, IngestStats), CorpusError> {
    let (delimiter, quoted) = match format {
        FormatDescriptor::Canonical => ('\t', false),
        FormatDescriptor::Columns(layout) => (layout.delimiter, layout.quoted),
    };
    let mut reader = open_table(path, delimiter, quoted)?;
    let headers = read_headers(&mut reader, path)?;
    let columns = Columns::resolve(format, &headers, path)?;

    let mut stats = IngestStats::default();
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        stats.rows += 1;
        let row = RawRow {
            line,
            headers: &headers,
            record: &record,
        };
        if let Some(filter) = &options.row_filter {
            if !filter(&row) {
                stats.filtered += 1;
                continue;
            }
        }

        let id = match columns.id {
            Some(i) if columns.escaped => unescape_field(field(&record, i)),
            Some(i) => field(&record, i).to_string(),
            None => format!("{dataset}-{line}"),
        };
        if id.is_empty() {
            return Err(row_error(path, line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(CorpusError::MalformedRow {
                path: path.to_path_buf(),
                line,
                detail: format!("duplicate id {id:?}"),
            });
        }

        let label = match columns.label(&record) {
            RowLabel::Label(label) => label,
            RowLabel::Skip => {
                stats.skipped_unmapped_label += 1;
                continue;
            }
            RowLabel::Mixed => {
                stats.skipped_mixed_polarity += 1;
                continue;
            }
            RowLabel::Unknown(value) => match options.unknown_labels {
                UnknownLabelPolicy::Skip => {
                    stats.skipped_unmapped_label += 1;
                    continue;
                }
                UnknownLabelPolicy::Reject => {
                    return Err(CorpusError::LabelOutsideMapping {
                        path: path.to_path_buf(),
                        line,
                        value,
                    })
                }
            },
        };

        let (row_language, origin) = match (columns.language, columns.origin) {
            (Some(li), Some(oi)) => {
                let row_language: Language = field(&record, li)
                    .parse()
                    .map_err(|e: CorpusError| row_error(path, line, &e.to_string()))?;
                let origin: Origin = field(&record, oi)
                    .parse()
                    .map_err(|e: CorpusError| row_error(path, line, &e.to_string()))?;
                let dataset_language = match origin {
                    Origin::Original => row_language,
                    Origin::Translated(source) => source,
                };
                if dataset_language != language {
                    return Err(CorpusError::LanguageMismatch {
                        path: path.to_path_buf(),
                        line,
                        expected: language,
                        found: dataset_language,
                    });
                }
                if origin == Origin::Translated(row_language) {
                    return Err(row_error(path, line, "translated from its own language"));
                }
                (row_language, origin)
            }
            _ => (language, Origin::Original),
        };

        let raw_text = field(&record, columns.text);
        let text = if columns.escaped {
            clean_text(&unescape_field(raw_text))
        } else {
            clean_text(raw_text)
        };
        if text.is_empty() {
            stats.skipped_empty_text += 1;
            continue;
        }

        examples.push(LabeledExample {
            id,
            text,
            language: row_language,
            label,
            origin,
            dataset: dataset.to_string(),
            split,
        });
    }

    stats.kept = examples.len();
    if stats.skipped_unmapped_label + stats.skipped_mixed_polarity + stats.skipped_empty_text > 0 {
        warn!(
            "{}: skipped {} unmapped-label, {} mixed-polarity, {} empty rows",
            path.display(),
            stats.skipped_unmapped_label,
            stats.skipped_mixed_polarity,
            stats.skipped_empty_text
        );
    }
    Ok((Corpus::new(examples)?, stats))
}

enum RowLabel {
    Label(SentimentLabel),
    Skip,
    Mixed,
    Unknown(String),
}

struct Columns<'f> {
    id: Option<usize>,
    text: usize,
    language: Option<usize>,
    origin: Option<usize>,
    label: LabelColumns,
    label_map: Option<&'f BTreeMap<String, LabelMapping>>,
    escaped: bool,
}

enum LabelColumns {
    Single(usize),
    Flags { positive: usize, negative: usize },
}

impl<'f> Columns<'f> {
    fn resolve(
        format: &'f FormatDescriptor,
        headers: &csv::StringRecord,
        path: &Path,
    ) -> Result<Self, CorpusError> {
        let find = |name: &str| -> Result<usize, CorpusError> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CorpusError::MalformedHeader {
                    path: path.to_path_buf(),
                    detail: format!("missing column {name:?}"),
                })
        };
        match format {
            FormatDescriptor::Canonical => {
                let found: Vec<&str> = headers.iter().collect();
                if found != CANONICAL_HEADER {
                    return Err(CorpusError::MalformedHeader {
                        path: path.to_path_buf(),
                        detail: format!("expected {:?}, found {:?}", CANONICAL_HEADER, found),
                    });
                }
                Ok(Self {
                    id: Some(0),
                    language: Some(1),
                    label: LabelColumns::Single(2),
                    origin: Some(3),
                    text: 4,
                    label_map: None,
                    escaped: true,
                })
            }
            FormatDescriptor::Columns(layout) => {
                let label = match &layout.label {
                    LabelSource::Column { column } => LabelColumns::Single(find(column)?),
                    LabelSource::PolarityFlags { positive, negative } => LabelColumns::Flags {
                        positive: find(positive)?,
                        negative: find(negative)?,
                    },
                };
                Ok(Self {
                    id: layout.id_column.as_deref().map(find).transpose()?,
                    text: find(&layout.text_column)?,
                    language: None,
                    origin: None,
                    label,
                    label_map: Some(&layout.label_map),
                    escaped: false,
                })
            }
        }
    }

    fn label(&self, record: &csv::StringRecord) -> RowLabel {
        match self.label {
            LabelColumns::Single(i) => {
                let raw = field(record, i).trim();
                let key = raw.to_lowercase();
                if let Some(map) = self.label_map {
                    let hit = map
                        .iter()
                        .find(|(k, _)| k.trim().to_lowercase() == key)
                        .map(|(_, v)| *v);
                    if let Some(mapping) = hit {
                        return match mapping.label() {
                            Some(label) => RowLabel::Label(label),
                            None => RowLabel::Skip,
                        };
                    }
                }
                match key.parse::<SentimentLabel>() {
                    Ok(label) => RowLabel::Label(label),
                    Err(_) => RowLabel::Unknown(raw.to_string()),
                }
            }
            LabelColumns::Flags { positive, negative } => {
                let pos = field(record, positive).trim();
                let neg = field(record, negative).trim();
                match (pos, neg) {
                    ("1", "0") => RowLabel::Label(SentimentLabel::Positive),
                    ("0", "1") => RowLabel::Label(SentimentLabel::Negative),
                    ("0", "0") => RowLabel::Label(SentimentLabel::Neutral),
                    ("1", "1") => RowLabel::Mixed,
                    _ => RowLabel::Unknown(format!("{pos}/{neg}")),
                }
            }
        }
    }
}

fn field(record: &csv::StringRecord, i: usize) -> &str {
    record.get(i).unwrap_or("")
}

fn row_error(path: &Path, line: u64, detail: &str) -> CorpusError {
    CorpusError::MalformedRow {
        path: path.to_path_buf(),
        line,
        detail: detail.to_string(),
    }
}

pub(super) fn open_table(
    path: &Path,
    delimiter: char,
    quoted: bool,
) -> Result<csv::Reader<std::fs::File>, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::MissingFile(path.to_path_buf()));
    }
    if !delimiter.is_ascii() {
        return Err(CorpusError::MalformedHeader {
            path: path.to_path_buf(),
            detail: format!("delimiter {delimiter:?} is not ASCII"),
        });
    }
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .quoting(quoted)
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

pub(super) fn read_headers(
    reader: &mut csv::Reader<std::fs::File>,
    path: &Path,
) -> Result<csv::StringRecord, CorpusError> {
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(CorpusError::MalformedHeader {
            path: path.to_path_buf(),
            detail: "file has no header".to_string(),
        });
    }
    Ok(headers)
}

pub(super) fn csv_error(path: &Path, e: csv::Error) -> CorpusError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CorpusError::io(path, io),
        other => CorpusError::MalformedRow {
            path: path.to_path_buf(),
            line,
            detail: format!("{other:?}"),
        },
    }
}
