use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{aggregate_languages, confusion, ConfusionMatrix, MetricTriple, MetricsError, ZeroSupport};
use crate::corpus::{escape_field, unescape_field, Language, SentimentLabel};

pub const AGGREGATE_LABEL: &str = "All (non English)";

/// Which cell of the experiment grid a report belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExperimentDescriptor {
    pub model: String,
    pub using_english: bool,
    pub data_augmentation: bool,
}

impl ExperimentDescriptor {
    /// Augmentation without English pre-training: not part of the original
    /// grid, reported as an extra configuration.
    pub fn is_extra(&self) -> bool {
        self.data_augmentation && !self.using_english
    }

    fn grid_order(&self) -> (u8, &str) {
        let cell = match (self.using_english, self.data_augmentation) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        };
        (cell, self.model.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageResult {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricTriple,
    pub test_size: usize,
}

impl LanguageResult {
    pub fn from_confusion(confusion: ConfusionMatrix, mode: ZeroSupport) -> Result<Self, MetricsError> {
        Ok(Self {
            metrics: confusion.triple_with(mode)?,
            test_size: confusion.total() as usize,
            confusion,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub experiment: ExperimentDescriptor,
    pub per_language: BTreeMap<Language, LanguageResult>,
    /// Present iff at least one non-English language was scored.
    pub aggregate_non_english: Option<MetricTriple>,
}

impl EvalReport {
    pub fn new(experiment: ExperimentDescriptor, per_language: BTreeMap<Language, LanguageResult>) -> Self {
        let triples: BTreeMap<Language, MetricTriple> =
            per_language.iter().map(|(l, r)| (*l, r.metrics)).collect();
        let aggregate_non_english = aggregate_languages(&triples, &[Language::En]).ok();
        Self {
            experiment,
            per_language,
            aggregate_non_english,
        }
    }

    /// Merges reports of the same experiment cell (e.g. one per target
    /// language) into one report per cell. Later duplicates of a language
    /// replace earlier ones.
    pub fn combine(reports: &[EvalReport]) -> Vec<EvalReport> {
        let mut cells: BTreeMap<ExperimentDescriptor, BTreeMap<Language, LanguageResult>> = BTreeMap::new();
        for r in reports {
            let cell = cells.entry(r.experiment.clone()).or_default();
            for (lang, result) in &r.per_language {
                cell.insert(*lang, result.clone());
            }
        }
        cells
            .into_iter()
            .map(|(experiment, per_language)| EvalReport::new(experiment, per_language))
            .collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, json + "\n")
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// One row of the results table, values in percent (one decimal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub language: String,
    pub model: String,
    pub using_english: bool,
    pub data_augmentation: bool,
    pub rec_avg: f64,
    pub f1_macro: f64,
    pub f1_pn: f64,
}

fn mark(flag: bool) -> &'static str {
    if flag {
        "✓"
    } else {
        "✗"
    }
}

fn language_order(lang: Language) -> (bool, &'static str) {
    (lang != Language::En, lang.code())
}

/// Table rows grouped by language (English first, then by code), one row per
/// experiment cell, followed by an aggregate row per cell that covers at
/// least two non-English languages.
pub fn table_rows(reports: &[EvalReport]) -> Vec<TableRow> {
    let cells = EvalReport::combine(reports);
    let mut languages: Vec<Language> = cells
        .iter()
        .flat_map(|c| c.per_language.keys().copied())
        .collect();
    languages.sort_by_key(|&l| language_order(l));
    languages.dedup();

    let mut ordered: Vec<&EvalReport> = cells.iter().collect();
    ordered.sort_by(|a, b| a.experiment.grid_order().cmp(&b.experiment.grid_order()));

    let row = |language: String, exp: &ExperimentDescriptor, t: &MetricTriple| {
        let [rec_avg, f1_macro, f1_pn] = t.percent();
        TableRow {
            language,
            model: if exp.is_extra() {
                format!("{} (extra)", exp.model)
            } else {
                exp.model.clone()
            },
            using_english: exp.using_english,
            data_augmentation: exp.data_augmentation,
            rec_avg,
            f1_macro,
            f1_pn,
        }
    };

    let mut rows = Vec::new();
    for lang in languages {
        for cell in &ordered {
            if let Some(result) = cell.per_language.get(&lang) {
                rows.push(row(lang.english_name().to_string(), &cell.experiment, &result.metrics));
            }
        }
    }
    for cell in &ordered {
        let non_english = cell.per_language.keys().filter(|&&l| l != Language::En).count();
        if non_english >= 2 {
            if let Some(agg) = &cell.aggregate_non_english {
                rows.push(row(AGGREGATE_LABEL.to_string(), &cell.experiment, agg));
            }
        }
    }
    rows
}

/// Plain-text (Markdown) results table.
pub fn render_table(reports: &[EvalReport]) -> String {
    let rows = table_rows(reports);
    let mut out = String::new();
    out.push_str("| Language | Model | Using English | D-A | Rec_avg | F1_mac | F1_PN |\n");
    out.push_str("|---|---|:-:|:-:|--:|--:|--:|\n");
    for r in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.1} | {:.1} | {:.1} |",
            r.language,
            r.model,
            mark(r.using_english),
            mark(r.data_augmentation),
            r.rec_avg,
            r.f1_macro,
            r.f1_pn
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRow {
    pub id: String,
    pub gold: SentimentLabel,
    pub pred: SentimentLabel,
}

/// Writes `id gold pred` TSV with a header.
pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "id\tgold\tpred")?;
    for r in rows {
        writeln!(out, "{}\t{}\t{}", escape_field(&r.id), r.gold, r.pred)?;
    }
    out.flush()
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, MetricsError> {
    let err = |detail: String| MetricsError::Predictions {
        path: path.display().to_string(),
        detail,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let mut lines = text.lines();
    if lines.next() != Some("id\tgold\tpred") {
        return Err(err("missing `id gold pred` header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("line {}: expected 3 fields", i + 2)));
            }
            let parse = |s: &str| s.parse::<SentimentLabel>().map_err(|e| err(format!("line {}: {e}", i + 2)));
            Ok(PredictionRow {
                id: unescape_field(fields[0]),
                gold: parse(fields[1])?,
                pred: parse(fields[2])?,
            })
        })
        .collect()
}

/// Confusion matrix of a predictions file.
pub fn confusion_from_predictions(rows: &[PredictionRow]) -> Result<ConfusionMatrix, MetricsError> {
    let gold: Vec<SentimentLabel> = rows.iter().map(|r| r.gold).collect();
    let pred: Vec<SentimentLabel> = rows.iter().map(|r| r.pred).collect();
    confusion(&gold, &pred)
}
