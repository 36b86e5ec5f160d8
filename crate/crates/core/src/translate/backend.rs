use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::Language;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("translation service answered {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("{0}")]
    Other(String),
}

/// Text translation between two of the five languages.
///
/// Implementations must be deterministic for fixed inputs (the cache relies
/// on it) and must return the input unchanged when `source == target`.
pub trait TranslationBackend: Send + Sync {
    fn name(&self) -> String;

    fn translate(&self, text: &str, source: Language, target: Language)
        -> Result<String, BackendError>;
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for &B {
    fn name(&self) -> String {
        (**self).name()
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        (**self).translate(text, source, target)
    }
}

impl<B: TranslationBackend + ?Sized> TranslationBackend for Box<B> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        (**self).translate(text, source, target)
    }
}

/// Prefixes `[<target>] ` to the text. For plumbing tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct TaggingBackend;

impl TranslationBackend for TaggingBackend {
    fn name(&self) -> String {
        "tagging".to_string()
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        if source == target {
            return Ok(text.to_string());
        }
        Ok(format!("[{target}] {text}"))
    }
}

/// Word-by-word translation through a multilingual lexicon.
///
/// The lexicon file is a TSV whose header names language codes (any subset of
/// at least two of the five, in any order); each following row lists one
/// concept in those languages. Lookups are case-insensitive, surrounding
/// punctuation is kept, and unknown words pass through unchanged.
#[derive(Debug, Clone, Default)]
pub struct DictionaryBackend {
    tables: HashMap<(Language, Language), HashMap<String, String>>,
    entries: usize,
}

impl DictionaryBackend {
    pub fn from_rows(languages: &[Language], rows: &[Vec<String>]) -> Self {
        let mut tables: HashMap<(Language, Language), HashMap<String, String>> = HashMap::new();
        for row in rows {
            for (i, &from) in languages.iter().enumerate() {
                for (j, &to) in languages.iter().enumerate() {
                    if i == j || from == to {
                        continue;
                    }
                    let (Some(src), Some(dst)) = (row.get(i), row.get(j)) else {
                        continue;
                    };
                    if src.is_empty() || dst.is_empty() {
                        continue;
                    }
                    tables
                        .entry((from, to))
                        .or_default()
                        .entry(src.to_lowercase())
                        .or_insert_with(|| dst.clone());
                }
            }
        }
        Self {
            tables,
            entries: rows.len(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = fs::read_to_string(path)
            .map_err(|e| BackendError::Other(format!("lexicon {}: {e}", path.display())))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| BackendError::Other(format!("lexicon {} is empty", path.display())))?;
        let languages = header
            .split('\t')
            .map(|c| c.trim().parse::<Language>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| BackendError::Other(format!("lexicon {} header: {e}", path.display())))?;
        let rows: Vec<Vec<String>> = lines
            .map(|l| l.split('\t').map(|w| w.trim().to_string()).collect())
            .collect();
        Ok(Self::from_rows(&languages, &rows))
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }
}

impl TranslationBackend for DictionaryBackend {
    fn name(&self) -> String {
        format!("dictionary({} entries)", self.entries)
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        if source == target {
            return Ok(text.to_string());
        }
        let Some(table) = self.tables.get(&(source, target)) else {
            return Ok(text.to_string());
        };
        let words: Vec<String> = text
            .split_whitespace()
            .map(|token| {
                let core = token.trim_matches(|c: char| !c.is_alphanumeric());
                if core.is_empty() {
                    return token.to_string();
                }
                match table.get(&core.to_lowercase()) {
                    Some(translated) => token.replacen(core, translated, 1),
                    None => token.to_string(),
                }
            })
            .collect();
        Ok(words.join(" "))
    }
}
