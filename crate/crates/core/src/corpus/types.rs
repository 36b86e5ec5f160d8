use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Three-way tweet polarity with a fixed integer encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Negative,
    Neutral,
    Positive,
}

impl SentimentLabel {
    /// Canonical order: negative=0, neutral=1, positive=2.
    pub const ALL: [SentimentLabel; 3] = [Self::Negative, Self::Neutral, Self::Positive];

    pub fn index(self) -> usize {
        match self {
            Self::Negative => 0,
            Self::Neutral => 1,
            Self::Positive => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Negative => "negative",
            Self::Neutral => "neutral",
            Self::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentLabel {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Self::Negative),
            "neutral" => Ok(Self::Neutral),
            "positive" => Ok(Self::Positive),
            other => Err(CorpusError::UnknownLabel(other.to_string())),
        }
    }
}

/// One of the five studied languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fr,
    De,
    Es,
    It,
}

impl Language {
    /// Fixed emission order used wherever languages are enumerated.
    pub const ALL: [Language; 5] = [Self::En, Self::Fr, Self::De, Self::Es, Self::It];

    pub fn code(self) -> &'static str {
        match self {
            Self::En => "en",
            Self::Fr => "fr",
            Self::De => "de",
            Self::Es => "es",
            Self::It => "it",
        }
    }

    pub fn english_name(self) -> &'static str {
        match self {
            Self::En => "English",
            Self::Fr => "French",
            Self::De => "German",
            Self::Es => "Spanish",
            Self::It => "Italian",
        }
    }

    /// Parses a comma-separated list such as `fr,de,es,it`.
    pub fn parse_list(s: &str) -> Result<Vec<Language>, CorpusError> {
        s.split(',')
            .map(str::trim)
            .filter(|part| !part.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Self::En),
            "fr" => Ok(Self::Fr),
            "de" => Ok(Self::De),
            "es" => Ok(Self::Es),
            "it" => Ok(Self::It),
            other => Err(CorpusError::UnsupportedLanguage(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Self::Train, Self::Dev, Self::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

/// Whether an example is an original tweet or a machine translation of one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Origin {
    Original,
    Translated(Language),
}

impl Origin {
    pub fn is_original(self) -> bool {
        matches!(self, Self::Original)
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Original => f.write_str("original"),
            Self::Translated(source) => write!(f, "translated:{source}"),
        }
    }
}

impl FromStr for Origin {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "original" {
            return Ok(Self::Original);
        }
        match s.strip_prefix("translated:") {
            Some(code) => Ok(Self::Translated(code.parse()?)),
            None => Err(CorpusError::UnknownOrigin(s.to_string())),
        }
    }
}

impl TryFrom<String> for Origin {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Origin> for String {
    fn from(value: Origin) -> Self {
        value.to_string()
    }
}

/// A single labeled tweet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    /// Normalized text, never empty.
    pub text: String,
    pub language: Language,
    pub label: SentimentLabel,
    pub origin: Origin,
    pub dataset: String,
    pub split: Split,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_encoding_is_stable() {
        for (i, label) in SentimentLabel::ALL.iter().enumerate() {
            assert_eq!(label.index(), i);
            assert_eq!(SentimentLabel::from_index(i), Some(*label));
            assert_eq!(label.as_str().parse::<SentimentLabel>().unwrap(), *label);
        }
        assert_eq!(SentimentLabel::from_index(3), None);
    }

    #[test]
    fn rejects_languages_outside_the_five() {
        assert!("pt".parse::<Language>().is_err());
        assert!("EN".parse::<Language>().is_err());
        assert_eq!(
            Language::parse_list("fr, de,es,it").unwrap(),
            vec![Language::Fr, Language::De, Language::Es, Language::It]
        );
    }

    #[test]
    fn origin_text_form() {
        let o = Origin::Translated(Language::De);
        assert_eq!(o.to_string(), "translated:de");
        assert_eq!("translated:de".parse::<Origin>().unwrap(), o);
        assert_eq!("original".parse::<Origin>().unwrap(), Origin::Original);
        assert!("translated:xx".parse::<Origin>().is_err());
        assert!("copy".parse::<Origin>().is_err());
    }
}
