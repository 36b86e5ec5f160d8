//! Translation-based data augmentation.
//!
//! A [`TranslationBackend`] turns text from one language into another; the
//! [`TranslationCache`] makes every translation a one-time cost and keeps
//! augmentation replayable. [`augment_corpus`] expands the training split so
//! each original example appears in every planned language.

mod augment;
mod backend;
mod cache;
mod http;

pub use augment::{
    augment_corpus, cache_lookup_or_translate, AugmentOptions, AugmentationPlan, RetryPolicy,
};
pub use backend::{BackendError, DictionaryBackend, TaggingBackend, TranslationBackend};
pub use cache::{CacheError, CacheKey, CacheStats, TranslationCache};
pub use http::{HttpBackend, DEFAULT_TIMEOUT, ENDPOINT_ENV, TOKEN_ENV};

use crate::corpus::{CorpusError, Language};
use crate::ErrorCategory;

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("cannot translate from {0} into itself")]
    SameLanguage(Language),
    #[error("invalid augmentation plan: {0}")]
    InvalidPlan(#[source] CorpusError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("backend returned an empty translation ({from} -> {to})")]
    EmptyTranslation { from: Language, to: Language },
    #[error("translation failed after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<TranslateError>,
    },
    #[error("augmentation aborted with {completed} pairs translated and {pending} pending: {cause}")]
    Aborted {
        completed: usize,
        pending: usize,
        cause: Box<TranslateError>,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Corpus(CorpusError),
}

impl TranslateError {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Self::SameLanguage(_) | Self::InvalidPlan(_) => ErrorCategory::Config,
            Self::Corpus(e) => e.category(),
            _ => ErrorCategory::Io,
        }
    }
}
