use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, info, warn};

use super::backend::TranslationBackend;
use super::cache::{CacheKey, TranslationCache};
use super::TranslateError;
use crate::corpus::{clean_text, Corpus, CorpusError, Language, LabeledExample, Origin, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(retries: u32) -> Self {
        Self {
            retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Returns the cached translation if present; otherwise calls the backend
/// (retrying with exponential backoff), normalizes the output, stores it and
/// returns it.
pub fn cache_lookup_or_translate(
    text: &str,
    source: Language,
    target: Language,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    retry: &RetryPolicy,
) -> Result<String, TranslateError> {
    if source == target {
        return Err(TranslateError::SameLanguage(source));
    }
    if let Some(hit) = cache.get(text, source, target) {
        return Ok(hit);
    }
    let translated = translate_with_retry(text, source, target, backend, retry)?;
    cache.put(text, source, target, &translated)?;
    Ok(translated)
}

fn translate_with_retry(
    text: &str,
    source: Language,
    target: Language,
    backend: &dyn TranslationBackend,
    retry: &RetryPolicy,
) -> Result<String, TranslateError> {
    let mut attempt = 0;
    loop {
        let outcome = backend
            .translate(text, source, target)
            .map_err(TranslateError::from)
            .and_then(|raw| {
                let cleaned = clean_text(&raw);
                if cleaned.is_empty() {
                    Err(TranslateError::EmptyTranslation { from: source, to: target })
                } else {
                    Ok(cleaned)
                }
            });
        match outcome {
            Ok(t) => return Ok(t),
            Err(e) if attempt >= retry.retries => {
                return Err(TranslateError::Exhausted {
                    attempts: attempt + 1,
                    last: Box::new(e),
                })
            }
            Err(e) => {
                let delay = retry.delay(attempt);
                warn!("translation {source}->{target} failed ({e}), retrying in {delay:?}");
                thread::sleep(delay);
                attempt += 1;
            }
        }
    }
}

/// Which languages each training example is expanded into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentationPlan {
    targets: Vec<Language>,
    backend: String,
}

impl AugmentationPlan {
    /// Targets are deduplicated and kept in the fixed language order.
    pub fn new(targets: impl IntoIterator<Item = Language>, backend: impl Into<String>) -> Self {
        let wanted: Vec<Language> = targets.into_iter().collect();
        Self {
            targets: Language::ALL
                .into_iter()
                .filter(|l| wanted.contains(l))
                .collect(),
            backend: backend.into(),
        }
    }

    /// All five languages: every example ends up in five versions.
    pub fn all_languages(backend: impl Into<String>) -> Self {
        Self::new(Language::ALL, backend)
    }

    /// Parses a comma-separated target list; unknown codes are rejected.
    pub fn parse(targets: &str, backend: impl Into<String>) -> Result<Self, TranslateError> {
        let targets = Language::parse_list(targets).map_err(TranslateError::InvalidPlan)?;
        Ok(Self::new(targets, backend))
    }

    pub fn targets(&self) -> &[Language] {
        &self.targets
    }

    pub fn backend(&self) -> &str {
        &self.backend
    }

    /// Originals are always kept.
    pub fn include_original(&self) -> bool {
        true
    }

    /// Languages a `source` example is translated into.
    pub fn translation_targets(&self, source: Language) -> impl Iterator<Item = Language> + '_ {
        self.targets.iter().copied().filter(move |&t| t != source)
    }

    /// Output size for a corpus with the given per-language counts of
    /// augmentable examples.
    pub fn expanded_size(&self, source: Language, count: usize) -> usize {
        count * (1 + self.translation_targets(source).count())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentOptions {
    pub retry: RetryPolicy,
    /// Upper bound on concurrent backend requests.
    pub max_in_flight: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            retry: RetryPolicy::default(),
            max_in_flight: 8,
        }
    }
}

struct Job<'a> {
    text: &'a str,
    source: Language,
    target: Language,
}

/// Expands every original training example into one translated copy per
/// plan target (other than its own language).
///
/// Output order: each input example followed by its copies in the fixed
/// language order. Copies get id `<parent>#<target>`, the parent's label and
/// `origin = translated(<parent language>)`. Dev and test examples, and
/// examples that are already translations, pass through untouched.
pub fn augment_corpus(
    corpus: &Corpus,
    plan: &AugmentationPlan,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    options: &AugmentOptions,
) -> Result<Corpus, TranslateError> {
    // Distinct translation requests, in first-seen order.
    let mut jobs: Vec<Job<'_>> = Vec::new();
    let mut job_index: HashMap<CacheKey, usize> = HashMap::new();
    let mut pair_jobs: Vec<Vec<usize>> = Vec::with_capacity(corpus.len());
    for ex in corpus {
        let mut mine = Vec::new();
        if is_augmentable(ex) {
            for target in plan.translation_targets(ex.language) {
                let key = CacheKey::new(&ex.text, ex.language, target);
                let idx = *job_index.entry(key).or_insert_with(|| {
                    jobs.push(Job {
                        text: &ex.text,
                        source: ex.language,
                        target,
                    });
                    jobs.len() - 1
                });
                mine.push(idx);
            }
        }
        pair_jobs.push(mine);
    }
    let total_pairs: usize = pair_jobs.iter().map(Vec::len).sum();

    let mut results: Vec<Option<String>> = jobs
        .iter()
        .map(|j| cache.get(j.text, j.source, j.target))
        .collect();
    let missing: Vec<usize> = (0..jobs.len()).filter(|&i| results[i].is_none()).collect();
    info!(
        "augmenting {} examples: {} translation pairs, {} distinct, {} not cached",
        corpus.len(),
        total_pairs,
        jobs.len(),
        missing.len()
    );

    if !missing.is_empty() {
        let slots: Vec<Mutex<Option<String>>> = missing.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let first_error: Mutex<Option<TranslateError>> = Mutex::new(None);
        let workers = options.max_in_flight.max(1).min(missing.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if failed.load(Ordering::SeqCst) {
                        break;
                    }
                    let n = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&job_id) = missing.get(n) else {
                        break;
                    };
                    let job = &jobs[job_id];
                    match translate_with_retry(job.text, job.source, job.target, backend, &options.retry)
                        .and_then(|t| {
                            cache.put(job.text, job.source, job.target, &t)?;
                            Ok(t)
                        }) {
                        Ok(t) => *slots[n].lock().expect("slot") = Some(t),
                        Err(e) => {
                            failed.store(true, Ordering::SeqCst);
                            first_error.lock().expect("error slot").get_or_insert(e);
                            break;
                        }
                    }
                });
            }
        });
        for (n, slot) in slots.into_iter().enumerate() {
            results[missing[n]] = slot.into_inner().expect("slot");
        }
        if let Some(error) = first_error.into_inner().expect("error slot") {
            let completed = pair_jobs
                .iter()
                .flatten()
                .filter(|&&j| results[j].is_some())
                .count();
            return Err(TranslateError::Aborted {
                completed,
                pending: total_pairs - completed,
                cause: Box::new(error),
            });
        }
    }

    let mut out: Vec<LabeledExample> = Vec::with_capacity(corpus.len() + total_pairs);
    for (ex, mine) in corpus.iter().zip(&pair_jobs) {
        out.push(ex.clone());
        for &j in mine {
            let job = &jobs[j];
            let text = results[j].clone().expect("every job resolved");
            out.push(LabeledExample {
                id: format!("{}#{}", ex.id, job.target),
                text,
                language: job.target,
                label: ex.label,
                origin: Origin::Translated(ex.language),
                dataset: ex.dataset.clone(),
                split: ex.split,
            });
        }
    }
    debug!("augmented corpus has {} examples", out.len());
    Corpus::new(out).map_err(|e: CorpusError| TranslateError::Corpus(e))
}

fn is_augmentable(ex: &LabeledExample) -> bool {
    ex.split == Split::Train && ex.origin == Origin::Original
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::test_support::example;
    use crate::corpus::SentimentLabel::*;
    use crate::translate::backend::{BackendError, TaggingBackend};
    use std::sync::atomic::AtomicUsize;
    use Language::*;

    struct Echo {
        calls: AtomicUsize,
    }

    impl TranslationBackend for Echo {
        fn name(&self) -> String {
            "echo".into()
        }
        fn translate(&self, text: &str, _: Language, target: Language) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(format!("[{target}]{text}"))
        }
    }

    struct Flaky {
        failures_left: AtomicUsize,
        calls: AtomicUsize,
    }

    impl TranslationBackend for Flaky {
        fn name(&self) -> String {
            "flaky".into()
        }
        fn translate(&self, text: &str, _: Language, _: Language) -> Result<String, BackendError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(BackendError::Transport("connection reset".into()));
            }
            Ok(text.to_uppercase())
        }
    }

    fn echo() -> Echo {
        Echo {
            calls: AtomicUsize::new(0),
        }
    }

    #[test]
    fn lookup_cold_then_warm() {
        let backend = echo();
        let cache = TranslationCache::in_memory();
        let retry = RetryPolicy::immediate(3);
        let t = cache_lookup_or_translate("hello", En, Fr, &backend, &cache, &retry).unwrap();
        assert_eq!(t, "[fr]hello");
        assert_eq!(cache.peek(&CacheKey::new("hello", En, Fr)).as_deref(), Some("[fr]hello"));
        let again = cache_lookup_or_translate("hello", En, Fr, &backend, &cache, &retry).unwrap();
        assert_eq!(again, t);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn lookup_rejects_same_language() {
        let cache = TranslationCache::in_memory();
        let err = cache_lookup_or_translate("x", De, De, &echo(), &cache, &RetryPolicy::default());
        assert!(matches!(err, Err(TranslateError::SameLanguage(De))));
    }

    #[test]
    fn retries_then_succeeds_or_gives_up() {
        let cache = TranslationCache::in_memory();
        let flaky = Flaky {
            failures_left: AtomicUsize::new(2),
            calls: AtomicUsize::new(0),
        };
        let t = cache_lookup_or_translate("ciao", It, En, &flaky, &cache, &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(t, "CIAO");
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);

        let hopeless = Flaky {
            failures_left: AtomicUsize::new(100),
            calls: AtomicUsize::new(0),
        };
        let err = cache_lookup_or_translate("x", It, En, &hopeless, &cache, &RetryPolicy::immediate(3))
            .unwrap_err();
        assert!(matches!(err, TranslateError::Exhausted { attempts: 4, .. }));
        assert_eq!(hopeless.calls.load(Ordering::SeqCst), 4);
    }

    #[test]
    fn backoff_grows_and_saturates() {
        let p = RetryPolicy {
            retries: 10,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(1000),
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(400));
        assert_eq!(p.delay(5), Duration::from_millis(1000));
        assert_eq!(p.delay(40), Duration::from_millis(1000));
    }

    #[test]
    fn three_languages_to_fifteen_examples() {
        let corpus = Corpus::new(vec![
            example("a", "bonjour", Fr, Positive),
            example("b", "hallo", De, Neutral),
            example("c", "hello", En, Negative),
        ])
        .unwrap();
        let backend = echo();
        let cache = TranslationCache::in_memory();
        let plan = AugmentationPlan::all_languages("echo");
        let out = augment_corpus(&corpus, &plan, &backend, &cache, &AugmentOptions::default()).unwrap();
        assert_eq!(out.len(), 15);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 12);
        let ids: Vec<&str> = out.iter().take(5).map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "a#en", "a#de", "a#es", "a#it"]);
        assert_eq!(out.examples()[1].origin, Origin::Translated(Fr));
        assert_eq!(out.examples()[1].text, "[en]bonjour");
    }

    #[test]
    fn empty_corpus_needs_no_backend() {
        let backend = echo();
        let out = augment_corpus(
            &Corpus::empty(),
            &AugmentationPlan::all_languages("echo"),
            &backend,
            &TranslationCache::in_memory(),
            &AugmentOptions::default(),
        )
        .unwrap();
        assert!(out.is_empty());
        assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn dev_test_and_translated_examples_pass_through() {
        let mut dev = example("d", "dev text", En, Positive);
        dev.split = Split::Dev;
        let mut test = example("t", "test text", En, Positive);
        test.split = Split::Test;
        let mut already = example("x#fr", "[fr] x", Fr, Neutral);
        already.origin = Origin::Translated(En);
        let corpus = Corpus::new(vec![dev.clone(), test.clone(), already.clone()]).unwrap();
        let backend = echo();
        let out = augment_corpus(
            &corpus,
            &AugmentationPlan::all_languages("echo"),
            &backend,
            &TranslationCache::in_memory(),
            &AugmentOptions::default(),
        )
        .unwrap();
        assert_eq!(out, corpus);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn duplicate_texts_translate_once() {
        let corpus = Corpus::new(vec![
            example("a", "same", En, Positive),
            example("b", "same", En, Negative),
        ])
        .unwrap();
        let backend = echo();
        let out = augment_corpus(
            &corpus,
            &AugmentationPlan::new([Fr, De], "echo"),
            &backend,
            &TranslationCache::in_memory(),
            &AugmentOptions::default(),
        )
        .unwrap();
        assert_eq!(out.len(), 6);
        assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
        assert_eq!(out.examples()[4].label, Negative);
    }

    #[test]
    fn failure_reports_progress_and_keeps_cached_work() {
        struct FailOn(&'static str);
        impl TranslationBackend for FailOn {
            fn name(&self) -> String {
                "fail".into()
            }
            fn translate(&self, text: &str, _: Language, _: Language) -> Result<String, BackendError> {
                if text == self.0 {
                    Err(BackendError::Status {
                        status: 503,
                        body: "busy".into(),
                    })
                } else {
                    Ok(format!("t:{text}"))
                }
            }
        }
        let corpus = Corpus::new(vec![
            example("a", "fine", En, Positive),
            example("b", "broken", En, Negative),
        ])
        .unwrap();
        let cache = TranslationCache::in_memory();
        let options = AugmentOptions {
            retry: RetryPolicy::immediate(1),
            max_in_flight: 1,
        };
        let err = augment_corpus(
            &corpus,
            &AugmentationPlan::new([Fr], "fail"),
            &FailOn("broken"),
            &cache,
            &options,
        )
        .unwrap_err();
        match err {
            TranslateError::Aborted {
                completed, pending, ..
            } => assert_eq!((completed, pending), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn plan_orders_and_validates_targets() {
        let plan = AugmentationPlan::new([It, Fr, Fr, De], "tagging");
        assert_eq!(plan.targets(), &[Fr, De, It]);
        assert!(plan.include_original());
        assert_eq!(plan.expanded_size(En, 10), 40);
        assert_eq!(plan.expanded_size(Fr, 10), 30);
        assert!(AugmentationPlan::parse("fr,xx", "tagging").is_err());
        let _ = TaggingBackend;
    }
}
