//! Generated five-language polarity corpora for desk-scale runs.
//!
//! Each language gets its own pseudo-vocabulary for a shared set of
//! concepts: class keywords and label-free filler words. The concept table
//! doubles as a translation lexicon, so word-by-word dictionary translation
//! maps an example exactly onto its counterpart in another language.
//!
//! Non-English training sets only use part of the keyword vocabulary while
//! English training, dev and test sets use all of it. A model trained on the
//! target language alone therefore meets unseen keywords at test time, and
//! translated English data fills the gap.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{EncoderSpec, TinyHashConfig, TrainConfig};
use crate::corpus::{write_canonical, Corpus, CorpusError, LabeledExample, Language, Origin, SentimentLabel, Split};
use crate::pipeline::{ExperimentConfig, SourceConfig, TranslationConfig};
use crate::translate::DictionaryBackend;

pub const LEXICON_FILE: &str = "lexicon.tsv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub keywords_per_class: usize,
    pub fillers: usize,
    pub english_train: usize,
    pub target_train: usize,
    pub dev: usize,
    pub test: usize,
    /// Share of each class's keywords that non-English training sets use.
    pub target_keyword_share: f64,
    pub keywords_per_example: usize,
    pub max_fillers_per_example: usize,
    /// Relative class frequencies (negative, neutral, positive).
    pub class_mix: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            keywords_per_class: 150,
            fillers: 80,
            english_train: 2000,
            target_train: 300,
            dev: 100,
            test: 100,
            target_keyword_share: 0.3,
            keywords_per_example: 2,
            max_fillers_per_example: 4,
            class_mix: [0.3, 0.3, 0.4],
        }
    }
}

/// Word endings that give each language a recognisable surface form.
fn suffixes(language: Language) -> &'static [&'static str] {
    match language {
        Language::En => &["ly", "ness", "er", "ing"],
        Language::Fr => &["eau", "ique", "oir", "ette"],
        Language::De => &["ung", "heit", "lich", "en"],
        Language::Es => &["ado", "ción", "ero", "ita"],
        Language::It => &["etto", "zione", "ino", "are"],
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "pl", "st"];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ie"];

fn pseudo_word(rng: &mut ChaCha8Rng, language: Language) -> String {
    let syllables = rng.gen_range(2..=3);
    let mut word = String::new();
    for _ in 0..syllables {
        word.push_str(ONSETS.choose(rng).unwrap());
        word.push_str(NUCLEI.choose(rng).unwrap());
    }
    word.push_str(suffixes(language).choose(rng).unwrap());
    word
}

#[derive(Debug, Clone)]
struct Concept {
    words: [String; 5],
}

impl Concept {
    fn word(&self, language: Language) -> &str {
        let i = Language::ALL.iter().position(|l| *l == language).unwrap();
        &self.words[i]
    }
}

/// Generated corpora and the lexicon that links them.
#[derive(Debug, Clone)]
pub struct SyntheticBundle {
    pub corpora: BTreeMap<(Language, Split), Corpus>,
    lexicon: Vec<Vec<String>>,
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken: HashSet<String> = HashSet::new();
    let mut concept = |rng: &mut ChaCha8Rng| {
        let words = Language::ALL.map(|language| loop {
            let w = pseudo_word(rng, language);
            if taken.insert(w.clone()) {
                break w;
            }
        });
        Concept { words }
    };
    let keywords: Vec<Vec<Concept>> = (0..3)
        .map(|_| (0..spec.keywords_per_class).map(|_| concept(&mut rng)).collect())
        .collect();
    let fillers: Vec<Concept> = (0..spec.fillers).map(|_| concept(&mut rng)).collect();

    let visible = ((spec.keywords_per_class as f64 * spec.target_keyword_share).ceil() as usize)
        .clamp(spec.keywords_per_example.max(1), spec.keywords_per_class);
    let mut corpora = BTreeMap::new();
    for language in Language::ALL {
        // each language sees its own random slice of the keywords in training
        let train_vocab: Vec<Vec<&Concept>> = keywords
            .iter()
            .map(|class| {
                let mut pool: Vec<&Concept> = class.iter().collect();
                if language != Language::En {
                    pool.shuffle(&mut rng);
                    pool.truncate(visible);
                }
                pool
            })
            .collect();
        let full_vocab: Vec<Vec<&Concept>> = keywords.iter().map(|c| c.iter().collect()).collect();
        for split in Split::ALL {
            let (size, vocab) = match split {
                Split::Train if language == Language::En => (spec.english_train, &full_vocab),
                Split::Train => (spec.target_train, &train_vocab),
                Split::Dev => (spec.dev, &full_vocab),
                Split::Test => (spec.test, &full_vocab),
            };
            let examples = (0..size)
                .map(|i| {
                    let label = pick_label(&mut rng, &spec.class_mix);
                    let text = sentence(&mut rng, spec, &vocab[label.index()], &fillers, language);
                    LabeledExample {
                        id: format!("{language}-{split}-{i:05}"),
                        text,
                        language,
                        label,
                        origin: Origin::Original,
                        dataset: format!("synth-{language}"),
                        split,
                    }
                })
                .collect();
            corpora.insert((language, split), Corpus::new(examples).expect("generated ids are unique"));
        }
    }

    let mut lexicon = vec![Language::ALL.iter().map(|l| l.code().to_string()).collect::<Vec<_>>()];
    for c in keywords.iter().flatten().chain(&fillers) {
        lexicon.push(c.words.to_vec());
    }
    SyntheticBundle { corpora, lexicon }
}

fn pick_label(rng: &mut ChaCha8Rng, mix: &[f64; 3]) -> SentimentLabel {
    let total: f64 = mix.iter().sum();
    let mut x = rng.gen_range(0.0..total);
    for label in SentimentLabel::ALL {
        x -= mix[label.index()];
        if x < 0.0 {
            return label;
        }
    }
    SentimentLabel::Positive
}

fn sentence(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    keywords: &[&Concept],
    fillers: &[Concept],
    language: Language,
) -> String {
    let mut words: Vec<&str> = keywords
        .choose_multiple(rng, spec.keywords_per_example)
        .map(|c| c.word(language))
        .collect();
    let n_fillers = rng.gen_range(1..=spec.max_fillers_per_example.max(1));
    words.extend((0..n_fillers).map(|_| fillers.choose(rng).unwrap().word(language)));
    words.shuffle(rng);
    words.join(" ")
}

impl SyntheticBundle {
    pub fn corpus(&self, language: Language, split: Split) -> &Corpus {
        &self.corpora[&(language, split)]
    }

    pub fn lexicon_rows(&self) -> &[Vec<String>] {
        &self.lexicon
    }

    pub fn dictionary(&self) -> DictionaryBackend {
        DictionaryBackend::from_rows(&Language::ALL, &self.lexicon[1..])
    }

    /// Writes `<lang>-<split>.tsv` files and the lexicon into `dir` and
    /// returns matching source declarations.
    pub fn write(&self, dir: &Path) -> Result<Vec<SourceConfig>, CorpusError> {
        fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        let mut sources = Vec::new();
        for ((language, split), corpus) in &self.corpora {
            let path = dir.join(format!("{language}-{split}.tsv"));
            write_canonical(corpus, &path)?;
            sources.push(SourceConfig::canonical(&format!("synth-{language}"), *language, *split, path));
        }
        let lexicon: String = self.lexicon.iter().map(|row| row.join("\t") + "\n").collect();
        let path = dir.join(LEXICON_FILE);
        fs::write(&path, lexicon).map_err(|e| CorpusError::io(&path, e))?;
        Ok(sources)
    }
}

/// Settings for training the tiny encoder from scratch on generated data.
/// The encoder has no pre-trained weights, so it needs much larger steps
/// than a pre-trained transformer would.
pub fn desk_config(target: Language, sources: Vec<SourceConfig>, lexicon: PathBuf, run_root: PathBuf) -> ExperimentConfig {
    let stage = |lr: f64| TrainConfig {
        learning_rate: lr,
        max_epochs: 20,
        ..TrainConfig::default()
    };
    ExperimentConfig {
        run_root: run_root.clone(),
        encoder: EncoderSpec::TinyHash(TinyHashConfig {
            dim: 16384,
            hidden: 32,
            ..TinyHashConfig::default()
        }),
        corpora: sources,
        translation: Some(TranslationConfig {
            lexicon: Some(lexicon),
            cache: Some(run_root.join("translations.cache")),
            ..TranslationConfig::default()
        }),
        pretrain: stage(5e-3),
        finetune: stage(2e-3),
        ..ExperimentConfig::new(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::TranslationBackend;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            keywords_per_class: 20,
            fillers: 10,
            english_train: 50,
            target_train: 30,
            dev: 10,
            test: 10,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn sizes_and_determinism() {
        let a = generate(&small());
        assert_eq!(a.corpora.len(), 15);
        assert_eq!(a.corpus(Language::En, Split::Train).len(), 50);
        assert_eq!(a.corpus(Language::It, Split::Train).len(), 30);
        assert_eq!(a.corpus(Language::Fr, Split::Test).len(), 10);
        let b = generate(&small());
        for (key, corpus) in &a.corpora {
            assert_eq!(corpus.content_hash(), b.corpora[key].content_hash());
        }
        assert_eq!(a.lexicon_rows().len(), 1 + 3 * 20 + 10);
    }

    #[test]
    fn dictionary_maps_english_onto_target_vocabulary() {
        let bundle = generate(&small());
        let dict = bundle.dictionary();
        let fr_words: HashSet<&str> = bundle.lexicon_rows()[1..].iter().map(|r| r[1].as_str()).collect();
        for ex in bundle.corpus(Language::En, Split::Train) {
            let fr = dict.translate(&ex.text, Language::En, Language::Fr).unwrap();
            assert!(fr.split(' ').all(|w| fr_words.contains(w)), "{fr}");
        }
    }

    #[test]
    fn target_training_uses_a_keyword_subset() {
        let spec = SyntheticSpec {
            target_train: 400,
            ..small()
        };
        let bundle = generate(&spec);
        let words = |c: &Corpus| -> HashSet<String> { c.iter().flat_map(|e| e.text.split(' ').map(str::to_string).collect::<Vec<_>>()).collect() };
        let train = words(bundle.corpus(Language::De, Split::Train));
        let visible_keywords = (20.0 * spec.target_keyword_share).ceil() as usize * 3;
        assert!(train.len() <= visible_keywords + spec.fillers);
    }
}
