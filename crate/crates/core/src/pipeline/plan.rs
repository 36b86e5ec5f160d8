use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::PipelineError;
use crate::classifier::TrainConfig;
use crate::corpus::{Language, Manifest, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    /// Supervised training on English data before the target language.
    Pretrain,
    /// Training on the target language.
    Finetune,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::Pretrain => "pretrain",
            StageKind::Finetune => "finetune",
        }
    }
}

impl std::fmt::Display for StageKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitFrom {
    Fresh,
    PreviousStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub kind: StageKind,
    /// Every train source of this language, merged.
    pub train_language: Language,
    pub augmented: bool,
    pub dev_language: Language,
    pub train: TrainConfig,
    pub init: InitFrom,
    /// Training examples after augmentation, from manifest counts.
    pub expected_train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub target: Language,
    pub stages: Vec<Stage>,
}

fn expanded(config: &ExperimentConfig, language: Language, count: usize, augmented: bool) -> usize {
    if !augmented {
        return count;
    }
    let targets = config
        .translation
        .as_ref()
        .map(|t| t.targets.iter().filter(|&&l| l != language).count())
        .unwrap_or(0);
    count * (1 + targets)
}

/// Orders the training stages of one experiment.
///
/// English pre-training comes first when enabled, then the target language,
/// initialized from it. With English as the target there is a single stage
/// on English data at the pre-training rate.
pub fn build_stage_plan(config: &ExperimentConfig, manifest: &Manifest) -> Result<StagePlan, PipelineError> {
    if config.data_augmentation && config.translation.is_none() {
        return Err(PipelineError::NoBackend);
    }
    let require = |language: Language, split: Split| {
        let n = manifest.count(Some(language), Some(split));
        if n == 0 {
            Err(PipelineError::MissingCorpus { language, split })
        } else {
            Ok(n)
        }
    };
    let with_seed = |train: &TrainConfig| TrainConfig {
        seed: config.seed,
        ..train.clone()
    };
    let aug = config.data_augmentation;

    let mut stages = Vec::new();
    if config.target == Language::En {
        let n = require(Language::En, Split::Train)?;
        require(Language::En, Split::Dev)?;
        stages.push(Stage {
            kind: StageKind::Pretrain,
            train_language: Language::En,
            augmented: aug,
            dev_language: Language::En,
            train: with_seed(&config.pretrain),
            init: InitFrom::Fresh,
            expected_train_size: expanded(config, Language::En, n, aug),
        });
    } else {
        if config.using_english {
            let n = require(Language::En, Split::Train)?;
            require(Language::En, Split::Dev)?;
            stages.push(Stage {
                kind: StageKind::Pretrain,
                train_language: Language::En,
                augmented: aug,
                dev_language: Language::En,
                train: with_seed(&config.pretrain),
                init: InitFrom::Fresh,
                expected_train_size: expanded(config, Language::En, n, aug),
            });
        }
        let n = require(config.target, Split::Train)?;
        require(config.target, Split::Dev)?;
        stages.push(Stage {
            kind: StageKind::Finetune,
            train_language: config.target,
            augmented: aug,
            dev_language: config.target,
            train: with_seed(&config.finetune),
            init: if config.using_english {
                InitFrom::PreviousStage
            } else {
                InitFrom::Fresh
            },
            expected_train_size: expanded(config, config.target, n, aug),
        });
    }
    Ok(StagePlan {
        target: config.target,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::TranslationConfig;

    fn manifest() -> Manifest {
        let mut m = Manifest::default();
        for (dataset, lang, train) in [("semeval", Language::En, 1000), ("tass", Language::Es, 300), ("sb10k", Language::De, 400)] {
            m.add(dataset, lang, Split::Train, train);
            m.add(dataset, lang, Split::Dev, 50);
        }
        m
    }

    fn config(target: Language, using_english: bool, aug: bool) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(target);
        c.using_english = using_english;
        c.data_augmentation = aug;
        c.translation = Some(TranslationConfig {
            lexicon: Some("lex.tsv".into()),
            ..TranslationConfig::default()
        });
        c
    }

    #[test]
    fn pretrained_and_augmented_has_two_expanded_stages() {
        let plan = build_stage_plan(&config(Language::Es, true, true), &manifest()).unwrap();
        assert_eq!(plan.stages.len(), 2);
        assert_eq!(plan.stages[0].kind, StageKind::Pretrain);
        assert_eq!(plan.stages[0].expected_train_size, 5 * 1000);
        assert_eq!(plan.stages[0].train.learning_rate, 2e-6);
        assert_eq!(plan.stages[1].expected_train_size, 5 * 300);
        assert_eq!(plan.stages[1].train.learning_rate, 5e-7);
        assert_eq!(plan.stages[1].init, InitFrom::PreviousStage);
    }

    #[test]
    fn vanilla_is_a_single_plain_stage() {
        let plan = build_stage_plan(&config(Language::De, false, false), &manifest()).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let s = &plan.stages[0];
        assert_eq!((s.kind, s.train_language, s.augmented), (StageKind::Finetune, Language::De, false));
        assert_eq!(s.expected_train_size, 400);
        assert_eq!(s.init, InitFrom::Fresh);
    }

    #[test]
    fn english_target_is_one_stage_on_english_dev() {
        let plan = build_stage_plan(&config(Language::En, true, false), &manifest()).unwrap();
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.stages[0].dev_language, Language::En);
    }

    #[test]
    fn missing_corpora_are_reported() {
        let err = build_stage_plan(&config(Language::Fr, false, false), &manifest()).unwrap_err();
        assert!(matches!(err, PipelineError::MissingCorpus { language: Language::Fr, split: Split::Train }));
        let mut c = config(Language::De, false, true);
        c.translation = None;
        assert!(matches!(build_stage_plan(&c, &manifest()), Err(PipelineError::NoBackend)));
    }

    #[test]
    fn plans_are_deterministic() {
        let c = config(Language::Es, true, true);
        assert_eq!(build_stage_plan(&c, &manifest()).unwrap(), build_stage_plan(&c, &manifest()).unwrap());
    }
}
