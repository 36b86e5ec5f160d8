use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{BackendKind, ExperimentConfig, TranslationConfig};
use super::plan::{build_stage_plan, InitFrom, StageKind, StagePlan};
use super::store::{DataAccess, DataStore, Phase};
use super::PipelineError;
use crate::classifier::{self, json_hash, load_checkpoint, save_checkpoint, ClassifierModel, META_FILE};
use crate::corpus::{write_canonical, Corpus, Language, SentimentLabel, Split};
use crate::metrics::{
    confusion_from_predictions, read_predictions, render_table, write_predictions, EvalReport, ExperimentDescriptor,
    LanguageResult, PredictionRow,
};
use crate::translate::{
    augment_corpus, AugmentOptions, AugmentationPlan, DictionaryBackend, HttpBackend, RetryPolicy, TaggingBackend,
    TranslationBackend, TranslationCache,
};

pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "table.md";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    write_file(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

/// A translation backend with its cache and augmentation settings.
pub struct Translator {
    backend: Box<dyn TranslationBackend>,
    cache: TranslationCache,
    plan: AugmentationPlan,
    options: AugmentOptions,
}

impl Translator {
    pub fn new(
        backend: Box<dyn TranslationBackend>,
        cache: TranslationCache,
        targets: &[Language],
        options: AugmentOptions,
    ) -> Self {
        let plan = AugmentationPlan::new(targets.iter().copied(), backend.name());
        Self {
            backend,
            cache,
            plan,
            options,
        }
    }

    pub fn from_config(config: &TranslationConfig, run_root: &Path) -> Result<Self, PipelineError> {
        let backend: Box<dyn TranslationBackend> = match config.backend {
            BackendKind::Tagging => Box::new(TaggingBackend),
            BackendKind::Dictionary => {
                let path = config.lexicon.as_ref().ok_or(PipelineError::NoBackend)?;
                Box::new(DictionaryBackend::load(path).map_err(|e| PipelineError::Translate(e.into()))?)
            }
            BackendKind::Http => {
                let timeout = Duration::from_secs(config.timeout_secs);
                let backend = match &config.endpoint {
                    Some(endpoint) => HttpBackend::new(endpoint.clone(), std::env::var(crate::translate::TOKEN_ENV).ok(), timeout),
                    None => HttpBackend::from_env(timeout),
                };
                Box::new(backend.map_err(|e| PipelineError::Translate(e.into()))?)
            }
        };
        let cache_path = config
            .cache
            .clone()
            .unwrap_or_else(|| run_root.join("translations.cache"));
        let cache = TranslationCache::open(&cache_path).map_err(|e| PipelineError::Translate(e.into()))?;
        let options = AugmentOptions {
            retry: RetryPolicy {
                retries: config.retries,
                ..RetryPolicy::default()
            },
            max_in_flight: config.max_in_flight,
        };
        Ok(Self::new(backend, cache, &config.targets, options))
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    pub fn augment(&self, corpus: &Corpus) -> Result<Corpus, PipelineError> {
        Ok(augment_corpus(
            corpus,
            &self.plan,
            self.backend.as_ref(),
            &self.cache,
            &self.options,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub kind: StageKind,
    pub checkpoint: PathBuf,
    pub stage_hash: String,
    pub train_size: usize,
    /// Loaded from an earlier run instead of trained.
    pub reused: bool,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub run_dir: PathBuf,
    pub plan: StagePlan,
    pub stages: Vec<StageOutcome>,
    /// Epochs trained in this invocation (0 when everything was reused).
    pub epochs_run: usize,
    pub accesses: Vec<DataAccess>,
}

pub fn descriptor(config: &ExperimentConfig) -> ExperimentDescriptor {
    ExperimentDescriptor {
        model: config.model.clone(),
        using_english: config.using_english,
        data_augmentation: config.data_augmentation,
    }
}

/// Directory holding one experiment's artifacts.
pub fn run_dir(config: &ExperimentConfig) -> PathBuf {
    config.run_root.join(format!("run-{}", &config.hash()[..16]))
}

/// Trains every planned stage, reusing finished checkpoints, then scores the
/// final model on the target test split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, PipelineError> {
    config.validate()?;
    let dir = run_dir(config);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_file(&dir.join("config.toml"), &config.to_toml())?;

    let store = DataStore::new(config.corpora.clone());
    let manifest = store.manifest()?;
    let plan = build_stage_plan(config, &manifest)?;
    write_json(&dir.join("plan.json"), &plan)?;
    info!(
        "experiment {} (target {}, english {}, augmentation {}) in {}",
        &config.hash()[..16],
        config.target,
        config.using_english,
        config.data_augmentation,
        dir.display()
    );

    store.enter(Phase::Training);
    let translator = match (&config.translation, plan.stages.iter().any(|s| s.augmented)) {
        (Some(t), true) => Some(Translator::from_config(t, &config.run_root)?),
        (None, true) => return Err(PipelineError::NoBackend),
        _ => None,
    };

    let mut stages = Vec::new();
    let mut previous: Option<(ClassifierModel, String)> = None;
    let mut epochs_run = 0;
    for stage in &plan.stages {
        let train = store.load(stage.train_language, Split::Train)?;
        let train = match (&translator, stage.augmented) {
            (Some(t), true) => t.augment(&train)?,
            _ => train,
        };
        let dev = store.load(stage.dev_language, Split::Dev)?;
        write_canonical(&train, &dir.join("corpora").join(format!("{}-train.tsv", stage.kind)))?;

        let init_hash = match (stage.init, &previous) {
            (InitFrom::PreviousStage, Some((_, hash))) => hash.clone(),
            _ => ClassifierModel::initial_hash(&config.encoder, config.seed),
        };
        let stage_hash = json_hash(&(
            stage.kind,
            train.content_hash(),
            dev.content_hash(),
            &stage.train,
            &config.encoder,
            &init_hash,
        ));
        let checkpoint = match stage.kind {
            StageKind::Pretrain => config.run_root.join(format!("pretrain-{}", &stage_hash[..16])),
            StageKind::Finetune => dir.join("finetune"),
        };

        let (model, outcome) = if checkpoint.join(META_FILE).exists() {
            let model = load_checkpoint(&checkpoint)?;
            if model.meta().config_hash != stage_hash {
                return Err(PipelineError::StaleCheckpoint {
                    path: checkpoint,
                    expected: stage_hash,
                    found: model.meta().config_hash.clone(),
                });
            }
            info!("{}: reusing {}", stage.kind, checkpoint.display());
            let best_epoch = model.meta().history.last().map_or(0, |h| h.best_epoch);
            let outcome = StageOutcome {
                kind: stage.kind,
                checkpoint: checkpoint.clone(),
                stage_hash: stage_hash.clone(),
                train_size: train.len(),
                reused: true,
                epochs_run: 0,
                best_epoch,
            };
            (model, outcome)
        } else {
            let init = match (stage.init, previous.take()) {
                (InitFrom::PreviousStage, Some((model, _))) => model,
                _ => ClassifierModel::new(&config.encoder, config.seed)?,
            };
            let (mut model, log) =
                classifier::train(init, &train, &dev, &stage.train).map_err(|source| PipelineError::Stage {
                    stage: stage.kind,
                    source,
                })?;
            model.meta_mut().config_hash = stage_hash.clone();
            save_atomically(&model, &checkpoint)?;
            epochs_run += log.epochs.len();
            let outcome = StageOutcome {
                kind: stage.kind,
                checkpoint: checkpoint.clone(),
                stage_hash: stage_hash.clone(),
                train_size: train.len(),
                reused: false,
                epochs_run: log.epochs.len(),
                best_epoch: log.best_epoch,
            };
            (model, outcome)
        };
        stages.push(outcome);
        previous = Some((model, stage_hash));
    }
    write_json(&dir.join("stages.json"), &stages)?;

    store.enter(Phase::Evaluation);
    let (model, _) = previous.expect("plans have at least one stage");
    let test = store.load(config.target, Split::Test)?;
    let predictions = dir.join(format!("predictions-{}.tsv", config.target));
    let report = evaluate_to_files(&model, &test, &predictions, config, &dir)?;
    let accesses = store.accesses();
    write_json(&dir.join("audit.json"), &accesses)?;
    Ok(ExperimentOutcome {
        report,
        run_dir: dir,
        plan,
        stages,
        epochs_run,
        accesses,
    })
}

fn save_atomically(model: &ClassifierModel, dir: &Path) -> Result<(), PipelineError> {
    let tmp = dir.with_extension(format!("tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
    }
    save_checkpoint(model, &tmp)?;
    if dir.exists() {
        // a half-written directory without meta, or a concurrent writer won
        if dir.join(META_FILE).exists() {
            fs::remove_dir_all(&tmp).map_err(io_err(&tmp))?;
            return Ok(());
        }
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&tmp, dir).map_err(io_err(dir))
}

/// Predicts the test set, persists the predictions, and builds the report
/// from the persisted file.
fn evaluate_to_files(
    model: &ClassifierModel,
    test: &Corpus,
    predictions: &Path,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<EvalReport, PipelineError> {
    let pred = model.predict(&test.texts());
    let rows: Vec<PredictionRow> = test
        .iter()
        .zip(pred)
        .map(|(ex, pred)| PredictionRow {
            id: ex.id.clone(),
            gold: ex.label,
            pred,
        })
        .collect();
    write_predictions(predictions, &rows).map_err(io_err(predictions))?;
    let report = report_from_predictions(
        &[(config.target, predictions.to_path_buf())],
        descriptor(config),
        config,
    )?;
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    write_file(&out_dir.join(TABLE_FILE), &render_table(std::slice::from_ref(&report)))?;
    Ok(report)
}

/// Rebuilds a report from predictions files alone.
pub fn report_from_predictions(
    files: &[(Language, PathBuf)],
    experiment: ExperimentDescriptor,
    config: &ExperimentConfig,
) -> Result<EvalReport, PipelineError> {
    let mut per_language = BTreeMap::new();
    for (language, path) in files {
        let rows = read_predictions(path)?;
        let cm = confusion_from_predictions(&rows)?;
        per_language.insert(
            *language,
            LanguageResult::from_confusion(cm, config.evaluation.zero_support)?,
        );
    }
    Ok(EvalReport::new(experiment, per_language))
}

/// Renders reports as a table and writes it to `out`.
pub fn emit_report(reports: &[EvalReport], out: &Path) -> Result<String, PipelineError> {
    if reports.is_empty() {
        return Err(PipelineError::Config("no reports to emit".into()));
    }
    let table = render_table(reports);
    write_file(out, &table)?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct MatrixOutcome {
    pub outcomes: Vec<ExperimentOutcome>,
    pub reports: Vec<EvalReport>,
    pub table: String,
    pub dir: PathBuf,
}

/// Grid cells in table order: vanilla, English pre-training, pre-training
/// with augmentation, and optionally augmentation alone.
pub fn matrix_cells(include_extra: bool) -> Vec<(bool, bool)> {
    let mut cells = vec![(false, false), (true, false), (true, true)];
    if include_extra {
        cells.push((false, true));
    }
    cells
}

/// Runs every configured target under every grid cell and writes the
/// combined table.
pub fn run_matrix(config: &ExperimentConfig) -> Result<MatrixOutcome, PipelineError> {
    let mut outcomes = Vec::new();
    for &target in &config.matrix.targets {
        for (using_english, data_augmentation) in matrix_cells(config.matrix.include_extra) {
            outcomes.push(run_experiment(&config.with_cell(target, using_english, data_augmentation))?);
        }
    }
    let reports: Vec<EvalReport> = EvalReport::combine(&outcomes.iter().map(|o| o.report.clone()).collect::<Vec<_>>());
    let dir = config.run_root.join(format!("matrix-{}", &config.hash()[..16]));
    write_json(&dir.join("reports.json"), &reports)?;
    let table = emit_report(&reports, &dir.join(TABLE_FILE))?;
    Ok(MatrixOutcome {
        outcomes,
        reports,
        table,
        dir,
    })
}

/// Loads every declared source into canonical files under `out_dir`, one per
/// (language, split). Returns the written paths with their sizes.
pub fn ingest_sources(config: &ExperimentConfig, out_dir: &Path) -> Result<Vec<(PathBuf, usize)>, PipelineError> {
    let store = DataStore::new(config.corpora.clone());
    store.enter(Phase::Evaluation);
    let mut written = Vec::new();
    for language in Language::ALL {
        for split in Split::ALL {
            if !store.has(language, split) {
                continue;
            }
            let corpus = store.load(language, split)?;
            let path = out_dir.join(format!("{language}-{split}.tsv"));
            write_canonical(&corpus, &path)?;
            written.push((path, corpus.len()));
        }
    }
    Ok(written)
}

/// Scores a saved checkpoint on a corpus.
pub fn evaluate_checkpoint(
    checkpoint: &Path,
    test: &Corpus,
    predictions: &Path,
) -> Result<(Vec<SentimentLabel>, LanguageResult), PipelineError> {
    let model = load_checkpoint(checkpoint)?;
    let pred = model.predict(&test.texts());
    let rows: Vec<PredictionRow> = test
        .iter()
        .zip(&pred)
        .map(|(ex, p)| PredictionRow {
            id: ex.id.clone(),
            gold: ex.label,
            pred: *p,
        })
        .collect();
    write_predictions(predictions, &rows).map_err(io_err(predictions))?;
    let cm = confusion_from_predictions(&read_predictions(predictions)?)?;
    Ok((pred, LanguageResult::from_confusion(cm, Default::default())?))
}
