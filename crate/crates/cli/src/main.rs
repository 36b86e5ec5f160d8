use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use xling::classifier::{load_checkpoint, save_checkpoint, train, ClassifierError, ClassifierModel};
use xling::corpus::{read_canonical, write_canonical, CorpusError, Language, Split};
use xling::metrics::{EvalReport, ExperimentDescriptor};
use xling::pipeline::{
    emit_report, evaluate_checkpoint, ingest_sources, run_experiment, run_matrix, BackendKind, ExperimentConfig,
    PipelineError, Translator, TranslationConfig, REPORT_FILE,
};
use xling::synthetic::{desk_config, generate, SyntheticSpec, LEXICON_FILE};
use xling::ErrorCategory;

#[derive(Parser)]
#[command(name = "xling", version, about = "Cross-lingual tweet sentiment experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load every declared source into canonical TSV files.
    Ingest {
        #[arg(long)]
        out: PathBuf,
    },
    /// Translate a canonical corpus into the target languages.
    Augment(AugmentArgs),
    /// Train one stage on canonical train/dev files.
    Train(TrainArgs),
    /// Score a checkpoint on a canonical test file.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Also write a single-language report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render report files as one table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment from the config.
    Run(CellArgs),
    /// Run the whole configuration grid over the configured targets.
    Matrix,
    /// Write generated five-language corpora, a lexicon and a config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "es")]
        target: Language,
        #[arg(long, default_value_t = 42)]
        data_seed: u64,
    },
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "en,fr,de,es,it")]
    targets: Vec<Language>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Dictionary,
    Tagging,
    Http,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum StageArg {
    Pretrain,
    #[default]
    Finetune,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Which stage's settings to use.
    #[arg(long, value_enum, default_value = "finetune")]
    stage: StageArg,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CellArgs {
    #[arg(long)]
    target: Option<Language>,
    #[arg(long)]
    using_english: Option<bool>,
    #[arg(long)]
    augment: Option<bool>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: no examples")]
    EmptyInput(PathBuf),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        let category = match self {
            Self::Pipeline(e) => e.category(),
            Self::Corpus(e) => e.category(),
            Self::Classifier(e) => e.category(),
            Self::Io(..) => ErrorCategory::Io,
            Self::EmptyInput(_) => ErrorCategory::Data,
            Self::Usage(_) => ErrorCategory::Config,
        };
        match category {
            ErrorCategory::Config => 3,
            ErrorCategory::Data => 4,
            ErrorCategory::Training => 5,
            ErrorCategory::Io => 6,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("this command needs --config".into()))?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

/// The config if one was given, else defaults for `target`.
fn config_or_default(cli: &Cli, target: Language) -> Result<ExperimentConfig, CliError> {
    if cli.config.is_some() {
        return load_config(cli);
    }
    let mut config = ExperimentConfig::new(target);
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn read_split(path: &Path, split: Split) -> Result<xling::corpus::Corpus, CliError> {
    let dataset = path.file_stem().and_then(|s| s.to_str()).unwrap_or("corpus");
    Ok(read_canonical(path, dataset, split)?)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { out } => {
            let config = load_config(&cli)?;
            for (path, n) in ingest_sources(&config, out)? {
                println!("{}\t{n}", path.display());
            }
        }
        Command::Augment(args) => augment(&cli, args)?,
        Command::Train(args) => train_stage(&cli, args)?,
        Command::Evaluate {
            checkpoint,
            test,
            predictions,
            report,
        } => {
            let corpus = read_split(test, Split::Test)?;
            let language = corpus
                .iter()
                .next()
                .map(|e| e.language)
                .ok_or_else(|| CliError::EmptyInput(test.clone()))?;
            let (_, result) = evaluate_checkpoint(checkpoint, &corpus, predictions)?;
            let m = result.metrics;
            println!(
                "{language}\trec_avg {:.4}\tf1_macro {:.4}\tf1_pn {:.4}",
                m.rec_avg, m.f1_macro, m.f1_pn
            );
            if let Some(path) = report {
                let model = load_checkpoint(checkpoint)?;
                let experiment = ExperimentDescriptor {
                    model: model.encoder().name(),
                    using_english: false,
                    data_augmentation: false,
                };
                let report_value = EvalReport::new(experiment, [(language, result)].into_iter().collect());
                report_value.save(path).map_err(|e| CliError::Io(path.clone(), e))?;
            }
        }
        Command::Report { reports, out } => {
            let loaded = reports
                .iter()
                .map(|p| EvalReport::load(p).map_err(|e| CliError::Io(p.clone(), e)))
                .collect::<Result<Vec<_>, _>>()?;
            print!("{}", emit_report(&EvalReport::combine(&loaded), out)?);
        }
        Command::Run(cell) => {
            let mut config = load_config(&cli)?;
            config = config.with_cell(
                cell.target.unwrap_or(config.target),
                cell.using_english.unwrap_or(config.using_english),
                cell.augment.unwrap_or(config.data_augmentation),
            );
            config.validate()?;
            let outcome = run_experiment(&config)?;
            info!("{} epochs trained", outcome.epochs_run);
            println!("{}", outcome.run_dir.join(REPORT_FILE).display());
        }
        Command::Matrix => {
            let config = load_config(&cli)?;
            let outcome = run_matrix(&config)?;
            print!("{}", outcome.table);
        }
        Command::Synth { out, target, data_seed } => {
            let spec = SyntheticSpec {
                seed: *data_seed,
                ..SyntheticSpec::default()
            };
            // paths in the written config are relative to its directory
            let mut sources = generate(&spec).write(&out.join("data"))?;
            for source in &mut sources {
                source.path = source.path.strip_prefix(out).unwrap_or(&source.path).to_path_buf();
            }
            let lexicon = Path::new("data").join(LEXICON_FILE);
            let mut config = desk_config(*target, sources, lexicon, PathBuf::from("runs"));
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let path = out.join("config.toml");
            std::fs::write(&path, config.to_toml()).map_err(|e| CliError::Io(path.clone(), e))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn augment(cli: &Cli, args: &AugmentArgs) -> Result<(), CliError> {
    let corpus = read_split(&args.corpus, Split::Train)?;
    let (mut translation, run_root) = match &cli.config {
        Some(_) => {
            let config = load_config(cli)?;
            (config.translation.unwrap_or_default(), config.run_root)
        }
        None => (TranslationConfig::default(), PathBuf::from(".")),
    };
    if let Some(backend) = args.backend {
        translation.backend = match backend {
            Backend::Dictionary => BackendKind::Dictionary,
            Backend::Tagging => BackendKind::Tagging,
            Backend::Http => BackendKind::Http,
        };
    }
    if args.lexicon.is_some() {
        translation.lexicon = args.lexicon.clone();
    }
    if args.endpoint.is_some() {
        translation.endpoint = args.endpoint.clone();
    }
    if args.cache.is_some() {
        translation.cache = args.cache.clone();
    }
    translation.targets = args.targets.clone();
    if translation.backend == BackendKind::Dictionary && translation.lexicon.is_none() {
        return Err(CliError::Usage("the dictionary backend needs --lexicon".into()));
    }
    let translator = Translator::from_config(&translation, &run_root)?;
    let out = translator.augment(&corpus)?;
    write_canonical(&out, &args.out)?;
    info!("cache: {:?}", translator.cache().stats());
    println!("{}\t{}", args.out.display(), out.len());
    Ok(())
}

fn train_stage(cli: &Cli, args: &TrainArgs) -> Result<(), CliError> {
    let train_set = read_split(&args.train, Split::Train)?;
    let dev_set = read_split(&args.dev, Split::Dev)?;
    let target = dev_set.iter().next().map_or(Language::En, |e| e.language);
    let config = config_or_default(cli, target)?;
    let mut stage = match args.stage {
        StageArg::Pretrain => config.pretrain.clone(),
        StageArg::Finetune => config.finetune.clone(),
    };
    stage.seed = config.seed;
    let model = match &args.init {
        Some(path) => load_checkpoint(path)?,
        None => ClassifierModel::new(&config.encoder, config.seed)?,
    };
    let (model, log) = train(model, &train_set, &dev_set, &stage)?;
    save_checkpoint(&model, &args.out)?;
    println!(
        "{}\tepochs {}\tbest {}",
        args.out.display(),
        log.epochs.len(),
        log.best_epoch
    );
    Ok(())
}
