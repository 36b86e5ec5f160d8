//! End-to-end acceptance checks. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xling::classifier::{
    class_weights, load_checkpoint, save_checkpoint, train, train_with_evaluator, weighted_cross_entropy,
    ClassWeightMode, ClassWeights, ClassifierModel, EncoderSpec, SparseVec, TinyHashConfig, TrainConfig,
};
use xling::corpus::{normalize_text, read_canonical, write_canonical, Corpus, LabeledExample, Language, Origin, SentimentLabel, Split};
use xling::metrics::{
    aggregate_languages, confusion, round_percent, ConfusionMatrix, MetricTriple, AGGREGATE_LABEL,
};
use xling::pipeline::{run_experiment, run_matrix, ExperimentConfig};
use xling::synthetic::{desk_config, generate, SyntheticSpec, LEXICON_FILE};
use xling::translate::{
    augment_corpus, AugmentOptions, AugmentationPlan, BackendError, TaggingBackend, TranslationBackend,
    TranslationCache,
};

const PROBE: &str = include_str!("fixtures/probe_batch.txt");

type Check = fn() -> Result<String, String>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("augmentation multiplicity", multiplicity),
        ("aggregation oracle", aggregation),
        ("metric oracle equivalence", metric_oracle),
        ("gradient check", gradient_check),
        ("early stopping", early_stopping),
        ("class-weight correctness", class_weight_checks),
        ("end-to-end desk-scale run", end_to_end),
        ("cache idempotence", cache_idempotence),
        ("determinism and round-trips", determinism),
        ("report shape", report_shape),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

fn tiny_spec(dim: usize, hidden: usize) -> EncoderSpec {
    EncoderSpec::TinyHash(TinyHashConfig {
        dim,
        hidden,
        ..TinyHashConfig::default()
    })
}

fn random_corpus(rng: &mut ChaCha8Rng, n: usize, language: Language) -> Corpus {
    const WORDS: &[&str] = &["sun", "rain", "great", "awful", "bus", "late", "love", "meh", "#tbt", "@you", "ok"];
    let examples = (0..n)
        .map(|i| {
            let len = rng.gen_range(1..8);
            let text: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
            LabeledExample {
                id: format!("r{i}"),
                text: format!("{} {i}", text.join(" ")),
                language,
                label: SentimentLabel::from_index(rng.gen_range(0..3)).unwrap(),
                origin: Origin::Original,
                dataset: "random".into(),
                split: Split::Train,
            }
        })
        .collect();
    Corpus::new(examples).unwrap()
}

fn multiplicity() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let plan = AugmentationPlan::all_languages("tagging");
    for n in [1, 17, 1000] {
        let language = *Language::ALL.choose(&mut rng).unwrap();
        let corpus = random_corpus(&mut rng, n, language);
        let out = augment_corpus(
            &corpus,
            &plan,
            &TaggingBackend,
            &TranslationCache::in_memory(),
            &AugmentOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        ensure(out.len() == 5 * n, || format!("{n} {language} examples gave {}", out.len()))?;
        for target in Language::ALL {
            let k = out.iter().filter(|e| e.language == target).count();
            ensure(k == n, || format!("{k} examples in {target} for source size {n}"))?;
        }
    }
    // full merged English train set: 47,762 tweets in, 238,810 out
    ensure(47_762 * 5 == 238_810, || "arithmetic".into())?;
    let planned = plan.expanded_size(Language::En, 47_762);
    ensure(planned == 238_810, || format!("planned {planned}"))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok("sizes 1, 17, 1000 expand fivefold; 47762 -> 238810".into())
}

fn triple(v: f64) -> MetricTriple {
    MetricTriple {
        rec_avg: v,
        f1_macro: v,
        f1_pn: v,
    }
}

fn aggregation() -> Result<String, String> {
    let langs = [Language::De, Language::Es, Language::Fr, Language::It];
    let mut got = Vec::new();
    for (values, expected) in [([74.1, 68.3, 73.8, 67.1], 70.8), ([74.2, 69.8, 74.4, 68.1], 71.6)] {
        let scores: BTreeMap<Language, MetricTriple> =
            langs.iter().zip(values).map(|(l, v)| (*l, triple(v / 100.0))).collect();
        let agg = round_percent(aggregate_languages(&scores, &[Language::En]).unwrap().rec_avg);
        ensure(agg == expected, || format!("got {agg}, expected {expected}"))?;
        got.push(agg);
    }
    Ok(format!("{got:?}"))
}

/// Metrics straight from label pairs, no confusion matrix.
fn brute_force(gold: &[SentimentLabel], pred: &[SentimentLabel]) -> [f64; 3] {
    let mut recall = [0.0; 3];
    let mut f1 = [0.0; 3];
    for class in SentimentLabel::ALL {
        let tp = gold.iter().zip(pred).filter(|(g, p)| **g == class && **p == class).count() as f64;
        let support = gold.iter().filter(|g| **g == class).count() as f64;
        let predicted = pred.iter().filter(|p| **p == class).count() as f64;
        let r = if support > 0.0 { tp / support } else { 0.0 };
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        recall[class.index()] = r;
        f1[class.index()] = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    [recall.iter().sum::<f64>() / 3.0, f1.iter().sum::<f64>() / 3.0, (f1[0] + f1[2]) / 2.0]
}

fn metric_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let label = |rng: &mut ChaCha8Rng| SentimentLabel::from_index(rng.gen_range(0..3)).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=10_000);
        let gold: Vec<_> = (0..n).map(|_| label(&mut rng)).collect();
        // a skewed predictor so some sets have empty predicted classes
        let pred: Vec<_> = gold
            .iter()
            .map(|g| if rng.gen_bool(0.6) { *g } else { label(&mut rng) })
            .collect();
        let t = confusion(&gold, &pred).unwrap().triple().unwrap();
        let b = brute_force(&gold, &pred);
        for (x, y) in [t.rec_avg, t.f1_macro, t.f1_pn].iter().zip(b) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let t = ConfusionMatrix::from_counts([[8, 1, 1], [2, 6, 2], [0, 2, 8]]).triple().unwrap();
    for (got, want) in [(t.rec_avg, 0.73333), (t.f1_macro, 0.73116), (t.f1_pn, 0.78095)] {
        ensure((got - want).abs() < 1e-5, || format!("worked example {got} vs {want}"))?;
    }
    Ok(format!("200 sets, max deviation {worst:e}; worked example matches"))
}

fn gradient_check() -> Result<String, String> {
    use SentimentLabel::*;
    let start = Instant::now();
    let texts: Vec<&str> = PROBE.lines().collect();
    ensure(texts.len() == 8, || "probe batch must hold 8 texts".into())?;
    let gold = [Positive, Negative, Neutral, Positive, Negative, Neutral, Positive, Neutral];
    let mut model = ClassifierModel::new(&tiny_spec(64, 4), 11).map_err(|e| e.to_string())?;
    let rows = model.featurize(&texts);
    let refs: Vec<&SparseVec> = rows.iter().collect();
    let w = ClassWeights([1.3, 0.7, 1.0]);
    let (_, grad) = model.loss_and_gradients(&refs, &gold, &w).map_err(|e| e.to_string())?;
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..model.params().len() {
        let original = model.params()[i];
        model.params_mut()[i] = original + step;
        let up = model.loss(&refs, &gold, &w).unwrap();
        model.params_mut()[i] = original - step;
        let down = model.loss(&refs, &gold, &w).unwrap();
        model.params_mut()[i] = original;
        let numeric = (up - down) / (2.0 * step);
        let denom = grad[i].abs().max(numeric.abs()).max(1e-10);
        worst = worst.max((grad[i] - numeric).abs() / denom);
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{} parameters, max relative error {worst:.2e}", model.params().len()))
}

fn toy_corpus() -> Corpus {
    let words = [
        (SentimentLabel::Negative, ["sad", "bad", "awful"]),
        (SentimentLabel::Neutral, ["table", "bus", "paper"]),
        (SentimentLabel::Positive, ["joy", "great", "nice"]),
    ];
    let examples = (0..60)
        .map(|i| {
            let (label, vocab) = &words[i % 3];
            LabeledExample {
                id: format!("ex{i}"),
                text: format!("{} today {}", vocab[i % 3], i % 5),
                language: Language::En,
                label: *label,
                origin: Origin::Original,
                dataset: "toy".into(),
                split: Split::Train,
            }
        })
        .collect();
    Corpus::new(examples).unwrap()
}

fn early_stopping() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let corpus = toy_corpus();
    for trial in 0..50 {
        let max_epochs = rng.gen_range(1..=12);
        let patience = rng.gen_range(1..=4);
        // coarse values so ties and plateaus are common
        let trace: Vec<f64> = (0..max_epochs).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();

        // independent expectation: first epoch holding the running maximum
        let mut best = 1;
        let mut expected_stop = max_epochs;
        for e in 1..=max_epochs {
            if trace[e - 1] > trace[best - 1] {
                best = e;
            }
            if e - best >= patience {
                expected_stop = e;
                break;
            }
        }
        let expected_max = trace[..expected_stop].iter().cloned().fold(f64::MIN, f64::max);

        let config = TrainConfig {
            learning_rate: 1e-2,
            max_epochs,
            patience,
            seed: trial,
            ..TrainConfig::default()
        };
        let model = ClassifierModel::new(&tiny_spec(64, 4), trial).unwrap();
        let mut snapshots = Vec::new();
        let (model, log) = train_with_evaluator(model, &corpus, &config, |m, epoch| {
            snapshots.push(m.params().to_vec());
            Ok(triple(trace[epoch - 1]))
        })
        .map_err(|e| e.to_string())?;

        let ran = log.epochs.len();
        ensure(ran == expected_stop && ran == max_epochs.min(best + patience), || {
            format!("trial {trial}: ran {ran}, expected {expected_stop} (trace {trace:?}, patience {patience})")
        })?;
        ensure(log.best_epoch == best, || format!("trial {trial}: best {} vs {best}", log.best_epoch))?;
        ensure(log.best_selection == Some(expected_max), || {
            format!("trial {trial}: retained {:?} vs max {expected_max}", log.best_selection)
        })?;
        ensure(model.params() == snapshots[best - 1].as_slice(), || {
            format!("trial {trial}: retained params differ from epoch {best}")
        })?;
    }
    Ok("50 traces stop at min(max_epochs, best + patience) and keep the best epoch".into())
}

fn class_weight_checks() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // unit weights against a plain log-sum-exp cross-entropy
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = [rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0)];
        let gold = SentimentLabel::from_index(rng.gen_range(0..3)).unwrap();
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let plain = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[gold.index()];
        let weighted = weighted_cross_entropy(&z, gold, &ClassWeights::UNIT).unwrap();
        worst = worst.max((plain - weighted).abs());
    }
    let model = ClassifierModel::new(&tiny_spec(128, 6), 9).unwrap();
    let texts: Vec<&str> = PROBE.lines().collect();
    let gold: Vec<SentimentLabel> = (0..texts.len()).map(|i| SentimentLabel::from_index(i % 3).unwrap()).collect();
    let rows = model.featurize(&texts);
    let refs: Vec<&SparseVec> = rows.iter().collect();
    let batch = model.loss(&refs, &gold, &ClassWeights::UNIT).unwrap();
    let plain: f64 = model
        .logits(&texts)
        .iter()
        .zip(&gold)
        .map(|(z, g)| {
            let m = z.iter().cloned().fold(f64::MIN, f64::max);
            m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - z[g.index()]
        })
        .sum::<f64>()
        / texts.len() as f64;
    worst = worst.max((batch - plain).abs());
    ensure(worst <= 1e-12, || format!("unit weights deviate by {worst:e}"))?;

    for k in [1, 7, 250] {
        let w = ClassWeights::from_counts([k; 3], ClassWeightMode::InverseFrequency).unwrap();
        ensure(w == ClassWeights::UNIT, || format!("balanced {k} gave {:?}", w.0))?;
    }
    let balanced = toy_corpus();
    let w = class_weights(&balanced, ClassWeightMode::InverseFrequency).unwrap();
    ensure(w == ClassWeights::UNIT, || format!("balanced corpus gave {:?}", w.0))?;

    let mut worst_sum: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.gen_range(3..500);
        let mut corpus = random_corpus(&mut rng, n, Language::Es);
        // guarantee every class is present
        let mut examples = corpus.examples().to_vec();
        for (i, ex) in examples.iter_mut().take(3).enumerate() {
            ex.label = SentimentLabel::from_index(i).unwrap();
        }
        corpus = Corpus::new(examples).unwrap();
        let w = class_weights(&corpus, ClassWeightMode::InverseFrequency).unwrap();
        let total: f64 = SentimentLabel::ALL
            .iter()
            .map(|c| corpus.iter().filter(|e| e.label == *c).count() as f64 * w.get(*c))
            .sum();
        worst_sum = worst_sum.max((total - n as f64).abs() / n as f64);
    }
    ensure(worst_sum <= 1e-12, || format!("sum n_c w_c off by {worst_sum:e} relative"))?;
    Ok(format!("unit-weight deviation {worst:e}; balanced gives (1,1,1); sum n_c w_c = N"))
}

fn end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let sources = generate(&SyntheticSpec::default()).write(&data).map_err(|e| e.to_string())?;
    let base = desk_config(Language::Es, sources, data.join(LEXICON_FILE), dir.path().join("runs"));
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for target in [Language::Fr, Language::De, Language::Es, Language::It] {
        let score = |english, aug| -> Result<f64, String> {
            let outcome = run_experiment(&base.with_cell(target, english, aug)).map_err(|e| e.to_string())?;
            Ok(outcome.report.per_language[&target].metrics.rec_avg)
        };
        let vanilla = score(false, false)?;
        let full = score(true, true)?;
        lines.push(format!("{target} {full:.3} vs {vanilla:.3}"));
        if full < 0.90 || full < vanilla {
            failures.push(target);
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    let detail = format!("AvgRec (pretrain+aug) vs vanilla: {}", lines.join(", "));
    ensure(failures.is_empty(), || detail.clone())?;
    Ok(detail)
}

struct Counting<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B: TranslationBackend> TranslationBackend for Counting<B> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn translate(&self, text: &str, source: Language, target: Language) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.translate(text, source, target)
    }
}

fn cache_idempotence() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate(&SyntheticSpec {
        english_train: 400,
        ..SyntheticSpec::default()
    });
    let corpus = bundle.corpus(Language::En, Split::Train);
    let backend = Counting {
        inner: bundle.dictionary(),
        calls: AtomicUsize::new(0),
    };
    let plan = AugmentationPlan::all_languages(backend.name());
    let cache_path = dir.path().join("mt.cache");
    let mut files = Vec::new();
    let mut calls = Vec::new();
    for run in 0..2 {
        backend.calls.store(0, Ordering::SeqCst);
        let cache = TranslationCache::open(&cache_path).map_err(|e| e.to_string())?;
        let out = augment_corpus(corpus, &plan, &backend, &cache, &AugmentOptions::default()).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.tsv"));
        write_canonical(&out, &path).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).unwrap());
        calls.push(backend.calls.load(Ordering::SeqCst));
    }
    ensure(calls[0] == 4 * corpus.len(), || format!("first run made {} calls", calls[0]))?;
    ensure(calls[1] == 0, || format!("second run made {} calls", calls[1]))?;
    ensure(files[0] == files[1], || "augmented corpora differ".into())?;
    Ok(format!("{} then {} backend calls; outputs byte-identical", calls[0], calls[1]))
}

fn determinism() -> Result<String, String> {
    let corpus = toy_corpus();
    let config = TrainConfig {
        learning_rate: 5e-3,
        max_epochs: 4,
        ..TrainConfig::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut models = Vec::new();
    for dir in &dirs {
        let model = ClassifierModel::new(&tiny_spec(512, 8), 7).unwrap();
        let (model, _) = train(model, &corpus, &corpus, &config).map_err(|e| e.to_string())?;
        save_checkpoint(&model, dir.path()).map_err(|e| e.to_string())?;
        models.push(model);
    }
    for file in ["params.bin", "layout.txt", "meta.json"] {
        let a = std::fs::read(dirs[0].path().join(file)).unwrap();
        let b = std::fs::read(dirs[1].path().join(file)).unwrap();
        ensure(a == b, || format!("{file} differs between identical runs"))?;
    }

    let back = load_checkpoint(dirs[0].path()).map_err(|e| e.to_string())?;
    let probe: Vec<&str> = PROBE.lines().collect();
    let bits = |logits: Vec<[f64; 3]>| logits.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure(bits(models[0].logits(&probe)) == bits(back.logits(&probe)), || "reloaded logits differ".into())?;
    ensure(models[0].predict(&probe) == back.predict(&probe), || "reloaded predictions differ".into())?;

    let tricky = ["tab\there", "line\nbreak", r"C:\temp\new \t", "émoji 😀 ünïcode", "  spaced  "];
    let examples = tricky
        .iter()
        .enumerate()
        .map(|(i, text)| LabeledExample {
            id: format!("id\t{i}\n"),
            text: normalize_text(text),
            language: Language::ALL[i % 5],
            label: SentimentLabel::from_index(i % 3).unwrap(),
            origin: if i % 2 == 0 { Origin::Original } else { Origin::Translated(Language::En) },
            dataset: "tricky".into(),
            split: Split::Dev,
        })
        .collect();
    let corpus = Corpus::new(examples).unwrap();
    let path = dirs[0].path().join("tricky.tsv");
    write_canonical(&corpus, &path).map_err(|e| e.to_string())?;
    let read = read_canonical(&path, "tricky", Split::Dev).map_err(|e| e.to_string())?;
    for (a, b) in read.examples().iter().zip(corpus.examples()) {
        ensure(a == b, || format!("corpus round-trip changed {b:?} into {a:?}"))?;
    }
    ensure(read.len() == corpus.len(), || format!("{} of {} examples read back", read.len(), corpus.len()))?;
    Ok("identical checkpoints; logits, predictions and examples survive round-trips".into())
}

fn report_shape() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let spec = SyntheticSpec {
        english_train: 600,
        target_train: 150,
        dev: 60,
        test: 60,
        ..SyntheticSpec::default()
    };
    let sources = generate(&spec).write(&data).map_err(|e| e.to_string())?;
    let mut config: ExperimentConfig =
        desk_config(Language::Fr, sources, data.join(LEXICON_FILE), dir.path().join("runs"));
    config.pretrain.max_epochs = 5;
    config.finetune.max_epochs = 5;
    let outcome = run_matrix(&config).map_err(|e| e.to_string())?;

    let lines: Vec<&str> = outcome.table.lines().collect();
    ensure(
        lines[0] == "| Language | Model | Using English | D-A | Rec_avg | F1_mac | F1_PN |",
        || format!("header {}", lines[0]),
    )?;
    let cells = |line: &str| -> Vec<String> {
        line.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect()
    };
    for line in &lines[2..] {
        ensure(cells(line).len() == 7, || format!("row {line}"))?;
    }
    let aggregates: Vec<Vec<String>> = lines[2..]
        .iter()
        .map(|l| cells(l))
        .filter(|c| c[0] == AGGREGATE_LABEL)
        .collect();
    ensure(aggregates.len() == 3, || format!("{} aggregate rows", aggregates.len()))?;
    ensure(lines.len() == 2 + 4 * 3 + 3, || format!("{} lines", lines.len()))?;

    // each aggregate against the mean of its cell's printed language rows
    let mut worst: f64 = 0.0;
    for agg in &aggregates {
        let rows: Vec<Vec<String>> = lines[2..]
            .iter()
            .map(|l| cells(l))
            .filter(|c| c[0] != AGGREGATE_LABEL && c[1..4] == agg[1..4])
            .collect();
        ensure(rows.len() == 4, || format!("{} language rows for {:?}", rows.len(), &agg[1..4]))?;
        for col in 4..7 {
            let mean = rows.iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / 4.0;
            let shown: f64 = agg[col].parse().unwrap();
            worst = worst.max((mean - shown).abs());
        }
    }
    // rounded inputs and a rounded mean differ by at most one rounding step
    ensure(worst <= 0.1 + 1e-9, || format!("aggregate off by {worst}"))?;

    // and to floating-point precision before rounding
    for report in &outcome.reports {
        let agg = report.aggregate_non_english.ok_or("missing aggregate")?;
        let values: Vec<f64> = report.per_language.values().map(|r| r.metrics.rec_avg).collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        ensure((mean - agg.rec_avg).abs() < 1e-12, || format!("unrounded aggregate {} vs {mean}", agg.rec_avg))?;
    }
    Ok(format!("{} lines, 7 columns, aggregate within {worst:.3} of row means", lines.len()))
}
