use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::SparseVec;
use super::loss::{class_weights, ClassWeightMode, ClassWeights};
use super::model::{json_hash, round_f32, ClassifierModel};
use super::ClassifierError;
use crate::corpus::{Corpus, SentimentLabel};
use crate::metrics::{confusion, MetricTriple, SelectionMetric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub selection_metric: SelectionMetric,
    pub class_weight_mode: ClassWeightMode,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-6,
            batch_size: 32,
            max_epochs: 50,
            patience: 3,
            selection_metric: SelectionMetric::AvgRec,
            class_weight_mode: ClassWeightMode::InverseFrequency,
            seed: 42,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam without weight decay, over a fixed index range of a flat store.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, lr: f64, len: usize) -> Self {
        Self {
            cfg,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// Best-so-far tracking with patience.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    max_epochs: usize,
    epochs: usize,
    best: Option<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize, max_epochs: usize) -> Self {
        Self {
            patience,
            max_epochs,
            epochs: 0,
            best: None,
        }
    }

    /// Records the next epoch's metric. Only a strictly larger value counts
    /// as an improvement, so ties keep the earlier epoch; NaN never improves.
    pub fn observe(&mut self, metric: f64) -> StopDecision {
        self.epochs += 1;
        let improved = match self.best {
            None => !metric.is_nan(),
            Some((_, best)) => metric > best,
        };
        if improved {
            self.best = Some((self.epochs, metric));
        }
        let best_epoch = self.best.map_or(0, |(e, _)| e);
        let stop = self.epochs >= self.max_epochs || self.epochs - best_epoch >= self.patience;
        StopDecision { improved, stop }
    }

    /// 1-based epoch of the best metric so far.
    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best.map(|(_, m)| m)
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: MetricTriple,
    pub selection: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: TrainConfig,
    pub weights: ClassWeights,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_selection: Option<f64>,
}

/// Featurized labelled set, computed once per training run.
pub struct EncodedSet {
    pub rows: Vec<SparseVec>,
    pub labels: Vec<SentimentLabel>,
}

impl EncodedSet {
    pub fn new(model: &ClassifierModel, corpus: &Corpus) -> Self {
        Self {
            rows: corpus.iter().map(|ex| model.encoder().featurize(&ex.text)).collect(),
            labels: corpus.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Dev-set scores of a model.
pub fn evaluate(model: &ClassifierModel, set: &EncodedSet) -> Result<MetricTriple, ClassifierError> {
    let pred = model.predict_features(&set.rows.iter().collect::<Vec<_>>());
    Ok(confusion(&set.labels, &pred)?.triple()?)
}

/// Trains with per-epoch dev evaluation and returns the best epoch's model.
pub fn train(
    model: ClassifierModel,
    train_set: &Corpus,
    dev_set: &Corpus,
    config: &TrainConfig,
) -> Result<(ClassifierModel, TrainingLog), ClassifierError> {
    if dev_set.is_empty() {
        return Err(ClassifierError::EmptyCorpus("dev".into()));
    }
    let dev = EncodedSet::new(&model, dev_set);
    let corpus_hashes = (train_set.content_hash(), dev_set.content_hash());
    let (mut model, log) = train_with_evaluator(model, train_set, config, |m, _| evaluate(m, &dev))?;
    let previous = model.meta().config_hash.clone();
    model.meta_mut().config_hash = json_hash(&(previous, config, corpus_hashes));
    Ok((model, log))
}

/// Like [`train`] but with a caller-supplied per-epoch evaluator, which gets
/// the model after each epoch and its 1-based index.
pub fn train_with_evaluator<F>(
    mut model: ClassifierModel,
    train_set: &Corpus,
    config: &TrainConfig,
    mut evaluate: F,
) -> Result<(ClassifierModel, TrainingLog), ClassifierError>
where
    F: FnMut(&ClassifierModel, usize) -> Result<MetricTriple, ClassifierError>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(ClassifierError::EmptyCorpus("train".into()));
    }
    let weights = class_weights(train_set, config.class_weight_mode)?;
    let data = EncodedSet::new(&model, train_set);
    let range = model.trainable_range();
    let mut adam = Adam::new(config.adam, config.learning_rate, range.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stopper = EarlyStopping::new(config.patience, config.max_epochs);
    let mut best_params = model.params().to_vec();
    let mut epochs = Vec::new();
    info!(
        "training {} on {} examples (lr {}, weights {:?})",
        model.encoder().name(),
        data.len(),
        config.learning_rate,
        weights.0
    );

    loop {
        let epoch = stopper.epochs() + 1;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let inputs: Vec<&SparseVec> = batch.iter().map(|&i| &data.rows[i]).collect();
            let gold: Vec<SentimentLabel> = batch.iter().map(|&i| data.labels[i]).collect();
            let (loss, grad) = match model.loss_and_gradients(&inputs, &gold, &weights) {
                Ok(r) => r,
                Err(ClassifierError::NonFiniteLogits(_)) => {
                    return Err(ClassifierError::Diverged { epoch, batch: batch_index + 1 })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(ClassifierError::Diverged { epoch, batch: batch_index + 1 });
            }
            loss_sum += loss * batch.len() as f64;
            let params = &mut model.params_mut()[range.clone()];
            adam.step(params, &grad[range.clone()]);
            round_f32(params);
        }
        let train_loss = loss_sum / data.len() as f64;
        let dev = evaluate(&model, epoch)?;
        let selection = dev.get(config.selection_metric);
        let decision = stopper.observe(selection);
        if decision.improved {
            best_params.copy_from_slice(model.params());
        }
        debug!("epoch {epoch}: loss {train_loss:.6}, dev {selection:.4}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            dev,
            selection,
        });
        if decision.stop {
            break;
        }
    }

    model.params_mut().copy_from_slice(&best_params);
    let log = TrainingLog {
        config: config.clone(),
        weights,
        epochs,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        best_selection: stopper.best_metric(),
    };
    info!(
        "stopped after {} epochs; best epoch {} ({:?})",
        log.epochs.len(),
        log.best_epoch,
        log.best_selection
    );
    model.meta_mut().history.push(log.clone());
    Ok((model, log))
}
