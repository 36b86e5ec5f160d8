use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::encoder::{EncoderBackend, EncoderSpec, SparseVec};
use super::loss::{log_softmax, ClassWeights};
use super::{ClassifierError, TensorSpec, TrainingLog};
use crate::corpus::SentimentLabel;

pub const NUM_CLASSES: usize = 3;

/// Everything about a model that is not a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub seed: u64,
    pub config_hash: String,
    pub label_order: Vec<SentimentLabel>,
    pub history: Vec<TrainingLog>,
}

/// Encoder plus an affine head onto the three polarity classes, with all
/// parameters in one flat store (encoder first, then head).
pub struct ClassifierModel {
    encoder: Box<dyn EncoderBackend>,
    params: Vec<f64>,
    layout: Vec<TensorSpec>,
    encoder_len: usize,
    meta: ModelMeta,
}

impl Clone for ClassifierModel {
    fn clone(&self) -> Self {
        Self {
            encoder: self.encoder.spec().build().expect("spec of a live encoder"),
            params: self.params.clone(),
            layout: self.layout.clone(),
            encoder_len: self.encoder_len,
            meta: self.meta.clone(),
        }
    }
}

impl std::fmt::Debug for ClassifierModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClassifierModel")
            .field("encoder", &self.encoder.name())
            .field("params", &self.params.len())
            .field("meta", &self.meta)
            .finish()
    }
}

/// Hex SHA-256 of a value's JSON form.
pub(crate) fn json_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("serializable");
    hex::encode(Sha256::digest(json))
}

/// Rounds through f32 so the stored parameters survive the checkpoint
/// format exactly.
pub(crate) fn round_f32(params: &mut [f64]) {
    for p in params {
        *p = *p as f32 as f64;
    }
}

impl ClassifierModel {
    /// Freshly initialized model.
    pub fn new(spec: &EncoderSpec, seed: u64) -> Result<Self, ClassifierError> {
        let encoder = spec.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = encoder.init_params(&mut rng);
        let d = encoder.output_dim();
        let bound = (6.0 / (d + NUM_CLASSES) as f64).sqrt();
        params.extend((0..d * NUM_CLASSES).map(|_| rng.gen_range(-bound..bound)));
        params.extend([0.0; NUM_CLASSES]);
        round_f32(&mut params);
        let meta = ModelMeta {
            seed,
            config_hash: Self::initial_hash(spec, seed),
            label_order: SentimentLabel::ALL.to_vec(),
            history: Vec::new(),
        };
        Self::from_parts(encoder, params, meta)
    }

    /// Config hash recorded by [`ClassifierModel::new`].
    pub fn initial_hash(spec: &EncoderSpec, seed: u64) -> String {
        json_hash(&(spec, seed))
    }

    pub(crate) fn from_parts(
        encoder: Box<dyn EncoderBackend>,
        params: Vec<f64>,
        meta: ModelMeta,
    ) -> Result<Self, ClassifierError> {
        let layout = Self::layout_for(encoder.as_ref());
        let expected: usize = layout.iter().map(TensorSpec::len).sum();
        if params.len() != expected {
            return Err(ClassifierError::LayoutMismatch {
                expected: expected.to_string(),
                found: params.len().to_string(),
            });
        }
        let encoder_len = encoder.param_layout().iter().map(TensorSpec::len).sum();
        Ok(Self {
            encoder,
            params,
            layout,
            encoder_len,
            meta,
        })
    }

    pub(crate) fn layout_for(encoder: &dyn EncoderBackend) -> Vec<TensorSpec> {
        let mut layout = encoder.param_layout();
        layout.push(TensorSpec::new("head.weight", &[encoder.output_dim(), NUM_CLASSES]));
        layout.push(TensorSpec::new("head.bias", &[NUM_CLASSES]));
        layout
    }

    pub fn encoder(&self) -> &dyn EncoderBackend {
        self.encoder.as_ref()
    }

    pub fn encoder_spec(&self) -> EncoderSpec {
        self.encoder.spec()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layout(&self) -> &[TensorSpec] {
        &self.layout
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut ModelMeta {
        &mut self.meta
    }

    /// Index range of the parameters training should update.
    pub fn trainable_range(&self) -> std::ops::Range<usize> {
        if self.encoder.trainable() {
            0..self.params.len()
        } else {
            self.encoder_len..self.params.len()
        }
    }

    pub fn featurize(&self, texts: &[&str]) -> Vec<SparseVec> {
        texts.iter().map(|t| self.encoder.featurize(t)).collect()
    }

    fn head(&self) -> (&[f64], &[f64]) {
        let d = self.encoder.output_dim();
        self.params[self.encoder_len..].split_at(d * NUM_CLASSES)
    }

    fn head_logits(&self, features: &[f64], n: usize) -> Vec<[f64; NUM_CLASSES]> {
        let d = self.encoder.output_dim();
        let (weight, bias) = self.head();
        (0..n)
            .map(|i| {
                let mut z = [bias[0], bias[1], bias[2]];
                for (j, f) in features[i * d..(i + 1) * d].iter().enumerate() {
                    for (c, zc) in z.iter_mut().enumerate() {
                        *zc += f * weight[j * NUM_CLASSES + c];
                    }
                }
                z
            })
            .collect()
    }

    pub fn logits_features(&self, inputs: &[&SparseVec]) -> Vec<[f64; NUM_CLASSES]> {
        let features = self.encoder.forward(&self.params[..self.encoder_len], inputs);
        self.head_logits(&features, inputs.len())
    }

    pub fn logits(&self, texts: &[&str]) -> Vec<[f64; NUM_CLASSES]> {
        let rows = self.featurize(texts);
        self.logits_features(&rows.iter().collect::<Vec<_>>())
    }

    pub fn predict(&self, texts: &[&str]) -> Vec<SentimentLabel> {
        self.logits(texts).iter().map(argmax_label).collect()
    }

    pub fn predict_features(&self, inputs: &[&SparseVec]) -> Vec<SentimentLabel> {
        self.logits_features(inputs).iter().map(argmax_label).collect()
    }

    /// Mean weighted cross-entropy of a batch.
    pub fn loss(
        &self,
        inputs: &[&SparseVec],
        gold: &[SentimentLabel],
        weights: &ClassWeights,
    ) -> Result<f64, ClassifierError> {
        let logits = self.logits_features(inputs);
        let mut total = 0.0;
        for (z, y) in logits.iter().zip(gold) {
            total += super::loss::weighted_cross_entropy(z, *y, weights)?;
        }
        Ok(total / inputs.len() as f64)
    }

    /// Batch loss and its gradient with respect to every parameter. Frozen
    /// encoder parameters get zero gradient.
    pub fn loss_and_gradients(
        &self,
        inputs: &[&SparseVec],
        gold: &[SentimentLabel],
        weights: &ClassWeights,
    ) -> Result<(f64, Vec<f64>), ClassifierError> {
        assert_eq!(inputs.len(), gold.len(), "batch inputs and labels differ in length");
        let n = inputs.len();
        let d = self.encoder.output_dim();
        let features = self.encoder.forward(&self.params[..self.encoder_len], inputs);
        let logits = self.head_logits(&features, n);

        let mut grad = vec![0.0; self.params.len()];
        let mut grad_features = vec![0.0; n * d];
        let (head_w, _) = self.head();
        let mut total = 0.0;
        {
            let (_, grad_head) = grad.split_at_mut(self.encoder_len);
            let (grad_w, grad_b) = grad_head.split_at_mut(d * NUM_CLASSES);
            for (i, (z, y)) in logits.iter().zip(gold).enumerate() {
                let w = weights.get(*y);
                let log_p = log_softmax(z)?;
                total += -w * log_p[y.index()];
                let mut dz = [0.0; NUM_CLASSES];
                for c in 0..NUM_CLASSES {
                    let target = if c == y.index() { 1.0 } else { 0.0 };
                    dz[c] = w * (log_p[c].exp() - target) / n as f64;
                    grad_b[c] += dz[c];
                }
                let f = &features[i * d..(i + 1) * d];
                let gf = &mut grad_features[i * d..(i + 1) * d];
                for j in 0..d {
                    for c in 0..NUM_CLASSES {
                        grad_w[j * NUM_CLASSES + c] += f[j] * dz[c];
                        gf[j] += head_w[j * NUM_CLASSES + c] * dz[c];
                    }
                }
            }
        }
        if self.encoder.trainable() {
            let (enc_params, _) = self.params.split_at(self.encoder_len);
            let (grad_enc, _) = grad.split_at_mut(self.encoder_len);
            self.encoder
                .backward(enc_params, inputs, &features, &grad_features, grad_enc);
        }
        Ok((total / n as f64, grad))
    }
}

/// Index of the largest logit; ties go to the lowest class index.
pub fn argmax_label(logits: &[f64; NUM_CLASSES]) -> SentimentLabel {
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if logits[c] > logits[best] {
            best = c;
        }
    }
    SentimentLabel::from_index(best).expect("three classes")
}
