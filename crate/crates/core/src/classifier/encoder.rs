use std::hash::Hasher;

use fnv::FnvHasher;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, TensorSpec};

/// Sparse feature row: strictly increasing indices with their values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }
}

/// Serializable description of an encoder, enough to rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    TinyHash(TinyHashConfig),
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::TinyHash(TinyHashConfig::default())
    }
}

impl EncoderSpec {
    pub fn build(&self) -> Result<Box<dyn EncoderBackend>, ClassifierError> {
        match self {
            EncoderSpec::TinyHash(cfg) => Ok(Box::new(TinyHashEncoder::new(cfg.clone())?)),
        }
    }
}

/// Maps texts to fixed-width feature rows.
///
/// Inputs are first turned into sparse rows by [`EncoderBackend::featurize`],
/// which does not depend on the parameters, so training can do it once. The
/// encoder's own parameters live in the model's flat store and are handed in
/// as a slice.
pub trait EncoderBackend: Send + Sync {
    fn spec(&self) -> EncoderSpec;

    fn name(&self) -> String;

    /// Width of the rows produced by [`EncoderBackend::forward`].
    fn output_dim(&self) -> usize;

    /// Whether training should update the encoder's parameters.
    fn trainable(&self) -> bool;

    fn param_layout(&self) -> Vec<TensorSpec>;

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn featurize(&self, text: &str) -> SparseVec;

    /// Row-major `[inputs.len() × output_dim]` features.
    fn forward(&self, params: &[f64], inputs: &[&SparseVec]) -> Vec<f64>;

    /// Accumulates parameter gradients given the forward output and the
    /// gradient of the loss with respect to it.
    fn backward(
        &self,
        params: &[f64],
        inputs: &[&SparseVec],
        output: &[f64],
        grad_output: &[f64],
        grad_params: &mut [f64],
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TinyHashConfig {
    pub min_n: usize,
    pub max_n: usize,
    /// Number of hash buckets.
    pub dim: usize,
    pub hidden: usize,
    pub hash_seed: u64,
    pub trainable: bool,
}

impl Default for TinyHashConfig {
    fn default() -> Self {
        Self {
            min_n: 3,
            max_n: 5,
            dim: 32768,
            hidden: 64,
            hash_seed: 0x5eed,
            trainable: true,
        }
    }
}

/// Hashed character n-grams followed by a ReLU projection.
#[derive(Debug, Clone)]
pub struct TinyHashEncoder {
    cfg: TinyHashConfig,
}

impl TinyHashEncoder {
    pub fn new(cfg: TinyHashConfig) -> Result<Self, ClassifierError> {
        if cfg.min_n == 0 || cfg.min_n > cfg.max_n {
            return Err(ClassifierError::InvalidConfig(format!(
                "n-gram range [{}, {}] is empty",
                cfg.min_n, cfg.max_n
            )));
        }
        if cfg.dim == 0 || cfg.dim > u32::MAX as usize || cfg.hidden == 0 {
            return Err(ClassifierError::InvalidConfig(
                "hash dimension and hidden size must be positive".into(),
            ));
        }
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &TinyHashConfig {
        &self.cfg
    }

    fn bucket(&self, gram: &[char]) -> u32 {
        let mut h = FnvHasher::default();
        h.write_u64(self.cfg.hash_seed);
        for c in gram {
            h.write_u32(*c as u32);
        }
        (h.finish() % self.cfg.dim as u64) as u32
    }
}

impl EncoderBackend for TinyHashEncoder {
    fn spec(&self) -> EncoderSpec {
        EncoderSpec::TinyHash(self.cfg.clone())
    }

    fn name(&self) -> String {
        format!(
            "tiny-hash(n={}..{}, D={}, H={}{})",
            self.cfg.min_n,
            self.cfg.max_n,
            self.cfg.dim,
            self.cfg.hidden,
            if self.cfg.trainable { "" } else { ", frozen" }
        )
    }

    fn output_dim(&self) -> usize {
        self.cfg.hidden
    }

    fn trainable(&self) -> bool {
        self.cfg.trainable
    }

    fn param_layout(&self) -> Vec<TensorSpec> {
        vec![
            TensorSpec::new("encoder.proj.weight", &[self.cfg.dim, self.cfg.hidden]),
            TensorSpec::new("encoder.proj.bias", &[self.cfg.hidden]),
        ]
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        // inputs have unit norm, so unit-variance weights give unit-variance
        // pre-activations regardless of the bucket count
        let bound = 3f64.sqrt();
        let mut params: Vec<f64> = (0..self.cfg.dim * self.cfg.hidden)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        params.extend(std::iter::repeat_n(0.0, self.cfg.hidden));
        params
    }

    /// L2-normalized bucket counts of the lowercased text's character
    /// n-grams, with one space of padding on each side. Empty text gives the
    /// zero vector.
    fn featurize(&self, text: &str) -> SparseVec {
        if text.is_empty() {
            return SparseVec::default();
        }
        let chars: Vec<char> = std::iter::once(' ')
            .chain(text.chars().flat_map(char::to_lowercase))
            .chain(std::iter::once(' '))
            .collect();
        let mut buckets = Vec::new();
        for n in self.cfg.min_n..=self.cfg.max_n {
            buckets.extend(chars.windows(n).map(|g| self.bucket(g)));
        }
        if buckets.is_empty() {
            // shorter than the smallest n-gram: hash the whole padded text
            buckets.push(self.bucket(&chars));
        }
        buckets.sort_unstable();

        let mut row = SparseVec::default();
        for b in buckets {
            if row.indices.last() == Some(&b) {
                *row.values.last_mut().unwrap() += 1.0;
            } else {
                row.indices.push(b);
                row.values.push(1.0);
            }
        }
        let norm = row.norm();
        for v in &mut row.values {
            *v /= norm;
        }
        row
    }

    fn forward(&self, params: &[f64], inputs: &[&SparseVec]) -> Vec<f64> {
        let h = self.cfg.hidden;
        let (weight, bias) = params.split_at(self.cfg.dim * h);
        let mut out = Vec::with_capacity(inputs.len() * h);
        for x in inputs {
            let mut z = bias.to_vec();
            for (i, v) in x.iter() {
                let row = &weight[i * h..(i + 1) * h];
                for (zj, wj) in z.iter_mut().zip(row) {
                    *zj += v * wj;
                }
            }
            out.extend(z.into_iter().map(|z| z.max(0.0)));
        }
        out
    }

    fn backward(
        &self,
        _params: &[f64],
        inputs: &[&SparseVec],
        output: &[f64],
        grad_output: &[f64],
        grad_params: &mut [f64],
    ) {
        let h = self.cfg.hidden;
        let (grad_w, grad_b) = grad_params.split_at_mut(self.cfg.dim * h);
        for (n, x) in inputs.iter().enumerate() {
            let act = &output[n * h..(n + 1) * h];
            let dz: Vec<f64> = grad_output[n * h..(n + 1) * h]
                .iter()
                .zip(act)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect();
            for (gb, d) in grad_b.iter_mut().zip(&dz) {
                *gb += d;
            }
            for (i, v) in x.iter() {
                let row = &mut grad_w[i * h..(i + 1) * h];
                for (gw, d) in row.iter_mut().zip(&dz) {
                    *gw += v * d;
                }
            }
        }
    }
}
