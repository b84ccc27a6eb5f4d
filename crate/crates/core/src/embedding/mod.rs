//! Character embeddings trained with skip-gram and negative sampling.
//!
//! Embeddings are trained once per corpus set and then frozen: the
//! classifier reads them but never updates them.

mod io;
mod sgns;
mod vocab;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSequence;
use crate::error::{Error, Result};

pub use sgns::{generate_pairs, pairs_with_spans, sgns_loss, sgns_step, NoiseDistribution, TrainingPair};
pub use vocab::Vocab;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Maximum distance to a context character, per side.
    pub window: usize,
    pub min_count: u64,
    pub epochs: usize,
    /// Words per learning-rate update.
    pub batch_words: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    /// Final learning rate as a fraction of the initial one.
    pub min_learning_rate_fraction: f64,
    /// Frequent-character downsampling threshold; `None` keeps everything.
    pub subsample: Option<f64>,
    pub noise_power: f64,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 300,
            window: 12,
            min_count: 1,
            epochs: 50,
            batch_words: 8000,
            negatives: 5,
            learning_rate: 0.025,
            min_learning_rate_fraction: 1e-4,
            subsample: None,
            noise_power: NoiseDistribution::DEFAULT_POWER,
            seed: 1,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("embedding dim must be positive"));
        }
        if self.window == 0 {
            return Err(Error::config("window must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("embedding epochs must be at least 1"));
        }
        if self.batch_words == 0 {
            return Err(Error::config("batch_words must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::config("embedding learning rate must be positive"));
        }
        Ok(())
    }
}

/// Input vectors (the embeddings proper) and negative-sampling output
/// vectors, one row per vocabulary character.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocab,
    dim: usize,
    pub(crate) input: Vec<f64>,
    pub(crate) output: Vec<f64>,
    unk: Vec<f64>,
    config: EmbeddingConfig,
    /// Mean loss per epoch, recorded during training.
    epoch_losses: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(vocab: Vocab, dim: usize) -> Self {
        let n = vocab.len() * dim;
        EmbeddingMatrix {
            vocab,
            dim,
            input: vec![0.0; n],
            output: vec![0.0; n],
            unk: vec![0.0; dim],
            config: EmbeddingConfig {
                dim,
                ..EmbeddingConfig::default()
            },
            epoch_losses: Vec::new(),
        }
    }

    /// Builds a matrix from explicit row-major blocks and freezes it.
    pub fn from_parts(vocab: Vocab, dim: usize, input: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        let n = vocab.len() * dim;
        if input.len() != n || output.len() != n {
            return Err(Error::config(format!(
                "expected {} values per block for {} x {}, got {} and {}",
                n,
                vocab.len(),
                dim,
                input.len(),
                output.len()
            )));
        }
        let mut m = EmbeddingMatrix {
            vocab,
            dim,
            input,
            output,
            unk: Vec::new(),
            config: EmbeddingConfig {
                dim,
                ..EmbeddingConfig::default()
            },
            epoch_losses: Vec::new(),
        };
        m.freeze();
        Ok(m)
    }

    /// word2vec initialization: inputs uniform in ±0.5/dim, outputs zero.
    pub fn random(vocab: Vocab, dim: usize, rng: &mut impl Rng) -> Self {
        let mut m = Self::zeros(vocab, dim);
        let scale = 0.5 / dim as f64;
        for x in &mut m.input {
            *x = rng.random_range(-scale..scale);
        }
        m
    }

    /// Recomputes the out-of-vocabulary vector (the mean input vector).
    pub fn freeze(&mut self) {
        self.unk = vec![0.0; self.dim];
        let n = self.vocab.len();
        if n == 0 {
            return;
        }
        for row in self.input.chunks_exact(self.dim) {
            for (u, x) in self.unk.iter_mut().zip(row) {
                *u += x;
            }
        }
        for u in &mut self.unk {
            *u /= n as f64;
        }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &EmbeddingConfig {
        &self.config
    }

    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub fn input_vectors(&self) -> &[f64] {
        &self.input
    }

    pub fn output_vectors(&self) -> &[f64] {
        &self.output
    }

    pub fn input_row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.input[start..start + self.dim]
    }

    pub fn output_row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.output[start..start + self.dim]
    }

    pub fn input_row_mut(&mut self, id: u32) -> &mut [f64] {
        let start = id as usize * self.dim;
        &mut self.input[start..start + self.dim]
    }

    pub fn output_row_mut(&mut self, id: u32) -> &mut [f64] {
        let start = id as usize * self.dim;
        &mut self.output[start..start + self.dim]
    }

    pub fn unk_vector(&self) -> &[f64] {
        &self.unk
    }

    /// The input vector of `c`, or the mean vector for unseen characters.
    pub fn lookup(&self, c: char) -> Result<&[f64]> {
        if self.vocab.is_empty() {
            return Err(Error::config("lookup in an empty embedding matrix"));
        }
        Ok(match self.vocab.id(c) {
            Some(id) => self.input_row(id),
            None => &self.unk,
        })
    }

    pub fn cosine(&self, a: char, b: char) -> Result<f64> {
        let (x, y) = (self.lookup(a)?, self.lookup(b)?);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
        Ok(if nx == 0.0 || ny == 0.0 { 0.0 } else { dot / (nx * ny) })
    }
}

/// word2vec's frequent-word downsampling keep probability.
fn keep_probability(count: u64, total: u64, threshold: f64) -> f64 {
    let t = threshold * total as f64;
    let f = count as f64;
    ((f / t).sqrt() + 1.0) * t / f
}

/// Trains embeddings over the union of `sequences` (the caller passes the
/// training portions of the chosen corpora). Single-threaded and seeded, so
/// identical inputs give bit-identical matrices.
pub fn train_embeddings(sequences: &[LabeledSequence], config: &EmbeddingConfig) -> Result<EmbeddingMatrix> {
    config.validate()?;
    let vocab = Vocab::build(sequences, config.min_count);
    if vocab.is_empty() {
        return Err(Error::config("embedding vocabulary is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut matrix = EmbeddingMatrix::random(vocab, config.dim, &mut rng);
    matrix.config = config.clone();
    let noise = NoiseDistribution::new(&matrix.vocab, config.noise_power);

    let encoded: Vec<Vec<u32>> = sequences
        .iter()
        .map(|s| s.chars().iter().filter_map(|&c| matrix.vocab.id(c)).collect())
        .collect();
    let words_per_epoch: u64 = encoded.iter().map(|s| s.len() as u64).sum();
    let total_words = (words_per_epoch * config.epochs as u64).max(1);
    let keep: Option<Vec<f64>> = config.subsample.filter(|&t| t > 0.0).map(|t| {
        let total = matrix.vocab.total_count();
        matrix
            .vocab
            .counts()
            .iter()
            .map(|&n| keep_probability(n, total, t))
            .collect()
    });

    let alpha0 = config.learning_rate;
    let alpha_min = alpha0 * config.min_learning_rate_fraction;
    let mut alpha = alpha0;
    let mut words_done: u64 = 0;
    let mut next_update: u64 = config.batch_words as u64;
    let mut scratch = sgns::SgnsScratch::default();
    let mut negatives = Vec::with_capacity(config.negatives);
    let mut kept = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut loss_n: u64 = 0;
        for (seq_idx, ids) in encoded.iter().enumerate() {
            kept.clear();
            match &keep {
                Some(p) => kept.extend(ids.iter().copied().filter(|&id| rng.random::<f64>() < p[id as usize])),
                None => kept.extend_from_slice(ids),
            }
            for (pos, &center) in kept.iter().enumerate() {
                if words_done >= next_update {
                    let progress = words_done as f64 / total_words as f64;
                    alpha = (alpha0 - (alpha0 - alpha_min) * progress).max(alpha_min);
                    next_update += config.batch_words as u64;
                }
                let b = rng.random_range(1..=config.window);
                let lo = pos.saturating_sub(b);
                let hi = (pos + b + 1).min(kept.len());
                for (j, &context) in kept.iter().enumerate().take(hi).skip(lo) {
                    if j == pos {
                        continue;
                    }
                    let pair = TrainingPair { center, context };
                    noise.sample_excluding(config.negatives, pair.context, &mut rng, &mut negatives);
                    let loss =
                        sgns::sgns_step_with(&mut matrix, pair, &negatives, alpha, &mut scratch).map_err(|e| {
                            Error::Training(format!("epoch {epoch}, sequence {seq_idx}, position {pos}: {e}"))
                        })?;
                    loss_sum += loss;
                    loss_n += 1;
                }
                words_done += 1;
            }
            // Positions dropped by downsampling still count toward progress.
            words_done += (ids.len() - kept.len()) as u64;
        }
        let mean = if loss_n > 0 { loss_sum / loss_n as f64 } else { 0.0 };
        log::debug!("embedding epoch {epoch}: mean loss {mean:.6}, alpha {alpha:.6}");
        epoch_losses.push(mean);
    }
    matrix.epoch_losses = epoch_losses;
    matrix.freeze();
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{strip_and_label, LabelConfig, RawDocument};

    fn seq(text: &str) -> LabeledSequence {
        strip_and_label(&RawDocument::new("d", text), &LabelConfig::default())
    }

    fn small_config() -> EmbeddingConfig {
        EmbeddingConfig {
            dim: 16,
            window: 2,
            epochs: 5,
            batch_words: 100,
            seed: 9,
            ..EmbeddingConfig::default()
        }
    }

    #[test]
    fn lookup_rows_and_fallback() {
        let vocab = Vocab::from_counts([('a', 2), ('b', 1)], 1);
        let m = EmbeddingMatrix::from_parts(vocab, 2, vec![1.0, 2.0, 3.0, 6.0], vec![0.0; 4]).unwrap();
        assert_eq!(m.lookup('a').unwrap(), &[1.0, 2.0]);
        assert_eq!(m.lookup('b').unwrap(), &[3.0, 6.0]);
        assert_eq!(m.lookup('z').unwrap(), &[2.0, 4.0]);
        let empty = EmbeddingMatrix::zeros(Vocab::default(), 4);
        assert!(empty.lookup('a').is_err());
    }

    #[test]
    fn rejects_empty_vocab() {
        assert!(matches!(
            train_embeddings(&[seq("。，")], &small_config()),
            Err(Error::Config(_))
        ));
        assert!(train_embeddings(&[], &small_config()).is_err());
    }

    #[test]
    fn deterministic() {
        let data = vec![seq("甲乙丙丁甲乙丙丁戊己"), seq("乙丙丁戊")];
        let a = train_embeddings(&data, &small_config()).unwrap();
        let b = train_embeddings(&data, &small_config()).unwrap();
        assert_eq!(a, b);
        assert!(a.input.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn subsampling_runs() {
        let data = vec![seq(&"甲乙甲丙甲丁".repeat(30))];
        let cfg = EmbeddingConfig {
            subsample: Some(1e-2),
            ..small_config()
        };
        let m = train_embeddings(&data, &cfg).unwrap();
        assert_eq!(m.epoch_losses().len(), 5);
    }

    #[test]
    fn keep_probability_shrinks_with_frequency() {
        assert!(keep_probability(1000, 10_000, 1e-3) < keep_probability(10, 10_000, 1e-3));
    }
}
