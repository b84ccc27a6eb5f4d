//! Skip-gram with negative sampling: pair generation, the noise
//! distribution and the per-pair SGD step.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingMatrix, Vocab};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrainingPair {
    pub center: u32,
    pub context: u32,
}

/// Emits `(ids[i], ids[j])` for every `j != i` with `|i - j| <= span(i)`.
pub fn pairs_with_spans<F>(ids: &[u32], mut span: F) -> Vec<TrainingPair>
where
    F: FnMut(usize) -> usize,
{
    let mut pairs = Vec::new();
    for i in 0..ids.len() {
        let b = span(i);
        let lo = i.saturating_sub(b);
        let hi = (i + b + 1).min(ids.len());
        for j in lo..hi {
            if j != i {
                pairs.push(TrainingPair {
                    center: ids[i],
                    context: ids[j],
                });
            }
        }
    }
    pairs
}

/// Skip-gram pairs over one sequence. The effective span for each center is
/// drawn uniformly from `1..=window`.
pub fn generate_pairs<R: Rng>(ids: &[u32], window: usize, rng: &mut R) -> Vec<TrainingPair> {
    let window = window.max(1);
    pairs_with_spans(ids, |_| rng.random_range(1..=window))
}

/// Unigram counts raised to `power`, sampled by weight.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    dist: Option<WeightedIndex<f64>>,
    len: usize,
}

impl NoiseDistribution {
    pub const DEFAULT_POWER: f64 = 0.75;

    pub fn new(vocab: &Vocab, power: f64) -> Self {
        let weights: Vec<f64> = vocab.counts().iter().map(|&n| (n as f64).powf(power)).collect();
        NoiseDistribution {
            dist: WeightedIndex::new(&weights).ok(),
            len: weights.len(),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Option<u32> {
        self.dist.as_ref().map(|d| d.sample(rng) as u32)
    }

    /// Draws `k` noise ids, none equal to `exclude`. Gives up on a slot
    /// after a bounded number of rejections (only possible when almost all
    /// noise mass sits on `exclude`).
    pub fn sample_excluding<R: Rng>(&self, k: usize, exclude: u32, rng: &mut R, out: &mut Vec<u32>) {
        out.clear();
        if self.len < 2 {
            return;
        }
        for _ in 0..k {
            for _ in 0..32 {
                match self.sample(rng) {
                    Some(id) if id != exclude => {
                        out.push(id);
                        break;
                    }
                    Some(_) => continue,
                    None => return,
                }
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// -ln σ(x), evaluated without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SGNS loss -ln σ(u_o·v_c) - Σ ln σ(-u_n·v_c) at the current parameters.
pub fn sgns_loss(matrix: &EmbeddingMatrix, pair: TrainingPair, negatives: &[u32]) -> f64 {
    let v = matrix.input_row(pair.center);
    let mut loss = neg_log_sigmoid(dot(matrix.output_row(pair.context), v));
    for &n in negatives {
        loss += neg_log_sigmoid(-dot(matrix.output_row(n), v));
    }
    loss
}

/// Scratch space reused across steps.
#[derive(Debug, Default)]
pub(crate) struct SgnsScratch {
    grad_center: Vec<f64>,
    coeffs: Vec<(u32, f64)>,
}

/// One SGD step of size `alpha` on the SGNS loss for `pair`; returns the
/// loss before the update. All gradients are taken at the pre-update point,
/// so a repeated negative contributes the sum of its terms.
pub fn sgns_step(matrix: &mut EmbeddingMatrix, pair: TrainingPair, negatives: &[u32], alpha: f64) -> Result<f64> {
    sgns_step_with(matrix, pair, negatives, alpha, &mut SgnsScratch::default())
}

pub(crate) fn sgns_step_with(
    matrix: &mut EmbeddingMatrix,
    pair: TrainingPair,
    negatives: &[u32],
    alpha: f64,
    scratch: &mut SgnsScratch,
) -> Result<f64> {
    let dim = matrix.dim();
    let check = |id: u32| -> Result<()> {
        if (id as usize) < matrix.vocab().len() {
            Ok(())
        } else {
            Err(Error::Training(format!("character id {id} outside vocabulary")))
        }
    };
    check(pair.center)?;
    check(pair.context)?;
    for &n in negatives {
        check(n)?;
    }

    // dL/ds for each output row: σ(s) - 1 for the true context, σ(s) for noise.
    scratch.coeffs.clear();
    let mut loss = 0.0;
    {
        let v = matrix.input_row(pair.center);
        let s = dot(matrix.output_row(pair.context), v);
        loss += neg_log_sigmoid(s);
        scratch.coeffs.push((pair.context, sigmoid(s) - 1.0));
        for &n in negatives {
            let s = dot(matrix.output_row(n), v);
            loss += neg_log_sigmoid(-s);
            scratch.coeffs.push((n, sigmoid(s)));
        }
    }
    if !loss.is_finite() {
        return Err(Error::Training(format!(
            "non-finite loss for pair ({}, {})",
            pair.center, pair.context
        )));
    }

    scratch.grad_center.clear();
    scratch.grad_center.resize(dim, 0.0);
    for &(id, g) in &scratch.coeffs {
        for (acc, u) in scratch.grad_center.iter_mut().zip(matrix.output_row(id)) {
            *acc += g * u;
        }
    }
    let center = pair.center as usize * dim;
    for &(id, g) in &scratch.coeffs {
        let row = id as usize * dim;
        let (input, output) = (&matrix.input, &mut matrix.output);
        for k in 0..dim {
            output[row + k] -= alpha * g * input[center + k];
        }
    }
    for (x, g) in matrix.input[center..center + dim].iter_mut().zip(&scratch.grad_center) {
        *x -= alpha * g;
    }
    if scratch.grad_center.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient for pair ({}, {})",
            pair.center, pair.context
        )));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adjacency_pairs() {
        let p = pairs_with_spans(&[0, 1, 2], |_| 1);
        let got: Vec<_> = p.iter().map(|p| (p.center, p.context)).collect();
        assert_eq!(got, [(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert!(pairs_with_spans(&[7], |_| 5).is_empty());
    }

    #[test]
    fn full_window_pairs() {
        // Hand enumeration: every ordered (i, j), i != j, over 4 positions.
        let p = pairs_with_spans(&[0, 1, 2, 3], |_| 3);
        assert_eq!(p.len(), 12);
        let mut seen = std::collections::HashSet::new();
        for pair in &p {
            assert_ne!(pair.center, pair.context);
            assert!(seen.insert((pair.center, pair.context)));
        }
    }

    #[test]
    fn sampled_spans_stay_in_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ids: Vec<u32> = (0..40).collect();
        for p in generate_pairs(&ids, 4, &mut rng) {
            let d = (p.center as i64 - p.context as i64).abs();
            assert!((1..=4).contains(&d));
        }
    }

    #[test]
    fn zero_vectors_step() {
        let vocab = Vocab::from_counts([('a', 3), ('b', 2), ('c', 1)], 1);
        let mut m = EmbeddingMatrix::zeros(vocab, 4);
        let pair = TrainingPair { center: 0, context: 1 };
        let loss = sgns_step(&mut m, pair, &[2], 0.1).unwrap();
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
        // Output rows were zero, so the center vector gets no gradient.
        assert!(m.input_row(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn noise_excludes_context() {
        let vocab = Vocab::from_counts([('a', 100), ('b', 1), ('c', 1)], 1);
        let noise = NoiseDistribution::new(&vocab, 0.75);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut out = Vec::new();
        for _ in 0..200 {
            noise.sample_excluding(5, 0, &mut rng, &mut out);
            assert!(out.iter().all(|&n| n != 0));
        }
        let single = Vocab::from_counts([('a', 4)], 1);
        NoiseDistribution::new(&single, 0.75).sample_excluding(5, 0, &mut rng, &mut out);
        assert!(out.is_empty());
    }
}
