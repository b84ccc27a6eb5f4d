//! Oracles shared by the gradient tests and the acceptance suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tangseg::corpus::Label;
use tangseg::embedding::{sgns_step, EmbeddingMatrix, TrainingPair, Vocab};
use tangseg::model::{backward, forward, BiLstmStack, HeadInput, ModelConfig, WindowExample};

const H: f64 = 1e-5;
// Central differences at h = 1e-5 carry rounding noise near 1e-11, so
// relative error is meaningless for gradients far below this floor.
const FLOOR: f64 = 1e-8;

/// |a - n| / max(|a|, |n|), with the denominator floored so that
/// coordinates whose true gradient is zero are judged on absolute error.
fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn oracle_sgns_loss(input: &[f64], output: &[f64], dim: usize, pair: TrainingPair, negs: &[u32]) -> f64 {
    let row = |m: &[f64], id: u32| m[id as usize * dim..(id as usize + 1) * dim].to_vec();
    let v = row(input, pair.center);
    let dot = |u: Vec<f64>| u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mut l = -sig(dot(row(output, pair.context))).ln();
    for &n in negs {
        l -= sig(-dot(row(output, n))).ln();
    }
    l
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingMatrix {
    let vocab = Vocab::from_counts(
        (0..n).map(|i| (char::from_u32(0x4e00 + i as u32).unwrap(), (n - i) as u64)),
        1,
    );
    let input = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let output = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingMatrix::from_parts(vocab, dim, input, output).unwrap()
}

/// Returns the largest relative error over all touched coordinates.
pub fn sgns_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 8;
    let dim = rng.random_range(3..=10);
    let m = random_matrix(&mut rng, n, dim);
    let center = rng.random_range(0..n as u32);
    let context = rng.random_range(0..n as u32);
    let negs: Vec<u32> = (0..rng.random_range(1..=5))
        .map(|_| loop {
            let k = rng.random_range(0..n as u32);
            if k != context {
                break k;
            }
        })
        .collect();
    let pair = TrainingPair { center, context };

    // Analytic gradient recovered from a unit SGD step: θ' = θ - 1·∇L.
    let mut stepped = m.clone();
    sgns_step(&mut stepped, pair, &negs, 1.0).unwrap();
    let grad_in: Vec<f64> = m
        .input_vectors()
        .iter()
        .zip(stepped.input_vectors())
        .map(|(a, b)| a - b)
        .collect();
    let grad_out: Vec<f64> = m
        .output_vectors()
        .iter()
        .zip(stepped.output_vectors())
        .map(|(a, b)| a - b)
        .collect();

    let mut worst: f64 = 0.0;
    let mut touched: Vec<(bool, u32)> = vec![(true, center), (false, context)];
    touched.extend(negs.iter().map(|&k| (false, k)));
    for (is_input, id) in touched {
        for k in 0..dim {
            let idx = id as usize * dim + k;
            let mut plus_in = m.input_vectors().to_vec();
            let mut plus_out = m.output_vectors().to_vec();
            let mut minus_in = plus_in.clone();
            let mut minus_out = plus_out.clone();
            if is_input {
                plus_in[idx] += H;
                minus_in[idx] -= H;
            } else {
                plus_out[idx] += H;
                minus_out[idx] -= H;
            }
            let numeric = (oracle_sgns_loss(&plus_in, &plus_out, dim, pair, &negs)
                - oracle_sgns_loss(&minus_in, &minus_out, dim, pair, &negs))
                / (2.0 * H);
            let analytic = if is_input { grad_in[idx] } else { grad_out[idx] };
            worst = worst.max(rel_error(analytic, numeric, FLOOR));
        }
    }
    worst
}

fn reduced_config(head_input: HeadInput) -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        layer_output_dim: 6,
        context_len: 6,
        context_offset: 2,
        head_input,
        ..ModelConfig::default()
    }
}

fn batch_loss(batch: &[WindowExample], stack: &BiLstmStack, cfg: &ModelConfig) -> f64 {
    batch
        .iter()
        .map(|ex| -forward(&ex.window, stack, cfg.head_input, cfg.context_offset).unwrap()[ex.label.index()].ln())
        .sum::<f64>()
        / batch.len() as f64
}

/// Largest relative error over every parameter of a random reduced stack.
pub fn bptt_instance(seed: u64, head_input: HeadInput) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = reduced_config(head_input);
    let dim = 4;
    let mut stack = BiLstmStack::zeros(cfg.shape(dim));
    for t in stack.tensors_mut() {
        for x in t.iter_mut() {
            *x = rng.random_range(-0.8..0.8);
        }
    }
    let batch: Vec<WindowExample> = (0..3)
        .map(|_| WindowExample {
            window: (0..cfg.context_len * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            label: if rng.random_bool(0.5) {
                Label::Boundary
            } else {
                Label::NonBoundary
            },
        })
        .collect();
    let (grads, _) = backward(&batch, &stack, &cfg).unwrap();
    let analytic = grads.flatten();
    let base = stack.flatten();
    let mut worst: f64 = 0.0;
    let mut probe = stack.clone();
    for (i, &a) in analytic.iter().enumerate() {
        let mut p = base.clone();
        p[i] = base[i] + H;
        probe.assign_flat(&p).unwrap();
        let up = batch_loss(&batch, &probe, &cfg);
        p[i] = base[i] - H;
        probe.assign_flat(&p).unwrap();
        let down = batch_loss(&batch, &probe, &cfg);
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max(rel_error(a, numeric, FLOOR));
    }
    worst
}

/// Per-position tally by explicit enumeration of the four cases, with the
/// metric definitions applied directly: (tp, fp, fn, tn, P, R, F1).
pub fn brute_force_report(gold: &[Label], pred: &[Label]) -> (u64, u64, u64, u64, f64, f64, f64) {
    let count = |g: Label, p: Label| gold.iter().zip(pred).filter(|&(&a, &b)| a == g && b == p).count() as u64;
    let tp = count(Label::Boundary, Label::Boundary);
    let fp = count(Label::NonBoundary, Label::Boundary);
    let fn_ = count(Label::Boundary, Label::NonBoundary);
    let tn = count(Label::NonBoundary, Label::NonBoundary);
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (tp, fp, fn_, tn, precision, recall, f1)
}
