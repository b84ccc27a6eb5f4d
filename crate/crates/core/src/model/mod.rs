//! Stacked bidirectional LSTM boundary classifier over fixed context
//! windows of frozen character embeddings.

mod checkpoint;
mod config;
mod network;
mod params;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{classify_char, punctuate, CharClass, Label, LabelConfig, LabeledSequence};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

pub use checkpoint::Checkpoint;
pub use config::{HeadInput, ModelConfig};
pub use network::{backward_window, forward, forward_trace, ForwardTrace};
pub use params::{BiLstmLayer, BiLstmStack, LstmDirectionParams, StackShape};

/// Probability floor applied before taking the log in [`loss`].
pub const LOSS_EPSILON: f64 = 1e-12;

/// Examples per gradient chunk. Chunks are summed sequentially and then
/// reduced pairwise in index order, whatever the thread count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowExample {
    /// `context_len x dim`, row-major. Out-of-range rows are zero padding.
    pub window: Vec<f64>,
    pub label: Label,
}

/// Row source for one character: its vocabulary id, or the unknown vector.
fn row_ids(chars: &[char], matrix: &EmbeddingMatrix) -> Vec<Option<u32>> {
    chars.iter().map(|&c| matrix.vocab().id(c)).collect()
}

fn fill_window(out: &mut [f64], rows: &[Option<u32>], pos: usize, config: &ModelConfig, matrix: &EmbeddingMatrix) {
    let dim = matrix.dim();
    for k in 0..config.context_len {
        let dst = &mut out[k * dim..(k + 1) * dim];
        let src = (pos + k).checked_sub(config.context_offset).and_then(|i| rows.get(i));
        match src {
            Some(Some(id)) => dst.copy_from_slice(matrix.input_row(*id)),
            Some(None) => dst.copy_from_slice(matrix.unk_vector()),
            None => dst.fill(0.0),
        }
    }
}

fn check_matrix(matrix: &EmbeddingMatrix) -> Result<()> {
    if matrix.vocab().is_empty() {
        return Err(Error::config("embedding matrix has an empty vocabulary"));
    }
    Ok(())
}

/// One example per character. The window covers positions
/// `[i - offset, i - offset + context_len)`.
pub fn make_windows(
    seq: &LabeledSequence,
    matrix: &EmbeddingMatrix,
    config: &ModelConfig,
) -> Result<Vec<WindowExample>> {
    if seq.is_empty() {
        return Ok(Vec::new());
    }
    check_matrix(matrix)?;
    let rows = row_ids(seq.chars(), matrix);
    Ok((0..seq.len())
        .map(|i| {
            let mut window = vec![0.0; config.context_len * matrix.dim()];
            fill_window(&mut window, &rows, i, config, matrix);
            WindowExample {
                window,
                label: seq.labels()[i],
            }
        })
        .collect())
}

/// Categorical cross-entropy `-ln probs[label]`, floored at [`LOSS_EPSILON`].
pub fn loss(probs: &[f64], label: Label) -> f64 {
    let p = probs[label.index()];
    if p < LOSS_EPSILON {
        log::warn!("probability {p:e} for the true class clamped to {LOSS_EPSILON:e}");
        -LOSS_EPSILON.ln()
    } else {
        -p.ln()
    }
}

fn chunk_gradient(
    chunk: &[WindowExample],
    stack: &BiLstmStack,
    config: &ModelConfig,
    scale: f64,
) -> Result<(BiLstmStack, f64)> {
    let mut grads = stack.zeros_like();
    let mut loss_sum = 0.0;
    for ex in chunk {
        let trace = forward_trace(&ex.window, stack, config.head_input, config.context_offset)?;
        loss_sum += loss(&trace.probs, ex.label);
        backward_window(
            &trace,
            ex.label.index(),
            scale,
            stack,
            &mut grads,
            config.head_input,
            config.context_offset,
        );
    }
    Ok((grads, loss_sum))
}

fn tree_reduce(mut parts: Vec<(BiLstmStack, f64)>) -> (BiLstmStack, f64) {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((mut g, l)) = it.next() {
            match it.next() {
                Some((g2, l2)) => {
                    g.add_assign(&g2);
                    next.push((g, l + l2));
                }
                None => next.push((g, l)),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

/// Gradients of the mean batch loss with respect to every parameter, and
/// the mean loss itself.
pub fn backward(batch: &[WindowExample], stack: &BiLstmStack, config: &ModelConfig) -> Result<(BiLstmStack, f64)> {
    backward_impl(batch, stack, config, false)
}

/// [`backward`] with chunks spread over the current rayon pool. The
/// reduction order is the same, so the result is bit-identical.
pub fn backward_parallel(
    batch: &[WindowExample],
    stack: &BiLstmStack,
    config: &ModelConfig,
) -> Result<(BiLstmStack, f64)> {
    backward_impl(batch, stack, config, true)
}

fn backward_impl(
    batch: &[WindowExample],
    stack: &BiLstmStack,
    config: &ModelConfig,
    parallel: bool,
) -> Result<(BiLstmStack, f64)> {
    if batch.is_empty() {
        return Err(Error::config("backward on an empty batch"));
    }
    let scale = 1.0 / batch.len() as f64;
    let parts: Vec<(BiLstmStack, f64)> = if parallel {
        batch
            .par_chunks(GRAD_CHUNK)
            .map(|c| chunk_gradient(c, stack, config, scale))
            .collect::<Result<_>>()?
    } else {
        batch
            .chunks(GRAD_CHUNK)
            .map(|c| chunk_gradient(c, stack, config, scale))
            .collect::<Result<_>>()?
    };
    let (grads, loss_sum) = tree_reduce(parts);
    if !grads.is_finite() {
        return Err(Error::Training("non-finite gradient".into()));
    }
    Ok((grads, loss_sum * scale))
}

/// First and second moment estimates, flattened in checkpoint order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn for_stack(stack: &BiLstmStack) -> Self {
        Self::new(stack.param_count())
    }
}

/// One bias-corrected Adam step.
pub fn adam_update(
    stack: &mut BiLstmStack,
    grads: &BiLstmStack,
    state: &mut AdamState,
    config: &ModelConfig,
) -> Result<()> {
    let n = stack.param_count();
    if grads.shape() != stack.shape() || state.m.len() != n || state.v.len() != n {
        return Err(Error::config("Adam shapes do not match the parameter stack"));
    }
    state.t += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let lr = config.learning_rate;
    let eps = config.epsilon;
    let mut offset = 0;
    for (theta, g) in stack.tensors_mut().into_iter().zip(grads.tensors()) {
        let m = &mut state.m[offset..offset + theta.len()];
        let v = &mut state.v[offset..offset + theta.len()];
        for k in 0..theta.len() {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        offset += theta.len();
    }
    Ok(())
}

/// Parameters after training plus the mean loss of each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub stack: BiLstmStack,
    pub loss_curve: Vec<f64>,
}

/// Trains a fresh stack on every window of `train_seqs`. Windows are
/// reshuffled each epoch from the seeded generator; the embedding matrix
/// is only read.
pub fn train(train_seqs: &[LabeledSequence], matrix: &EmbeddingMatrix, config: &ModelConfig) -> Result<TrainOutcome> {
    train_with_threads(train_seqs, matrix, config, 1)
}

/// [`train`] with per-batch gradients computed on `threads` workers. The
/// result does not depend on the thread count.
pub fn train_with_threads(
    train_seqs: &[LabeledSequence],
    matrix: &EmbeddingMatrix,
    config: &ModelConfig,
    threads: usize,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_matrix(matrix)?;
    let rows: Vec<Vec<Option<u32>>> = train_seqs.iter().map(|s| row_ids(s.chars(), matrix)).collect();
    let mut index: Vec<(u32, u32)> = train_seqs
        .iter()
        .enumerate()
        .flat_map(|(s, seq)| (0..seq.len() as u32).map(move |p| (s as u32, p)))
        .collect();
    if index.is_empty() {
        return Err(Error::config("no training windows"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stack = BiLstmStack::init(config.shape(matrix.dim()), &mut rng);
    let mut adam = AdamState::for_stack(&stack);
    let mut loss_curve = Vec::with_capacity(config.epochs);

    let pool = (threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(threads).build())
        .transpose()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;

    let width = config.context_len * matrix.dim();
    let mut batch: Vec<WindowExample> = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        index.shuffle(&mut rng);
        let mut weighted_loss = 0.0;
        for chunk in index.chunks(config.batch_size) {
            batch.clear();
            for &(s, p) in chunk {
                let mut window = vec![0.0; width];
                fill_window(&mut window, &rows[s as usize], p as usize, config, matrix);
                batch.push(WindowExample {
                    window,
                    label: train_seqs[s as usize].labels()[p as usize],
                });
            }
            let (grads, batch_loss) = match &pool {
                Some(pool) => pool.install(|| backward_parallel(&batch, &stack, config)),
                None => backward(&batch, &stack, config),
            }
            .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            adam_update(&mut stack, &grads, &mut adam, config)?;
            weighted_loss += batch_loss * chunk.len() as f64;
        }
        let mean = weighted_loss / index.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean:.6}");
        loss_curve.push(mean);
    }
    Ok(TrainOutcome { stack, loss_curve })
}

/// Per-character labels: boundary only when its probability is strictly
/// greater, so a tie goes to non-boundary.
pub fn predict_boundaries(
    chars: &[char],
    matrix: &EmbeddingMatrix,
    stack: &BiLstmStack,
    config: &ModelConfig,
) -> Result<Vec<Label>> {
    if chars.is_empty() {
        return Ok(Vec::new());
    }
    check_matrix(matrix)?;
    let rows = row_ids(chars, matrix);
    let mut window = vec![0.0; config.context_len * matrix.dim()];
    (0..chars.len())
        .map(|i| {
            fill_window(&mut window, &rows, i, config, matrix);
            let p = forward(&window, stack, config.head_input, config.context_offset)?;
            Ok(if p[Label::Boundary.index()] > p[Label::NonBoundary.index()] {
                Label::Boundary
            } else {
                Label::NonBoundary
            })
        })
        .collect()
}

/// A trained classifier bundled with the embeddings it was trained on.
#[derive(Debug, Clone)]
pub struct Segmenter {
    pub matrix: EmbeddingMatrix,
    pub checkpoint: Checkpoint,
}

impl Segmenter {
    pub fn new(matrix: EmbeddingMatrix, checkpoint: Checkpoint) -> Result<Self> {
        if checkpoint.stack.shape().input_dim != matrix.dim() {
            return Err(Error::config(format!(
                "model expects {}-dimensional embeddings, matrix has {}",
                checkpoint.stack.shape().input_dim,
                matrix.dim()
            )));
        }
        Ok(Segmenter { matrix, checkpoint })
    }

    pub fn predict(&self, chars: &[char]) -> Result<Vec<Label>> {
        predict_boundaries(chars, &self.matrix, &self.checkpoint.stack, &self.checkpoint.config)
    }

    /// Punctuates unpunctuated text line by line. Content characters are
    /// classified; delimiters already present are dropped and other
    /// characters pass through.
    pub fn segment_text(&self, text: &str, labels: &LabelConfig) -> Result<String> {
        let mut out = String::with_capacity(text.len() * 2);
        for (n, line) in text.split('\n').enumerate() {
            if n > 0 {
                out.push('\n');
            }
            let chars: Vec<char> = line
                .chars()
                .filter(|&c| classify_char(c, labels) == CharClass::Content)
                .collect();
            let predicted = self.predict(&chars)?;
            let mut k = 0;
            for c in line.chars() {
                match classify_char(c, labels) {
                    CharClass::Content => {
                        out.push_str(&punctuate(&[c], &predicted[k..k + 1]));
                        k += 1;
                    }
                    CharClass::Delimiter => {}
                    CharClass::Ignorable => out.push(c),
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{strip_and_label, RawDocument};
    use crate::embedding::Vocab;

    fn matrix() -> EmbeddingMatrix {
        let vocab = Vocab::from_counts([('a', 3), ('b', 2), ('c', 1)], 1);
        let input = vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        EmbeddingMatrix::from_parts(vocab, 2, input, vec![0.0; 6]).unwrap()
    }

    fn seq(text: &str) -> LabeledSequence {
        strip_and_label(&RawDocument::new("s", text), &LabelConfig::default())
    }

    fn tiny() -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            layer_output_dim: 6,
            batch_size: 4,
            epochs: 2,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn window_padding() {
        let m = matrix();
        let w = make_windows(&seq("b"), &m, &ModelConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(
            w[0].window,
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            make_windows(&seq("abcabcabca"), &m, &ModelConfig::default())
                .unwrap()
                .len(),
            10
        );
        assert!(make_windows(&seq(""), &m, &ModelConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn interior_window_rows() {
        let m = matrix();
        let s = seq("abcabcz");
        let w = make_windows(&s, &m, &ModelConfig::default()).unwrap();
        // Position 3 sees characters 1..=6: b c a b c z(unknown).
        let want: Vec<f64> = ['b', 'c', 'a', 'b', 'c', 'z']
            .iter()
            .flat_map(|&c| m.lookup(c).unwrap().to_vec())
            .collect();
        assert_eq!(w[3].window, want);
        assert_eq!(m.lookup('z').unwrap(), &[2.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn loss_values() {
        assert!((loss(&[0.5, 0.5], Label::Boundary) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((loss(&[0.5, 0.5], Label::NonBoundary) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss(&[1.0, 0.0], Label::NonBoundary), 0.0);
        assert!((loss(&[0.9, 0.1], Label::Boundary) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!((loss(&[1.0, 0.0], Label::Boundary) - 27.631).abs() < 1e-3);
    }

    #[test]
    fn zero_network() {
        let m = matrix();
        let cfg = tiny();
        let stack = BiLstmStack::zeros(cfg.shape(2));
        let w = make_windows(&seq("abc"), &m, &cfg).unwrap();
        assert_eq!(forward(&w[1].window, &stack, cfg.head_input, 2).unwrap(), [0.5, 0.5]);
        let labels = predict_boundaries(&['a', 'b', 'c'], &m, &stack, &cfg).unwrap();
        assert_eq!(labels, [Label::NonBoundary; 3]);
        assert!(predict_boundaries(&[], &m, &stack, &cfg).unwrap().is_empty());

        let batch = make_windows(&seq("a。b"), &m, &cfg).unwrap();
        let (g, l) = backward(&batch, &stack, &cfg).unwrap();
        assert_eq!(g.head_b, [0.0, 0.0]);
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicated_example_same_gradient() {
        let m = matrix();
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stack = BiLstmStack::init(cfg.shape(2), &mut rng);
        let w = make_windows(&seq("abc。"), &m, &cfg).unwrap();
        let one = backward(&w[2..3], &stack, &cfg).unwrap();
        let two = backward(&[w[2].clone(), w[2].clone()], &stack, &cfg).unwrap();
        for (a, b) in one.0.flatten().iter().zip(two.0.flatten()) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
        assert!((one.1 - two.1).abs() < 1e-15);
        assert!(backward(&[], &stack, &cfg).is_err());
    }

    #[test]
    fn threads_do_not_change_gradients() {
        let m = matrix();
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let stack = BiLstmStack::init(cfg.shape(2), &mut rng);
        let w = make_windows(&seq(&"abc。ab，cab".repeat(8)), &m, &cfg).unwrap();
        let serial = backward(&w, &stack, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let parallel = pool.install(|| backward_parallel(&w, &stack, &cfg)).unwrap();
        assert_eq!(serial, parallel);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let cfg = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut stack = BiLstmStack::init(cfg.shape(2), &mut rng);
        let before = stack.clone();
        let mut state = AdamState::for_stack(&stack);
        adam_update(&mut stack, &before.zeros_like(), &mut state, &cfg).unwrap();
        assert_eq!(stack, before);
        assert_eq!(state.t, 1);
        let wrong = BiLstmStack::zeros(cfg.shape(3));
        assert!(adam_update(&mut stack, &wrong, &mut state, &cfg).is_err());
    }

    #[test]
    fn adam_identical_tensors_stay_identical() {
        let cfg = tiny();
        let mut stack = BiLstmStack::zeros(cfg.shape(2));
        let mut grads = stack.zeros_like();
        for (k, x) in grads.layers[0].forward.b.iter_mut().enumerate() {
            *x = (k as f64 - 5.0) * 0.3;
        }
        grads.layers[0].backward.b = grads.layers[0].forward.b.clone();
        let mut state = AdamState::for_stack(&stack);
        for _ in 0..3 {
            adam_update(&mut stack, &grads, &mut state, &cfg).unwrap();
        }
        assert_eq!(stack.layers[0].forward.b, stack.layers[0].backward.b);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let m = matrix();
        let cfg = ModelConfig { epochs: 0, ..tiny() };
        let out = train(&[seq("abc。")], &m, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        assert_eq!(out.stack, BiLstmStack::init(cfg.shape(2), &mut rng));
        assert!(out.loss_curve.is_empty());
    }

    #[test]
    fn train_is_deterministic_and_rejects_empty() {
        let m = matrix();
        let data = vec![seq("abc。cab，bca。"), seq("aabbcc。")];
        let a = train(&data, &m, &tiny()).unwrap();
        let b = train(&data, &m, &tiny()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.loss_curve.len(), 2);
        assert!(matches!(train(&[seq("。")], &m, &tiny()), Err(Error::Config(_))));
    }

    #[test]
    fn segment_text_inserts_full_stops() {
        let m = matrix();
        let cfg = tiny();
        let mut stack = BiLstmStack::zeros(cfg.shape(2));
        // Bias toward boundary everywhere.
        stack.head_b = vec![0.0, 1.0];
        let seg = Segmenter::new(m, Checkpoint::new(cfg, stack, Vec::new())).unwrap();
        let out = seg.segment_text("ab，c\nb", &LabelConfig::default()).unwrap();
        assert_eq!(out, "a。b。c。\nb。");
    }
}
