use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// One direction of an LSTM layer. Gate blocks are stacked in the order
/// input, forget, cell, output: rows `[0, H)` belong to the input gate,
/// `[H, 2H)` to the forget gate and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirectionParams {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4H x D`, row-major.
    pub w: Vec<f64>,
    /// `4H x H`, row-major.
    pub u: Vec<f64>,
    /// `4H`.
    pub b: Vec<f64>,
}

impl LstmDirectionParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmDirectionParams {
            input_dim,
            hidden,
            w: vec![0.0; 4 * hidden * input_dim],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Glorot-uniform input weights, orthogonal recurrent weights, zero bias
    /// except a forget-gate bias of one.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        glorot_uniform(&mut p.w, input_dim, 4 * hidden, rng);
        orthogonal_columns(&mut p.u, 4 * hidden, hidden, rng);
        p.b[hidden..2 * hidden].fill(1.0);
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmLayer {
    pub forward: LstmDirectionParams,
    pub backward: LstmDirectionParams,
}

/// Stacked bidirectional LSTM with a dense softmax head. Also used as the
/// gradient container, since gradients share the parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmStack {
    pub layers: Vec<BiLstmLayer>,
    /// `classes x 2H`, row-major.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

/// Dimensions that fully determine the parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StackShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
}

impl StackShape {
    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            2 * self.hidden
        }
    }
}

impl BiLstmStack {
    pub fn zeros(shape: StackShape) -> Self {
        let layers = (0..shape.layers)
            .map(|l| {
                let d = shape.layer_input_dim(l);
                BiLstmLayer {
                    forward: LstmDirectionParams::zeros(d, shape.hidden),
                    backward: LstmDirectionParams::zeros(d, shape.hidden),
                }
            })
            .collect();
        BiLstmStack {
            layers,
            head_w: vec![0.0; shape.classes * 2 * shape.hidden],
            head_b: vec![0.0; shape.classes],
        }
    }

    pub fn init(shape: StackShape, rng: &mut impl Rng) -> Self {
        let layers = (0..shape.layers)
            .map(|l| {
                let d = shape.layer_input_dim(l);
                BiLstmLayer {
                    forward: LstmDirectionParams::init(d, shape.hidden, rng),
                    backward: LstmDirectionParams::init(d, shape.hidden, rng),
                }
            })
            .collect();
        let mut head_w = vec![0.0; shape.classes * 2 * shape.hidden];
        glorot_uniform(&mut head_w, 2 * shape.hidden, shape.classes, rng);
        BiLstmStack {
            layers,
            head_w,
            head_b: vec![0.0; shape.classes],
        }
    }

    pub fn shape(&self) -> StackShape {
        let first = &self.layers.first().expect("stack has no layers").forward;
        StackShape {
            input_dim: first.input_dim,
            hidden: first.hidden,
            layers: self.layers.len(),
            classes: self.head_b.len(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.shape())
    }

    /// Parameter blocks in checkpoint order: for each layer, forward
    /// `W, U, b` then backward `W, U, b`; finally head `W, b`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(6 * self.layers.len() + 2);
        for layer in &self.layers {
            for dir in [&layer.forward, &layer.backward] {
                out.push(dir.w.as_slice());
                out.push(dir.u.as_slice());
                out.push(dir.b.as_slice());
            }
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(6 * self.layers.len() + 2);
        for layer in &mut self.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                out.push(dir.w.as_mut_slice());
                out.push(dir.u.as_mut_slice());
                out.push(dir.b.as_mut_slice());
            }
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites all parameters from a flat vector in checkpoint order.
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::config(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &BiLstmStack) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

fn glorot_uniform(out: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in out {
        *x = rng.random_range(-limit..limit);
    }
}

/// Fills a `rows x cols` matrix (`rows >= cols`) with orthonormal columns by
/// Gram-Schmidt on Gaussian samples.
fn orthogonal_columns(out: &mut [f64], rows: usize, cols: usize, rng: &mut impl Rng) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| StandardNormal.sample(rng)).collect();
        for q in &basis {
            let proj: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(q) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    for (c, q) in basis.iter().enumerate() {
        for (r, &x) in q.iter().enumerate() {
            out[r * cols + c] = x;
        }
    }
}
