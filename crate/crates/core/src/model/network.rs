//! Forward pass and backpropagation through time for one window.
//!
//! Cell equations per direction and step:
//!   i = σ(W_i x + U_i h' + b_i)   f = σ(W_f x + U_f h' + b_f)
//!   g = tanh(W_g x + U_g h' + b_g) o = σ(W_o x + U_o h' + b_o)
//!   c = f ⊙ c' + i ⊙ g            h = o ⊙ tanh(c)
//! where `h'`, `c'` are the previous step's states in the direction of
//! travel (zero at the first step).

use super::config::HeadInput;
use super::params::{BiLstmStack, LstmDirectionParams};
use crate::error::{Error, Result};
use crate::linalg::{gemv_acc, gemv_t_acc, ger_acc, sigmoid, softmax};

#[derive(Debug, Clone, Default)]
struct DirectionCache {
    /// Post-activation gates `[i, f, g, o]` per time position, `T x 4H`.
    gates: Vec<f64>,
    /// Cell states, `T x H`.
    cells: Vec<f64>,
    /// `tanh(c)`, `T x H`.
    tanh_cells: Vec<f64>,
    /// Hidden states, `T x H`.
    hidden: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    input: Vec<f64>,
    forward: DirectionCache,
    backward: DirectionCache,
}

/// Activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    steps: usize,
    layers: Vec<LayerCache>,
    /// Top-layer output, `T x 2H`.
    top: Vec<f64>,
    features: Vec<f64>,
    pub probs: Vec<f64>,
}

fn run_direction(
    params: &LstmDirectionParams,
    input: &[f64],
    steps: usize,
    reverse: bool,
    layer: usize,
) -> Result<DirectionCache> {
    let h = params.hidden;
    let d = params.input_dim;
    let mut cache = DirectionCache {
        gates: vec![0.0; steps * 4 * h],
        cells: vec![0.0; steps * h],
        tanh_cells: vec![0.0; steps * h],
        hidden: vec![0.0; steps * h],
    };
    let mut z = vec![0.0; 4 * h];
    for step in 0..steps {
        let t = if reverse { steps - 1 - step } else { step };
        let prev = (step > 0).then(|| if reverse { t + 1 } else { t - 1 });

        z.copy_from_slice(&params.b);
        gemv_acc(&mut z, &params.w, &input[t * d..(t + 1) * d]);
        if let Some(p) = prev {
            gemv_acc(&mut z, &params.u, &cache.hidden[p * h..(p + 1) * h]);
        }
        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for k in 0..h {
            gates[k] = sigmoid(z[k]);
            gates[h + k] = sigmoid(z[h + k]);
            gates[2 * h + k] = z[2 * h + k].tanh();
            gates[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        for k in 0..h {
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + k]);
            let c = gates[h + k] * c_prev + gates[k] * gates[2 * h + k];
            let tc = c.tanh();
            cache.cells[t * h + k] = c;
            cache.tanh_cells[t * h + k] = tc;
            cache.hidden[t * h + k] = gates[3 * h + k] * tc;
        }
        if cache.hidden[t * h..(t + 1) * h].iter().any(|x| !x.is_finite())
            || cache.cells[t * h..(t + 1) * h].iter().any(|x| !x.is_finite())
        {
            return Err(Error::Inference {
                layer,
                step: t,
                message: format!(
                    "non-finite activation in {} direction",
                    if reverse { "backward" } else { "forward" }
                ),
            });
        }
    }
    Ok(cache)
}

/// Runs the stack over a `steps x input_dim` window and returns class
/// probabilities together with the activations needed by [`backward_window`].
pub fn forward_trace(
    window: &[f64],
    stack: &BiLstmStack,
    head_input: HeadInput,
    target: usize,
) -> Result<ForwardTrace> {
    let shape = stack.shape();
    let h = shape.hidden;
    let steps = window.len() / shape.input_dim;
    if steps == 0 || steps * shape.input_dim != window.len() || target >= steps {
        return Err(Error::config(format!(
            "window of {} values does not fit {} inputs per step with target {}",
            window.len(),
            shape.input_dim,
            target
        )));
    }
    let mut layers = Vec::with_capacity(stack.layers.len());
    let mut input = window.to_vec();
    for (l, layer) in stack.layers.iter().enumerate() {
        let forward = run_direction(&layer.forward, &input, steps, false, l)?;
        let backward = run_direction(&layer.backward, &input, steps, true, l)?;
        let mut output = vec![0.0; steps * 2 * h];
        for t in 0..steps {
            output[t * 2 * h..t * 2 * h + h].copy_from_slice(&forward.hidden[t * h..(t + 1) * h]);
            output[t * 2 * h + h..(t + 1) * 2 * h].copy_from_slice(&backward.hidden[t * h..(t + 1) * h]);
        }
        layers.push(LayerCache {
            input: std::mem::replace(&mut input, output),
            forward,
            backward,
        });
    }
    let top = input;
    let features = match head_input {
        HeadInput::TargetPosition => top[target * 2 * h..(target + 1) * 2 * h].to_vec(),
        HeadInput::LastStep => {
            let mut f = top[(steps - 1) * 2 * h..(steps - 1) * 2 * h + h].to_vec();
            f.extend_from_slice(&top[h..2 * h]);
            f
        }
    };
    let mut logits = stack.head_b.clone();
    gemv_acc(&mut logits, &stack.head_w, &features);
    let probs = softmax(&logits);
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Inference {
            layer: stack.layers.len(),
            step: target,
            message: "non-finite output probabilities".into(),
        });
    }
    Ok(ForwardTrace {
        steps,
        layers,
        top,
        features,
        probs,
    })
}

/// Class probabilities for one window.
pub fn forward(window: &[f64], stack: &BiLstmStack, head_input: HeadInput, target: usize) -> Result<Vec<f64>> {
    forward_trace(window, stack, head_input, target).map(|t| t.probs)
}

/// Backpropagates one direction, accumulating parameter gradients and,
/// when `d_input` is given, the gradient with respect to the layer input.
#[allow(clippy::too_many_arguments)]
fn backward_direction(
    params: &LstmDirectionParams,
    grads: &mut LstmDirectionParams,
    input: &[f64],
    cache: &DirectionCache,
    d_hidden: &[f64],
    steps: usize,
    reverse: bool,
    mut d_input: Option<&mut [f64]>,
) {
    let h = params.hidden;
    let d = params.input_dim;
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for step in (0..steps).rev() {
        let t = if reverse { steps - 1 - step } else { step };
        let prev = (step > 0).then(|| if reverse { t + 1 } else { t - 1 });
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_cells[t * h + k];
            let dh = d_hidden[t * 2 * h + k] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            let c_prev = prev.map_or(0.0, |p| cache.cells[p * h + k]);
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = d_o * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        for (gb, z) in grads.b.iter_mut().zip(&dz) {
            *gb += z;
        }
        ger_acc(&mut grads.w, &dz, &input[t * d..(t + 1) * d]);
        dh_next.iter_mut().for_each(|x| *x = 0.0);
        if let Some(p) = prev {
            ger_acc(&mut grads.u, &dz, &cache.hidden[p * h..(p + 1) * h]);
            gemv_t_acc(&mut dh_next, &params.u, &dz);
        }
        if let Some(di) = d_input.as_deref_mut() {
            gemv_t_acc(&mut di[t * d..(t + 1) * d], &params.w, &dz);
        }
    }
}

/// Accumulates into `grads` the gradient of `scale * -ln p[label]` for one
/// traced window. The window itself receives no gradient.
pub fn backward_window(
    trace: &ForwardTrace,
    label: usize,
    scale: f64,
    stack: &BiLstmStack,
    grads: &mut BiLstmStack,
    head_input: HeadInput,
    target: usize,
) {
    let shape = stack.shape();
    let h = shape.hidden;
    let steps = trace.steps;

    let d_logits: Vec<f64> = trace
        .probs
        .iter()
        .enumerate()
        .map(|(k, p)| scale * (p - if k == label { 1.0 } else { 0.0 }))
        .collect();
    ger_acc(&mut grads.head_w, &d_logits, &trace.features);
    for (gb, d) in grads.head_b.iter_mut().zip(&d_logits) {
        *gb += d;
    }
    let mut d_features = vec![0.0; 2 * h];
    gemv_t_acc(&mut d_features, &stack.head_w, &d_logits);

    let mut d_out = vec![0.0; steps * 2 * h];
    match head_input {
        HeadInput::TargetPosition => {
            d_out[target * 2 * h..(target + 1) * 2 * h].copy_from_slice(&d_features);
        }
        HeadInput::LastStep => {
            let last = (steps - 1) * 2 * h;
            d_out[last..last + h].copy_from_slice(&d_features[..h]);
            d_out[h..2 * h].copy_from_slice(&d_features[h..]);
        }
    }
    debug_assert_eq!(trace.top.len(), d_out.len());

    for l in (0..stack.layers.len()).rev() {
        let params = &stack.layers[l];
        let cache = &trace.layers[l];
        let d_in_dim = shape.layer_input_dim(l);
        let mut d_input = (l > 0).then(|| vec![0.0; steps * d_in_dim]);
        let g = &mut grads.layers[l];
        backward_direction(
            &params.forward,
            &mut g.forward,
            &cache.input,
            &cache.forward,
            &d_out,
            steps,
            false,
            d_input.as_deref_mut(),
        );
        // The backward direction's slice of d_out starts H columns in.
        backward_direction(
            &params.backward,
            &mut g.backward,
            &cache.input,
            &cache.backward,
            &d_out[h..],
            steps,
            true,
            d_input.as_deref_mut(),
        );
        if let Some(di) = d_input {
            d_out = di;
        }
    }
}
