//! Row-major dense kernels used by the recurrent layers.

/// `y += A x` for `A` with `y.len()` rows.
#[inline]
pub(crate) fn gemv_acc(y: &mut [f64], a: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(a.len(), y.len() * cols);
    for (yi, row) in y.iter_mut().zip(a.chunks_exact(cols)) {
        *yi += dot(row, x);
    }
}

/// `y += Aᵀ d` for `A` with `d.len()` rows.
#[inline]
pub(crate) fn gemv_t_acc(y: &mut [f64], a: &[f64], d: &[f64]) {
    let cols = y.len();
    debug_assert_eq!(a.len(), d.len() * cols);
    for (&di, row) in d.iter().zip(a.chunks_exact(cols)) {
        if di != 0.0 {
            axpy(y, di, row);
        }
    }
}

/// `A += d xᵀ`.
#[inline]
pub(crate) fn ger_acc(a: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    debug_assert_eq!(a.len(), d.len() * cols);
    for (&di, row) in d.iter().zip(a.chunks_exact_mut(cols)) {
        if di != 0.0 {
            axpy(row, di, x);
        }
    }
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators so the loop vectorizes; order is fixed.
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s += x * y;
    }
    s
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
