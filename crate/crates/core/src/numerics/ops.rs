//! Row-wise activations and normalizations together with their adjoints.

use super::matrix::RealMatrix;
use crate::error::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Numerically stable softmax over each row.
pub fn softmax_rows(x: &RealMatrix) -> RealMatrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Given `y = softmax_rows(s)` and `∂ℓ/∂y`, returns `∂ℓ/∂s`.
pub fn softmax_rows_backward(y: &RealMatrix, grad_y: &RealMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let yr = y.row(r);
        let gr = grad_y.row(r);
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((o, a), g) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
            *o = a * (g - dot);
        }
    }
    out
}

/// Saved state from a layer-norm evaluation.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    /// Standardized input before gain and bias.
    pub normalized: RealMatrix,
    pub inv_std: Vec<f64>,
}

/// Row-wise layer normalization with population variance.
pub fn layer_norm(x: &RealMatrix, gain: &[f64], bias: &[f64], eps: f64) -> Result<RealMatrix> {
    if x.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "layer_norm needs at least 2 columns, got {}",
            x.cols()
        )));
    }
    if gain.len() != x.cols() || bias.len() != x.cols() {
        return Err(Error::shape(
            "layer_norm",
            format!("gain/bias of length {}", x.cols()),
            format!("{}/{}", gain.len(), bias.len()),
        ));
    }
    Ok(layer_norm_cached(x, gain, bias, eps).0)
}

pub(crate) fn layer_norm_cached(
    x: &RealMatrix,
    gain: &[f64],
    bias: &[f64],
    eps: f64,
) -> (RealMatrix, LayerNormCache) {
    let cols = x.cols() as f64;
    let mut normalized = RealMatrix::zeros(x.rows(), x.cols());
    let mut out = RealMatrix::zeros(x.rows(), x.cols());
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / cols;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols;
        let is = 1.0 / (var + eps).sqrt();
        inv_std.push(is);
        for (c, v) in row.iter().enumerate() {
            let n = (v - mean) * is;
            normalized.set(r, c, n);
            out.set(r, c, n * gain[c] + bias[c]);
        }
    }
    (
        out,
        LayerNormCache {
            normalized,
            inv_std,
        },
    )
}

/// Adjoint of [`layer_norm`]. Accumulates into `grad_gain` / `grad_bias` and
/// returns `∂ℓ/∂x`.
pub(crate) fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &[f64],
    grad_out: &RealMatrix,
    grad_gain: &mut [f64],
    grad_bias: &mut [f64],
) -> RealMatrix {
    let (rows, cols) = grad_out.shape();
    let mut grad_in = RealMatrix::zeros(rows, cols);
    let mut gx = vec![0.0; cols];
    for r in 0..rows {
        let g = grad_out.row(r);
        let xh = cache.normalized.row(r);
        for c in 0..cols {
            grad_gain[c] += g[c] * xh[c];
            grad_bias[c] += g[c];
            gx[c] = g[c] * gain[c];
        }
        let mean_g = gx.iter().sum::<f64>() / cols as f64;
        let mean_gx = gx.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / cols as f64;
        let is = cache.inv_std[r];
        for (c, o) in grad_in.row_mut(r).iter_mut().enumerate() {
            *o = is * (gx[c] - mean_g - xh[c] * mean_gx);
        }
    }
    grad_in
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// GELU, tanh form.
#[inline]
pub fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

#[inline]
pub fn gelu_derivative(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
