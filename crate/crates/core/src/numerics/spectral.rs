//! Row-wise discrete Fourier transforms and spectrum flipping.
//!
//! Convention: the forward transform uses the negative exponent and no
//! scaling, the inverse uses the positive exponent and a `1/K` factor:
//!
//! ```text
//! X[k] = Σ_n x[n]·e^{−2πi·kn/K}        x[n] = (1/K)·Σ_k X[k]·e^{+2πi·kn/K}
//! ```
//!
//! The transforms are evaluated as direct sums over a per-length twiddle
//! table, O(K²) per row. At the lengths the model uses (look-back and
//! embedding widths of a few hundred) this is not the bottleneck.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, RealMatrix};
use crate::error::{Error, Result};

fn twiddles(k: usize, sign: f64) -> Vec<Complex64> {
    (0..k)
        .map(|j| {
            let angle = sign * 2.0 * PI * j as f64 / k as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect()
}

fn check_complex(x: &ComplexMatrix, context: &str) -> Result<()> {
    if x.cols() == 0 {
        return Err(Error::InvalidArgument(format!("{context}: zero-length rows")));
    }
    if let Some((row, col)) = x.first_non_finite() {
        return Err(Error::NonFinite {
            context: context.to_string(),
            row,
            col,
        });
    }
    Ok(())
}

fn transform(x: &ComplexMatrix, sign: f64, scale: f64) -> ComplexMatrix {
    let k = x.cols();
    let tw = twiddles(k, sign);
    let mut out = ComplexMatrix::zeros(x.rows(), k);
    for r in 0..x.rows() {
        let row = x.row(r);
        for f in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut idx = 0usize;
            for v in &row {
                acc += v * tw[idx];
                idx += f;
                if idx >= k {
                    idx -= k;
                }
            }
            out.set(r, f, acc * scale);
        }
    }
    out
}

/// Forward DFT of every row of a complex matrix.
pub fn dft_rows(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_complex(x, "dft_rows")?;
    Ok(transform(x, -1.0, 1.0))
}

/// Forward DFT of every row of a real matrix.
pub fn dft_rows_real(x: &RealMatrix) -> Result<ComplexMatrix> {
    if x.cols() == 0 {
        return Err(Error::InvalidArgument("dft_rows: zero-length rows".into()));
    }
    if let Some((row, col)) = x.first_non_finite() {
        return Err(Error::NonFinite {
            context: "dft_rows".into(),
            row,
            col,
        });
    }
    Ok(transform(&ComplexMatrix::from_real(x), -1.0, 1.0))
}

/// Inverse DFT of every row, scaled by `1/K`.
pub fn idft_rows(x: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_complex(x, "idft_rows")?;
    Ok(transform(x, 1.0, 1.0 / x.cols() as f64))
}

/// Per row, `X'[k] = X[(K − k) mod K]`. Bin 0 maps to itself and applying the
/// flip twice is the identity.
pub fn flip_spectrum(x: &ComplexMatrix) -> ComplexMatrix {
    let k = x.cols();
    ComplexMatrix::from_fn(x.rows(), k, |r, c| x.get(r, (k - c) % k))
}
