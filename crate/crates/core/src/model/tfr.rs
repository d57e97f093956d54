//! Temporal feature refinement in the frequency domain.
//!
//! 1. Energy equalization: the look-back spectrum plus its flipped copy,
//!    taken back to the time domain.
//! 2. Moving-average trend / seasonal split of the equalized series, each
//!    part mapped `L → D` by its own feed-forward block and summed.
//! 3. Energy restoration: the flipped spectrum goes through a complex affine
//!    map `L → D` and is subtracted in the frequency domain of the summed
//!    features; the real part of the inverse transform is the output.

use num_complex::Complex64;

use super::config::ModelConfig;
use super::layers::FeedForwardCache;
use super::params::TfrParams;
use crate::error::Result;
use crate::numerics::{dft_rows_real, flip_spectrum, idft_rows, moving_avg_decompose, ComplexMatrix, RealMatrix};

/// Energy-equalized series `Re(IDFT(X + flip(X)))`, `X = DFT(x)`.
pub fn energy_equalize(x: &RealMatrix) -> Result<RealMatrix> {
    let spec = dft_rows_real(x)?;
    let flipped = flip_spectrum(&spec);
    Ok(idft_rows(&spec.add(&flipped))?.real_part())
}

#[derive(Clone, Debug)]
pub(crate) struct TfrCache {
    flipped: ComplexMatrix,
    trend: FeedForwardCache,
    season: FeedForwardCache,
}

pub fn tfr_forward(x_p: &RealMatrix, p: &TfrParams, cfg: &ModelConfig) -> Result<RealMatrix> {
    Ok(tfr_forward_cached(x_p, p, cfg)?.0)
}

pub(crate) fn tfr_forward_cached(x_p: &RealMatrix, p: &TfrParams, cfg: &ModelConfig) -> Result<(RealMatrix, TfrCache)> {
    let spec = dft_rows_real(x_p)?;
    let flipped = flip_spectrum(&spec);
    let equalized = idft_rows(&spec.add(&flipped))?.real_part();
    let (trend, season) = moving_avg_decompose(&equalized, cfg.kernel)?;

    let (trend_out, trend_cache) = p.trend.forward_cached(&trend);
    let (season_out, season_cache) = p.season.forward_cached(&season);
    let features = trend_out.add(&season_out);

    let mut projected = flipped.matmul(&p.spectral_weight);
    projected.add_row_broadcast(&p.spectral_bias);
    let out = idft_rows(&dft_rows_real(&features)?.sub(&projected))?.real_part();
    Ok((
        out,
        TfrCache {
            flipped,
            trend: trend_cache,
            season: season_cache,
        },
    ))
}

/// Accumulates parameter gradients. The look-back is data, so no input
/// gradient is produced.
pub(crate) fn tfr_backward(cache: &TfrCache, p: &TfrParams, g: &RealMatrix, grad: &mut TfrParams) -> Result<()> {
    // out = Re(IDFT(DFT(features) − P)) = features − Re(IDFT(P)) for real
    // features, so the features receive `g` unchanged.
    p.trend.backward(&cache.trend, g, &mut grad.trend, false);
    p.season.backward(&cache.season, g, &mut grad.season, false);

    // ∂ℓ/∂P (as ∂/∂re + i·∂/∂im) = −DFT(g) / D
    let d = g.cols() as f64;
    let g_proj = dft_rows_real(g)?;
    let (n, l) = cache.flipped.shape();
    let dcols = g.cols();
    let gw = grad.spectral_weight.as_mut_slice();
    for row in 0..n {
        for j in 0..l {
            let f = cache.flipped.get(row, j).conj();
            for c in 0..dcols {
                let gp = -g_proj.get(row, c) / d;
                let z = f * gp;
                let idx = 2 * (j * dcols + c);
                gw[idx] += z.re;
                gw[idx + 1] += z.im;
            }
        }
    }
    let gb = grad.spectral_bias.as_mut_slice();
    for row in 0..n {
        for c in 0..dcols {
            let gp: Complex64 = -g_proj.get(row, c) / d;
            gb[2 * c] += gp.re;
            gb[2 * c + 1] += gp.im;
        }
    }
    Ok(())
}
