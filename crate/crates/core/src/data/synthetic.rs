use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::series::SeriesRecord;
use crate::error::{Error, Result};
use crate::numerics::{RealMatrix, SeedRng};

/// Coupled sinusoid benchmark.
///
/// `n_latents` sinusoids with seeded, distinct frequencies are shared by all
/// subjects (each subject draws its own phases). Variate `i` is
/// `Σ_j C[i][j]·s_j(t)` plus AR(1) noise, with a single seeded mixing matrix
/// `C` (entries uniform in `[−1, 1]`) shared across subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub subjects: usize,
    pub variates: usize,
    pub length: usize,
    pub latents: usize,
    pub noise_ar: f64,
    pub noise_std: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            subjects: 12,
            variates: 16,
            length: 800,
            latents: 4,
            noise_ar: 0.8,
            noise_std: 0.3,
        }
    }
}

/// Latent frequencies are drawn in cycles per sample from this band, one per
/// equal-width slot so that they never coincide.
const FREQ_BAND: (f64, f64) = (0.015, 0.12);

pub fn generate_synthetic(cfg: &SyntheticConfig, rng: &SeedRng) -> Result<Vec<SeriesRecord>> {
    if cfg.latents > cfg.variates {
        return Err(Error::InvalidArgument(format!(
            "latents ({}) must not exceed variates ({})",
            cfg.latents, cfg.variates
        )));
    }
    if cfg.variates == 0 || cfg.length == 0 {
        return Err(Error::InvalidArgument("variates and length must be positive".into()));
    }
    if !(cfg.noise_ar.abs() < 1.0) || !(cfg.noise_std >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need |noise_ar| < 1 and noise_std ≥ 0, got {} / {}",
            cfg.noise_ar, cfg.noise_std
        )));
    }

    let mut freq_rng = rng.stream("synthetic.frequencies");
    let slot = (FREQ_BAND.1 - FREQ_BAND.0) / cfg.latents.max(1) as f64;
    let freqs: Vec<f64> = (0..cfg.latents)
        .map(|j| FREQ_BAND.0 + slot * (j as f64 + freq_rng.random_range(0.1..0.9)))
        .collect();

    let mut mix_rng = rng.stream("synthetic.mixing");
    let mixing = RealMatrix::from_fn(cfg.variates, cfg.latents, |_, _| mix_rng.random_range(-1.0..=1.0));

    let stationary_std = cfg.noise_std / (1.0 - cfg.noise_ar * cfg.noise_ar).sqrt();
    (0..cfg.subjects)
        .map(|s| {
            let id = format!("sub{s:03}");
            let mut phase_rng = rng.stream(&format!("synthetic.{id}.phases"));
            let phases: Vec<f64> = (0..cfg.latents).map(|_| phase_rng.random_range(0.0..2.0 * PI)).collect();
            let latent = RealMatrix::from_fn(cfg.latents, cfg.length, |j, t| {
                (2.0 * PI * freqs[j] * t as f64 + phases[j]).sin()
            });
            let mut values = mixing.matmul(&latent);
            let mut noise_rng = rng.stream(&format!("synthetic.{id}.noise"));
            for v in 0..cfg.variates {
                let row = values.row_mut(v);
                let z: f64 = StandardNormal.sample(&mut noise_rng);
                let mut e = stationary_std * z;
                for x in row.iter_mut() {
                    *x += e;
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    e = cfg.noise_ar * e + cfg.noise_std * z;
                }
            }
            SeriesRecord::new(id, values)
        })
        .collect()
}
