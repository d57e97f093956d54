#![allow(dead_code)]

use braincast::data::WindowSample;
use braincast::model::ModelConfig;
use braincast::numerics::finite_diff_grad;
use braincast::train::{batch_mse_loss, compute_gradients};
use braincast::{ModelParams, RealMatrix, SeedRng};
use rand::Rng;

/// N=4, L=16, T=4, D=8, G=1, heads=2, ffn_hidden=8, kernel=3.
pub fn tiny_config() -> ModelConfig {
    let mut c = ModelConfig::new(4, 16, 4, 8, 1, 2);
    c.ffn_hidden = 8;
    c.tfr_hidden = 8;
    c.kernel = 3;
    c
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn sample(lookback: RealMatrix, horizon: RealMatrix) -> WindowSample {
    let n = lookback.rows();
    WindowSample {
        lookback,
        horizon,
        norm_mean: vec![0.0; n],
        norm_std: vec![1.0; n],
        subject_id: "s".into(),
        offset: 0,
    }
}

pub fn random_batch(cfg: &ModelConfig, count: usize, seed: u64) -> Vec<WindowSample> {
    let mut rng = SeedRng::new(seed).stream("batch");
    (0..count)
        .map(|_| {
            sample(
                random_matrix(&mut rng, cfg.variates, cfg.lookback, 1.5),
                random_matrix(&mut rng, cfg.variates, cfg.horizon, 1.0),
            )
        })
        .collect()
}

/// Seeded parameters with every scalar (biases and gains included) moved off
/// its initial value, so no gradient path is masked by a zero.
pub fn perturbed_params(cfg: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(cfg, &SeedRng::new(seed)).unwrap();
    let mut rng = SeedRng::new(seed).stream("perturb");
    let noisy: Vec<f64> = p.flatten().iter().map(|v| v + rng.random_range(-0.2..0.2)).collect();
    p.assign_flat(&noisy).unwrap();
    p
}

/// Worst per-group error `max|analytic − numeric| / max(max|numeric|, 1e-6)`,
/// and the group that produced it.
pub fn gradient_check(cfg: &ModelConfig, params: &ModelParams, batch: &[WindowSample], h: f64) -> Vec<(String, f64)> {
    let analytic = compute_gradients(params, batch, cfg).unwrap().grads;
    let loss = |flat: &[f64]| {
        let mut q = params.clone();
        q.assign_flat(flat).unwrap();
        let preds: Vec<_> = batch
            .iter()
            .map(|w| braincast::model::predict(&w.lookback, &q, cfg).unwrap())
            .collect();
        let targets: Vec<_> = batch.iter().map(|w| w.horizon.clone()).collect();
        batch_mse_loss(&preds, &targets).unwrap()
    };
    let numeric = finite_diff_grad(loss, &params.flatten(), h).unwrap();
    let mut offset = 0;
    analytic
        .tensors()
        .iter()
        .map(|t| {
            let n = &numeric[offset..offset + t.data.len()];
            offset += t.data.len();
            let scale = n.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-6);
            let err = t.data.iter().zip(n).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            (t.name.clone(), err / scale)
        })
        .collect()
}
