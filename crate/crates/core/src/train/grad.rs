use super::loss::{mse_loss, mse_loss_grad};
use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::model::{backward, forward_cached, ModelConfig, ModelParams};
use crate::parallel::Workers;

/// Samples accumulated sequentially before partial sums are combined. Fixed,
/// so the reduction order never depends on the worker count.
const CHUNK: usize = 8;

/// Gradient of the batch-mean loss together with that loss.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    pub grads: ModelParams,
    /// Mean over the batch of the per-sample loss.
    pub loss: f64,
}

/// Exact gradients of the batch-mean loss with respect to every parameter.
/// Complex parameters get `(∂ℓ/∂re, ∂ℓ/∂im)` pairs in their interleaved slots.
pub fn compute_gradients(params: &ModelParams, batch: &[WindowSample], cfg: &ModelConfig) -> Result<BatchGradient> {
    compute_gradients_with(params, batch, cfg, &Workers::sequential())
}

pub fn compute_gradients_with(
    params: &ModelParams,
    batch: &[WindowSample],
    cfg: &ModelConfig,
    workers: &Workers,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    cfg.validate()?;
    let weight = 1.0 / batch.len() as f64;
    let chunks: Vec<&[WindowSample]> = batch.chunks(CHUNK).collect();
    let partials = workers.map(&chunks, |chunk| -> Result<(ModelParams, f64)> {
        let mut grads = ModelParams::zeros(cfg);
        let mut loss = 0.0;
        for w in *chunk {
            if w.lookback.shape() != (cfg.variates, cfg.lookback) || w.horizon.shape() != (cfg.variates, cfg.horizon) {
                return Err(Error::shape(
                    "compute_gradients sample",
                    format!("{}x{} / {}x{}", cfg.variates, cfg.lookback, cfg.variates, cfg.horizon),
                    format!("{:?} / {:?}", w.lookback.shape(), w.horizon.shape()),
                ));
            }
            let (trace, cache) = forward_cached(&w.lookback, params, cfg)?;
            loss += mse_loss(&trace.prediction, &w.horizon)?;
            let g = mse_loss_grad(&trace.prediction, &w.horizon, weight);
            backward(&w.lookback, &cache, params, &g, &mut grads)?;
        }
        Ok((grads, loss))
    });

    let mut total = ModelParams::zeros(cfg);
    let mut loss = 0.0;
    for p in partials {
        let (g, l) = p?;
        total.axpy(1.0, &g);
        loss += l;
    }
    if let Some(name) = total.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    Ok(BatchGradient {
        grads: total,
        loss: loss * weight,
    })
}
