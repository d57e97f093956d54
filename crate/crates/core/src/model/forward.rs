use super::config::ModelConfig;
use super::params::{Linear, ModelParams};
use super::sia::{sia_forward_cached, siaformer_layer_backward, SiaLayerCache};
use super::spa::{spa_backward, spa_forward_cached, SpaCache};
use super::tfr::{tfr_backward, tfr_forward_cached, TfrCache};
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// Everything a forward pass exposes.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// Per SIAformer layer, per head, an `N × N` map. Empty when the spatial
    /// path is disabled.
    pub attention: Vec<Vec<RealMatrix>>,
    /// `N × N` cross-attention scores; uniform when alignment is disabled.
    pub spa_scores: RealMatrix,
    pub spa_enabled: bool,
    pub h_spat: RealMatrix,
    pub h_temp: RealMatrix,
    pub h_global: RealMatrix,
    /// `N × T`
    pub prediction: RealMatrix,
}

/// Shared affine map `L → D` applied to every variate row.
pub fn embed_variates(x_p: &RealMatrix, embed: &Linear) -> Result<RealMatrix> {
    if x_p.cols() != embed.weight.rows() {
        return Err(Error::shape(
            "embed_variates",
            format!("{} look-back columns", embed.weight.rows()),
            x_p.cols(),
        ));
    }
    Ok(embed.forward(x_p))
}

/// Shared affine map `D → T` applied to every variate row.
pub fn forecast_head(h_global: &RealMatrix, head: &Linear) -> Result<RealMatrix> {
    if h_global.cols() != head.weight.rows() {
        return Err(Error::shape("forecast_head", head.weight.rows(), h_global.cols()));
    }
    Ok(head.forward(h_global))
}

#[derive(Clone, Debug)]
pub(crate) struct ForwardCache {
    x_e: RealMatrix,
    h_global: RealMatrix,
    sia: Vec<SiaLayerCache>,
    tfr: Option<TfrCache>,
    spa: Option<SpaCache>,
}

fn check_input(x_p: &RealMatrix, params: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    cfg.validate()?;
    if x_p.shape() != (cfg.variates, cfg.lookback) {
        return Err(Error::shape(
            "model_forward input",
            format!("{}x{}", cfg.variates, cfg.lookback),
            format!("{}x{}", x_p.rows(), x_p.cols()),
        ));
    }
    if params.sia.len() != cfg.layers
        || params.embed.weight.shape() != (cfg.lookback, cfg.d_model)
        || params.head.weight.shape() != (cfg.d_model, cfg.horizon)
        || params.tfr.spectral_weight.shape() != (cfg.lookback, cfg.d_model)
    {
        return Err(Error::Config("parameters do not match the model configuration".into()));
    }
    if let Some((row, col)) = x_p.first_non_finite() {
        return Err(Error::NonFinite {
            context: "model input".into(),
            row,
            col,
        });
    }
    Ok(())
}

/// Full forward pass: embedding, spatial path, temporal path, alignment and
/// forecasting head, honoring the ablation switches.
pub fn model_forward(x_p: &RealMatrix, params: &ModelParams, cfg: &ModelConfig) -> Result<ForwardTrace> {
    check_input(x_p, params, cfg)?;
    Ok(forward_cached(x_p, params, cfg)?.0)
}

/// Prediction only.
pub fn predict(x_p: &RealMatrix, params: &ModelParams, cfg: &ModelConfig) -> Result<RealMatrix> {
    Ok(model_forward(x_p, params, cfg)?.prediction)
}

pub(crate) fn forward_cached(x_p: &RealMatrix, params: &ModelParams, cfg: &ModelConfig) -> Result<(ForwardTrace, ForwardCache)> {
    let x_e = params.embed.forward(x_p);

    let (h_spat, sia) = if cfg.enable_sia {
        sia_forward_cached(&x_e, &params.sia, cfg.heads, cfg.ln_eps)
    } else {
        (x_e.clone(), Vec::new())
    };

    let (h_temp, tfr) = if cfg.enable_tfr {
        let (h, c) = tfr_forward_cached(x_p, &params.tfr, cfg)?;
        (h, Some(c))
    } else {
        (x_e.clone(), None)
    };

    let n = cfg.variates;
    let (h_global, spa_scores, spa) = if cfg.enable_spa {
        let (h, c) = spa_forward_cached(&h_spat, &h_temp, &params.spa);
        (h, c.scores.clone(), Some(c))
    } else {
        (h_spat.add(&h_temp), RealMatrix::filled(n, n, 1.0 / n as f64), None)
    };

    let prediction = params.head.forward(&h_global);
    let trace = ForwardTrace {
        attention: sia.iter().map(|c| c.attention_maps().to_vec()).collect(),
        spa_scores,
        spa_enabled: cfg.enable_spa,
        h_spat,
        h_temp,
        h_global: h_global.clone(),
        prediction,
    };
    Ok((
        trace,
        ForwardCache {
            x_e,
            h_global,
            sia,
            tfr,
            spa,
        },
    ))
}

/// Reverse pass from `∂ℓ/∂prediction`, accumulating into `grad`.
pub(crate) fn backward(
    x_p: &RealMatrix,
    cache: &ForwardCache,
    params: &ModelParams,
    g_pred: &RealMatrix,
    grad: &mut ModelParams,
) -> Result<()> {
    let g_global = params.head.backward(&cache.h_global, g_pred, &mut grad.head);

    let (g_spat, g_temp) = match &cache.spa {
        Some(c) => spa_backward(c, &params.spa, &g_global, &mut grad.spa),
        None => (g_global.clone(), g_global),
    };

    let mut g_embed = RealMatrix::zeros(cache.x_e.rows(), cache.x_e.cols());
    match &cache.tfr {
        Some(c) => tfr_backward(c, &params.tfr, &g_temp, &mut grad.tfr)?,
        None => g_embed.add_assign(&g_temp),
    }

    if cache.sia.is_empty() {
        g_embed.add_assign(&g_spat);
    } else {
        let mut g = g_spat;
        for (i, c) in cache.sia.iter().enumerate().rev() {
            g = siaformer_layer_backward(c, &params.sia[i], &g, &mut grad.sia[i]);
        }
        g_embed.add_assign(&g);
    }

    params.embed.backward_params(x_p, &g_embed, &mut grad.embed);
    Ok(())
}
