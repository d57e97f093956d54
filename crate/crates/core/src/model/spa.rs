//! Cross-attention from spatial to temporal features.

use super::params::SpaParams;
use crate::error::{Error, Result};
use crate::numerics::ops::softmax_rows_backward;
use crate::numerics::{softmax_rows, RealMatrix};

#[derive(Clone, Debug)]
pub(crate) struct SpaCache {
    h_spat: RealMatrix,
    h_temp: RealMatrix,
    q: RealMatrix,
    k: RealMatrix,
    v: RealMatrix,
    pub(crate) scores: RealMatrix,
    mixed: RealMatrix,
}

/// `M = softmax(ψ_q(H_spat)·ψ_k(H_temp)ᵀ)` (unscaled logits) and
/// `H_global = ω(M·ψ_v(H_temp)) + H_spat`.
pub fn spa_align(h_spat: &RealMatrix, h_temp: &RealMatrix, p: &SpaParams) -> Result<(RealMatrix, RealMatrix)> {
    if h_spat.shape() != h_temp.shape() {
        return Err(Error::shape(
            "spa_align",
            format!("{:?}", h_spat.shape()),
            format!("{:?}", h_temp.shape()),
        ));
    }
    if p.query.weight.rows() != h_spat.cols() {
        return Err(Error::shape("spa_align", p.query.weight.rows(), h_spat.cols()));
    }
    let (out, cache) = spa_forward_cached(h_spat, h_temp, p);
    Ok((out, cache.scores))
}

pub(crate) fn spa_forward_cached(h_spat: &RealMatrix, h_temp: &RealMatrix, p: &SpaParams) -> (RealMatrix, SpaCache) {
    let q = p.query.forward(h_spat);
    let k = p.key.forward(h_temp);
    let v = p.value.forward(h_temp);
    let scores = softmax_rows(&q.matmul_t(&k));
    let mixed = scores.matmul(&v);
    let mut out = p.out.forward(&mixed);
    out.add_assign(h_spat);
    (
        out,
        SpaCache {
            h_spat: h_spat.clone(),
            h_temp: h_temp.clone(),
            q,
            k,
            v,
            scores,
            mixed,
        },
    )
}

/// Returns `(∂ℓ/∂H_spat, ∂ℓ/∂H_temp)`.
pub(crate) fn spa_backward(cache: &SpaCache, p: &SpaParams, g: &RealMatrix, grad: &mut SpaParams) -> (RealMatrix, RealMatrix) {
    let mut g_spat = g.clone();
    let g_mixed = p.out.backward(&cache.mixed, g, &mut grad.out);
    let g_scores = g_mixed.matmul_t(&cache.v);
    let g_v = cache.scores.t_matmul(&g_mixed);
    let g_logits = softmax_rows_backward(&cache.scores, &g_scores);
    let g_q = g_logits.matmul(&cache.k);
    let g_k = g_logits.t_matmul(&cache.q);
    g_spat.add_assign(&p.query.backward(&cache.h_spat, &g_q, &mut grad.query));
    let mut g_temp = p.key.backward(&cache.h_temp, &g_k, &mut grad.key);
    g_temp.add_assign(&p.value.backward(&cache.h_temp, &g_v, &mut grad.value));
    (g_spat, g_temp)
}
