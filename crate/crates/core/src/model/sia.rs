//! Variate-token self-attention (SIAformer stack).
//!
//! Each row of the input is one variate's token, so the attention maps are
//! `N × N` variate-to-variate dependencies.

use super::layers::{fan_backward, fan_forward_cached, FanCache, FeedForwardCache};
use super::params::SiaLayerParams;
use crate::error::{Error, Result};
use crate::numerics::ops::{layer_norm_backward, layer_norm_cached, softmax_rows_backward, LayerNormCache};
use crate::numerics::{softmax_rows, RealMatrix};

#[derive(Clone, Debug)]
pub(crate) struct AttentionCache {
    q: RealMatrix,
    k: RealMatrix,
    v: RealMatrix,
    maps: Vec<RealMatrix>,
}

/// Multi-head scaled dot-product attention over variate tokens.
///
/// Columns are split into `heads` blocks of width `d_h = D / heads`; block
/// `h` attends with `softmax(Q_h·K_hᵀ / √d_h)`. Returns the concatenated
/// outputs and one `N × N` map per head.
pub fn sia_attention(
    q: &RealMatrix,
    k: &RealMatrix,
    v: &RealMatrix,
    heads: usize,
) -> Result<(RealMatrix, Vec<RealMatrix>)> {
    if q.shape() != k.shape() || q.shape() != v.shape() {
        return Err(Error::shape(
            "sia_attention",
            format!("{:?} for Q, K and V", q.shape()),
            format!("{:?} / {:?} / {:?}", q.shape(), k.shape(), v.shape()),
        ));
    }
    if heads == 0 || q.cols() % heads != 0 {
        return Err(Error::Config(format!("D={} not divisible by heads={heads}", q.cols())));
    }
    let (h, cache) = attention_cached(q.clone(), k.clone(), v.clone(), heads);
    Ok((h, cache.maps))
}

fn attention_cached(q: RealMatrix, k: RealMatrix, v: RealMatrix, heads: usize) -> (RealMatrix, AttentionCache) {
    let dh = q.cols() / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = RealMatrix::zeros(q.rows(), q.cols());
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = q.col_block(h * dh, dh);
        let kh = k.col_block(h * dh, dh);
        let vh = v.col_block(h * dh, dh);
        let a = softmax_rows(&qh.matmul_t(&kh).scale(scale));
        out.set_col_block(h * dh, &a.matmul(&vh));
        maps.push(a);
    }
    (out, AttentionCache { q, k, v, maps })
}

/// Returns `(∂ℓ/∂Q, ∂ℓ/∂K, ∂ℓ/∂V)`.
fn attention_backward(cache: &AttentionCache, g: &RealMatrix) -> (RealMatrix, RealMatrix, RealMatrix) {
    let heads = cache.maps.len();
    let (n, d) = cache.q.shape();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut gq = RealMatrix::zeros(n, d);
    let mut gk = RealMatrix::zeros(n, d);
    let mut gv = RealMatrix::zeros(n, d);
    for (h, a) in cache.maps.iter().enumerate() {
        let qh = cache.q.col_block(h * dh, dh);
        let kh = cache.k.col_block(h * dh, dh);
        let vh = cache.v.col_block(h * dh, dh);
        let gh = g.col_block(h * dh, dh);
        gv.set_col_block(h * dh, &a.t_matmul(&gh));
        let ga = gh.matmul_t(&vh);
        let gs = softmax_rows_backward(a, &ga).scale(scale);
        gq.set_col_block(h * dh, &gs.matmul(&kh));
        gk.set_col_block(h * dh, &gs.t_matmul(&qh));
    }
    (gq, gk, gv)
}

#[derive(Clone, Debug)]
pub(crate) struct SiaLayerCache {
    fan_q: FanCache,
    fan_k: FanCache,
    fan_v: FanCache,
    attn: AttentionCache,
    ln1: LayerNormCache,
    ffn: FeedForwardCache,
    ln2: LayerNormCache,
}

/// One SIAformer layer: FAN projections, attention, then
/// `Z_out = LN₂(FFN(H) + LN₁(H + Z_in))`.
pub fn siaformer_layer(z: &RealMatrix, p: &SiaLayerParams, heads: usize, eps: f64) -> (RealMatrix, Vec<RealMatrix>) {
    let (out, cache) = siaformer_layer_cached(z, p, heads, eps);
    (out, cache.attn.maps)
}

pub(crate) fn siaformer_layer_cached(
    z: &RealMatrix,
    p: &SiaLayerParams,
    heads: usize,
    eps: f64,
) -> (RealMatrix, SiaLayerCache) {
    let (q, fan_q) = fan_forward_cached(z, &p.fan_q);
    let (k, fan_k) = fan_forward_cached(z, &p.fan_k);
    let (v, fan_v) = fan_forward_cached(z, &p.fan_v);
    let (h, attn) = attention_cached(q, k, v, heads);
    let (u, ln1) = layer_norm_cached(&h.add(z), p.ln1.gain.as_slice(), p.ln1.bias.as_slice(), eps);
    let (f, ffn) = p.ffn.forward_cached(&h);
    let (out, ln2) = layer_norm_cached(&f.add(&u), p.ln2.gain.as_slice(), p.ln2.bias.as_slice(), eps);
    (
        out,
        SiaLayerCache {
            fan_q,
            fan_k,
            fan_v,
            attn,
            ln1,
            ffn,
            ln2,
        },
    )
}

pub(crate) fn siaformer_layer_backward(
    cache: &SiaLayerCache,
    p: &SiaLayerParams,
    g_out: &RealMatrix,
    grad: &mut SiaLayerParams,
) -> RealMatrix {
    let g_r2 = layer_norm_backward(
        &cache.ln2,
        p.ln2.gain.as_slice(),
        g_out,
        grad.ln2.gain.as_mut_slice(),
        grad.ln2.bias.as_mut_slice(),
    );
    let mut g_h = p
        .ffn
        .backward(&cache.ffn, &g_r2, &mut grad.ffn, true)
        .expect("input gradient requested");
    let g_r1 = layer_norm_backward(
        &cache.ln1,
        p.ln1.gain.as_slice(),
        &g_r2,
        grad.ln1.gain.as_mut_slice(),
        grad.ln1.bias.as_mut_slice(),
    );
    g_h.add_assign(&g_r1);
    let mut g_z = g_r1;
    let (gq, gk, gv) = attention_backward(&cache.attn, &g_h);
    g_z.add_assign(&fan_backward(&cache.fan_q, &p.fan_q, &gq, &mut grad.fan_q));
    g_z.add_assign(&fan_backward(&cache.fan_k, &p.fan_k, &gk, &mut grad.fan_k));
    g_z.add_assign(&fan_backward(&cache.fan_v, &p.fan_v, &gv, &mut grad.fan_v));
    g_z
}

/// Runs the layer stack; returns the final representation and every layer's
/// per-head attention maps.
pub fn sia_forward(x_e: &RealMatrix, layers: &[SiaLayerParams], heads: usize, eps: f64) -> (RealMatrix, Vec<Vec<RealMatrix>>) {
    let (out, caches) = sia_forward_cached(x_e, layers, heads, eps);
    (out, caches.into_iter().map(|c| c.attn.maps).collect())
}

pub(crate) fn sia_forward_cached(
    x_e: &RealMatrix,
    layers: &[SiaLayerParams],
    heads: usize,
    eps: f64,
) -> (RealMatrix, Vec<SiaLayerCache>) {
    let mut z = x_e.clone();
    let mut caches = Vec::with_capacity(layers.len());
    for p in layers {
        let (next, cache) = siaformer_layer_cached(&z, p, heads, eps);
        caches.push(cache);
        z = next;
    }
    (z, caches)
}

impl SiaLayerCache {
    pub(crate) fn attention_maps(&self) -> &[RealMatrix] {
        &self.attn.maps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> RealMatrix {
        RealMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn zero_keys_give_uniform_attention() {
        let q = RealMatrix::from_fn(3, 4, |r, c| (r + c) as f64);
        let v = RealMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let (h, a) = sia_attention(&q, &RealMatrix::zeros(3, 4), &v, 2).unwrap();
        for map in &a {
            assert!(map.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
        let means = v.col_sums().scale(1.0 / 3.0);
        for r in 0..3 {
            for c in 0..4 {
                assert!((h.get(r, c) - means.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_variate_is_identity() {
        let q = m(&[vec![0.3, -1.0]]);
        let v = m(&[vec![2.0, 5.0]]);
        let (h, a) = sia_attention(&q, &q, &v, 1).unwrap();
        assert_eq!(a[0], m(&[vec![1.0]]));
        assert_eq!(h, v);
    }

    #[test]
    fn hand_chosen_three_by_two() {
        let q = m(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let k = m(&[vec![0.5, -0.5], vec![2.0, 0.0], vec![0.0, 1.0]]);
        let v = m(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let (h, a) = sia_attention(&q, &k, &v, 1).unwrap();
        for i in 0..3 {
            let logits: Vec<f64> = (0..3)
                .map(|j| (q.get(i, 0) * k.get(j, 0) + q.get(i, 1) * k.get(j, 1)) / 2f64.sqrt())
                .collect();
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            for j in 0..3 {
                assert!((a[0].get(i, j) - logits[j].exp() / z).abs() < 1e-12);
            }
            for c in 0..2 {
                let want: f64 = (0..3).map(|j| logits[j].exp() / z * v.get(j, c)).sum();
                assert!((h.get(i, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let a = RealMatrix::zeros(3, 4);
        assert!(sia_attention(&a, &RealMatrix::zeros(2, 4), &a, 2).is_err());
        assert!(sia_attention(&a, &a, &a, 3).is_err());
    }
}
