//! Affine, feed-forward and Fourier-analysis blocks with their adjoints.

use super::params::{FanParams, FeedForward, Linear};
use crate::numerics::ops::{gelu, gelu_derivative};
use crate::numerics::RealMatrix;

impl Linear {
    pub fn forward(&self, x: &RealMatrix) -> RealMatrix {
        let mut y = x.matmul(&self.weight);
        y.add_row_broadcast(&self.bias);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `∂ℓ/∂x`.
    pub(crate) fn backward(&self, x: &RealMatrix, g: &RealMatrix, grad: &mut Linear) -> RealMatrix {
        grad.weight.add_assign(&x.t_matmul(g));
        grad.bias.add_assign(&g.col_sums());
        g.matmul_t(&self.weight)
    }

    /// Same as [`Linear::backward`] for a layer whose input is data.
    pub(crate) fn backward_params(&self, x: &RealMatrix, g: &RealMatrix, grad: &mut Linear) {
        grad.weight.add_assign(&x.t_matmul(g));
        grad.bias.add_assign(&g.col_sums());
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FeedForwardCache {
    input: RealMatrix,
    pre: RealMatrix,
    act: RealMatrix,
}

impl FeedForward {
    pub fn forward(&self, x: &RealMatrix) -> RealMatrix {
        self.forward_cached(x).0
    }

    pub(crate) fn forward_cached(&self, x: &RealMatrix) -> (RealMatrix, FeedForwardCache) {
        let pre = self.up.forward(x);
        let act = pre.map(gelu);
        let out = self.down.forward(&act);
        (
            out,
            FeedForwardCache {
                input: x.clone(),
                pre,
                act,
            },
        )
    }

    pub(crate) fn backward(
        &self,
        cache: &FeedForwardCache,
        g: &RealMatrix,
        grad: &mut FeedForward,
        need_input: bool,
    ) -> Option<RealMatrix> {
        let g_act = self.down.backward(&cache.act, g, &mut grad.down);
        let g_pre = g_act.zip_map(&cache.pre, |ga, p| ga * gelu_derivative(p));
        if need_input {
            Some(self.up.backward(&cache.input, &g_pre, &mut grad.up))
        } else {
            self.up.backward_params(&cache.input, &g_pre, &mut grad.up);
            None
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FanCache {
    input: RealMatrix,
    periodic_pre: RealMatrix,
    gate_pre: RealMatrix,
}

/// `[cos(x·Wp) ‖ sin(x·Wp) ‖ gelu(x·Wg + bg)]`, column widths `D/4, D/4, D/2`.
pub fn fan_forward(x: &RealMatrix, fan: &FanParams) -> RealMatrix {
    fan_forward_cached(x, fan).0
}

pub(crate) fn fan_forward_cached(x: &RealMatrix, fan: &FanParams) -> (RealMatrix, FanCache) {
    let periodic_pre = x.matmul(&fan.periodic);
    let gate_pre = fan.gate.forward(x);
    let q = periodic_pre.cols();
    let g = gate_pre.cols();
    let mut out = RealMatrix::zeros(x.rows(), 2 * q + g);
    for r in 0..x.rows() {
        let p = periodic_pre.row(r);
        let gr = gate_pre.row(r);
        let o = out.row_mut(r);
        for c in 0..q {
            o[c] = p[c].cos();
            o[q + c] = p[c].sin();
        }
        for c in 0..g {
            o[2 * q + c] = gelu(gr[c]);
        }
    }
    (
        out,
        FanCache {
            input: x.clone(),
            periodic_pre,
            gate_pre,
        },
    )
}

pub(crate) fn fan_backward(cache: &FanCache, fan: &FanParams, g: &RealMatrix, grad: &mut FanParams) -> RealMatrix {
    let q = cache.periodic_pre.cols();
    let gw = cache.gate_pre.cols();
    let rows = g.rows();
    let mut g_periodic = RealMatrix::zeros(rows, q);
    let mut g_gate = RealMatrix::zeros(rows, gw);
    for r in 0..rows {
        let gr = g.row(r);
        let p = cache.periodic_pre.row(r);
        for c in 0..q {
            let v = -p[c].sin() * gr[c] + p[c].cos() * gr[q + c];
            g_periodic.set(r, c, v);
        }
        let gp = cache.gate_pre.row(r);
        for c in 0..gw {
            g_gate.set(r, c, gr[2 * q + c] * gelu_derivative(gp[c]));
        }
    }
    grad.periodic.add_assign(&cache.input.t_matmul(&g_periodic));
    let mut g_in = g_periodic.matmul_t(&fan.periodic);
    g_in.add_assign(&fan.gate.backward(&cache.input, &g_gate, &mut grad.gate));
    g_in
}
