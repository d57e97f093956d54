use serde::{Deserialize, Serialize};

use crate::model::{ModelConfig, ModelParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub eps: f64,
}

/// Running mean of squared gradients, one accumulator per scalar (complex
/// parameters track real and imaginary parts separately).
#[derive(Clone, Debug, PartialEq)]
pub struct OptState {
    pub sq_avg: ModelParams,
    pub step: u64,
}

impl OptState {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            sq_avg: ModelParams::zeros(cfg),
            step: 0,
        }
    }
}

/// `v ← ρ·v + (1 − ρ)·g²`, `w ← w − lr·g / (√v + ε)`, elementwise.
pub fn rmsprop_step(params: &mut ModelParams, grads: &ModelParams, state: &mut OptState, cfg: &RmsPropConfig) {
    let g_all = grads.tensors();
    let v_all = state.sq_avg.tensors_mut();
    for ((w, g), v) in params.tensors_mut().into_iter().zip(g_all).zip(v_all) {
        debug_assert_eq!(w.name, g.name);
        for ((wi, gi), vi) in w.data.iter_mut().zip(g.data).zip(v.data.iter_mut()) {
            *vi = cfg.decay * *vi + (1.0 - cfg.decay) * gi * gi;
            *wi -= cfg.learning_rate * gi / (vi.sqrt() + cfg.eps);
        }
    }
    state.step += 1;
}
