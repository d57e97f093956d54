//! Named parameter registry.
//!
//! Every learnable array is a dense matrix (vectors are `1 × n`). The
//! registry order and names are a pure function of [`ModelConfig`]; the
//! optimizer state, gradients and checkpoints all mirror it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, RealMatrix, SeedRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "f64")]
    F64,
    /// Interleaved pairs of `f64` (re, im).
    #[serde(rename = "c128")]
    C128,
}

impl DType {
    pub fn scalar_count(self, rows: usize, cols: usize) -> usize {
        match self {
            DType::F64 => rows * cols,
            DType::C128 => 2 * rows * cols,
        }
    }
}

/// Owned named tensor, as stored in a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorData {
    pub name: String,
    pub dtype: DType,
    pub shape: (usize, usize),
    pub data: Vec<f64>,
}

#[derive(Debug)]
pub struct ParamRef<'a> {
    pub name: String,
    pub dtype: DType,
    pub shape: (usize, usize),
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct ParamMut<'a> {
    pub name: String,
    pub dtype: DType,
    pub shape: (usize, usize),
    pub data: &'a mut [f64],
}

/// How a tensor is initialized.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Role {
    Weight { fan_in: usize },
    Bias,
    Gain,
    ComplexWeight { fan_in: usize },
    ComplexBias,
}

trait Visit {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a>>);
}

impl Visit for RealMatrix {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        out.push(ParamRef {
            name: prefix.to_string(),
            dtype: DType::F64,
            shape: self.shape(),
            data: self.as_slice(),
        });
    }
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a>>) {
        let shape = self.shape();
        out.push(ParamMut {
            name: prefix.to_string(),
            dtype: DType::F64,
            shape,
            data: self.as_mut_slice(),
        });
    }
}

impl Visit for ComplexMatrix {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
        out.push(ParamRef {
            name: prefix.to_string(),
            dtype: DType::C128,
            shape: self.shape(),
            data: self.as_slice(),
        });
    }
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a>>) {
        let shape = self.shape();
        out.push(ParamMut {
            name: prefix.to_string(),
            dtype: DType::C128,
            shape,
            data: self.as_mut_slice(),
        });
    }
}

macro_rules! visit_fields {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl Visit for $ty {
            fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamRef<'a>>) {
                $( self.$field.visit(&format!("{prefix}.{}", stringify!($field)), out); )*
            }
            fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamMut<'a>>) {
                $( self.$field.visit_mut(&format!("{prefix}.{}", stringify!($field)), out); )*
            }
        }
    };
}

type Builder<'b> = dyn FnMut(&str, Role, usize, usize) -> Vec<f64> + 'b;

fn real(b: &mut Builder<'_>, name: &str, role: Role, rows: usize, cols: usize) -> RealMatrix {
    RealMatrix::from_fn(rows, cols, {
        let v = b(name, role, rows, cols);
        move |r, c| v[r * cols + c]
    })
}

fn complex(b: &mut Builder<'_>, name: &str, role: Role, rows: usize, cols: usize) -> ComplexMatrix {
    let v = b(name, role, rows, cols);
    ComplexMatrix::new(rows, cols, v).expect("builder returns finite interleaved data")
}

/// Affine map `x·W + b` acting on rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    /// `in × out`
    pub weight: RealMatrix,
    /// `1 × out`
    pub bias: RealMatrix,
}
visit_fields!(Linear { weight, bias });

impl Linear {
    fn build(b: &mut Builder<'_>, name: &str, fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: real(b, &format!("{name}.weight"), Role::Weight { fan_in }, fan_in, fan_out),
            bias: real(b, &format!("{name}.bias"), Role::Bias, 1, fan_out),
        }
    }
}

/// Two affine maps with GELU in between.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}
visit_fields!(FeedForward { up, down });

impl FeedForward {
    fn build(b: &mut Builder<'_>, name: &str, d_in: usize, hidden: usize, d_out: usize) -> Self {
        Self {
            up: Linear::build(b, &format!("{name}.up"), d_in, hidden),
            down: Linear::build(b, &format!("{name}.down"), hidden, d_out),
        }
    }
}

/// Fourier-analysis projection: a bias-free periodic weight (`D × D/4`)
/// shared by the cosine and sine branches, and a gated affine branch
/// (`D × D/2`).
#[derive(Clone, Debug, PartialEq)]
pub struct FanParams {
    pub periodic: RealMatrix,
    pub gate: Linear,
}
visit_fields!(FanParams { periodic, gate });

impl FanParams {
    fn build(b: &mut Builder<'_>, name: &str, d: usize) -> Self {
        Self {
            periodic: real(b, &format!("{name}.periodic"), Role::Weight { fan_in: d }, d, d / 4),
            gate: Linear::build(b, &format!("{name}.gate"), d, d / 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormParams {
    pub gain: RealMatrix,
    pub bias: RealMatrix,
}
visit_fields!(LayerNormParams { gain, bias });

impl LayerNormParams {
    fn build(b: &mut Builder<'_>, name: &str, d: usize) -> Self {
        Self {
            gain: real(b, &format!("{name}.gain"), Role::Gain, 1, d),
            bias: real(b, &format!("{name}.bias"), Role::Bias, 1, d),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiaLayerParams {
    pub fan_q: FanParams,
    pub fan_k: FanParams,
    pub fan_v: FanParams,
    pub ffn: FeedForward,
    pub ln1: LayerNormParams,
    pub ln2: LayerNormParams,
}
visit_fields!(SiaLayerParams { fan_q, fan_k, fan_v, ffn, ln1, ln2 });

#[derive(Clone, Debug, PartialEq)]
pub struct TfrParams {
    pub trend: FeedForward,
    pub season: FeedForward,
    /// Complex `L × D`.
    pub spectral_weight: ComplexMatrix,
    /// Complex `1 × D`.
    pub spectral_bias: ComplexMatrix,
}
visit_fields!(TfrParams { trend, season, spectral_weight, spectral_bias });

#[derive(Clone, Debug, PartialEq)]
pub struct SpaParams {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
}
visit_fields!(SpaParams { query, key, value, out });

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub embed: Linear,
    pub sia: Vec<SiaLayerParams>,
    pub tfr: TfrParams,
    pub spa: SpaParams,
    pub head: Linear,
}

impl ModelParams {
    fn build(cfg: &ModelConfig, b: &mut Builder<'_>) -> Self {
        let (l, d, t) = (cfg.lookback, cfg.d_model, cfg.horizon);
        let sia = (0..cfg.layers)
            .map(|i| {
                let p = format!("sia.{i}");
                SiaLayerParams {
                    fan_q: FanParams::build(b, &format!("{p}.fan_q"), d),
                    fan_k: FanParams::build(b, &format!("{p}.fan_k"), d),
                    fan_v: FanParams::build(b, &format!("{p}.fan_v"), d),
                    ffn: FeedForward::build(b, &format!("{p}.ffn"), d, cfg.ffn_hidden, d),
                    ln1: LayerNormParams::build(b, &format!("{p}.ln1"), d),
                    ln2: LayerNormParams::build(b, &format!("{p}.ln2"), d),
                }
            })
            .collect();
        Self {
            embed: Linear::build(b, "embed", l, d),
            sia,
            tfr: TfrParams {
                trend: FeedForward::build(b, "tfr.trend", l, cfg.tfr_hidden, d),
                season: FeedForward::build(b, "tfr.season", l, cfg.tfr_hidden, d),
                spectral_weight: complex(b, "tfr.spectral_weight", Role::ComplexWeight { fan_in: l }, l, d),
                spectral_bias: complex(b, "tfr.spectral_bias", Role::ComplexBias, 1, d),
            },
            spa: SpaParams {
                query: Linear::build(b, "spa.query", d, d),
                key: Linear::build(b, "spa.key", d, d),
                value: Linear::build(b, "spa.value", d, d),
                out: Linear::build(b, "spa.out", d, d),
            },
            head: Linear::build(b, "head", d, t),
        }
    }

    /// Seeded initialization. Real weights are uniform in `±√(1/fan_in)`;
    /// complex weights draw real and imaginary parts uniformly in
    /// `±√(1/(2·fan_in))`; biases start at zero and layer-norm gains at one.
    /// Each tensor draws from the substream named after it.
    pub fn init(cfg: &ModelConfig, rng: &SeedRng) -> Result<Self> {
        cfg.validate()?;
        let mut init = |name: &str, role: Role, rows: usize, cols: usize| -> Vec<f64> {
            let mut s = rng.stream(name);
            match role {
                Role::Weight { fan_in } => {
                    let a = (1.0 / fan_in as f64).sqrt();
                    (0..rows * cols).map(|_| s.random_range(-a..a)).collect()
                }
                Role::ComplexWeight { fan_in } => {
                    let a = (1.0 / (2.0 * fan_in as f64)).sqrt();
                    (0..2 * rows * cols).map(|_| s.random_range(-a..a)).collect()
                }
                Role::Bias => vec![0.0; rows * cols],
                Role::ComplexBias => vec![0.0; 2 * rows * cols],
                Role::Gain => vec![1.0; rows * cols],
            }
        };
        Ok(Self::build(cfg, &mut init))
    }

    /// Registry of the same layout filled with zeros (gradient buffers,
    /// optimizer accumulators).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let mut zero = |_: &str, role: Role, rows: usize, cols: usize| match role {
            Role::ComplexWeight { .. } | Role::ComplexBias => vec![0.0; 2 * rows * cols],
            _ => vec![0.0; rows * cols],
        };
        Self::build(cfg, &mut zero)
    }

    pub fn tensors(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        self.embed.visit("embed", &mut out);
        for (i, layer) in self.sia.iter().enumerate() {
            layer.visit(&format!("sia.{i}"), &mut out);
        }
        self.tfr.visit("tfr", &mut out);
        self.spa.visit("spa", &mut out);
        self.head.visit("head", &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        self.embed.visit_mut("embed", &mut out);
        for (i, layer) in self.sia.iter_mut().enumerate() {
            layer.visit_mut(&format!("sia.{i}"), &mut out);
        }
        self.tfr.visit_mut("tfr", &mut out);
        self.spa.visit_mut("spa", &mut out);
        self.head.visit_mut("head", &mut out);
        out
    }

    /// Total number of real scalars (complex entries count twice).
    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Every scalar, in registry order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.scalar_count() {
            return Err(Error::shape("assign_flat", self.scalar_count(), values.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.data.len();
            t.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn axpy(&mut self, scale: f64, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            debug_assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter_mut().zip(b.data) {
                *x += scale * y;
            }
        }
    }

    /// Name of the first tensor holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<String> {
        self.tensors()
            .into_iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name)
    }

    /// Rebuilds a registry for `cfg` from named tensors, checking that names,
    /// kinds and shapes line up exactly.
    pub fn from_named(cfg: &ModelConfig, tensors: &[TensorData]) -> Result<Self> {
        let mut params = Self::zeros(cfg);
        let slots = params.tensors_mut();
        if slots.len() != tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for this configuration, found {}",
                slots.len(),
                tensors.len()
            )));
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            let (name, dtype, shape, data) = (&t.name, t.dtype, t.shape, &t.data);
            if &slot.name != name || slot.dtype != dtype || slot.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` {dtype:?} {shape:?} does not match expected `{}` {:?} {:?}",
                    slot.name, slot.dtype, slot.shape
                )));
            }
            if slot.data.len() != data.len() {
                return Err(Error::Checkpoint(format!("tensor `{name}` has wrong length")));
            }
            slot.data.copy_from_slice(data);
        }
        if let Some(name) = params.first_non_finite() {
            return Err(Error::Checkpoint(format!("tensor `{name}` holds non-finite values")));
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn tiny() -> ModelConfig {
        let mut c = ModelConfig::new(4, 16, 4, 8, 1, 2);
        c.ffn_hidden = 8;
        c.tfr_hidden = 8;
        c.kernel = 3;
        c
    }

    #[test]
    fn init_is_deterministic() {
        let a = ModelParams::init(&tiny(), &SeedRng::new(1)).unwrap();
        let b = ModelParams::init(&tiny(), &SeedRng::new(1)).unwrap();
        assert_eq!(a, b);
        let c = ModelParams::init(&tiny(), &SeedRng::new(2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_zero_gains_one() {
        let p = ModelParams::init(&tiny(), &SeedRng::new(3)).unwrap();
        for t in p.tensors() {
            if t.name.ends_with(".bias") || t.name.ends_with("spectral_bias") {
                assert!(t.data.iter().all(|v| *v == 0.0), "{}", t.name);
            }
            if t.name.ends_with(".gain") {
                assert!(t.data.iter().all(|v| *v == 1.0), "{}", t.name);
            }
        }
    }

    #[test]
    fn names_unique_and_count_depends_only_on_config() {
        let p = ModelParams::init(&tiny(), &SeedRng::new(3)).unwrap();
        let names: HashSet<_> = p.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names.len(), p.tensors().len());
        assert_eq!(p.scalar_count(), ModelParams::zeros(&tiny()).scalar_count());
        // embed 16*8+8, per FAN 8*2+8*4+4, FFN 8*8+8+8*8+8, two LNs 4*8,
        // TFR FFNs 2*(16*8+8+8*8+8), spectral 2*(16*8+8), SPA 4*(64+8), head 8*4+4
        let expected = 136 + 3 * 52 + 144 + 32 + 416 + 272 + 288 + 36;
        assert_eq!(p.scalar_count(), expected);
    }

    #[test]
    fn uniform_variance_matches_bound() {
        let mut c = ModelConfig::new(2, 16, 4, 512, 1, 8);
        c.ffn_hidden = 8;
        c.tfr_hidden = 8;
        c.kernel = 3;
        let p = ModelParams::init(&c, &SeedRng::new(0)).unwrap();
        let w = p.spa.query.weight.as_slice();
        assert_eq!(w.len(), 512 * 512);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64;
        let want = 1.0 / (3.0 * 512.0);
        assert!((var - want).abs() < 0.2 * want, "{var} vs {want}");
        let cw = p.tfr.spectral_weight.as_slice();
        let bound = (1.0 / 32.0f64).sqrt();
        assert!(cw.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn flatten_round_trip() {
        let p = ModelParams::init(&tiny(), &SeedRng::new(5)).unwrap();
        let mut q = ModelParams::zeros(&tiny());
        q.assign_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
    }
}
