use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::decompose::DEFAULT_KERNEL;
use crate::numerics::LAYER_NORM_EPS;

/// Architecture hyper-parameters. `ffn_hidden` is the SIAformer feed-forward
/// width, `tfr_hidden` the width of the trend / season feed-forward blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "N")]
    pub variates: usize,
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "D")]
    pub d_model: usize,
    #[serde(rename = "G")]
    pub layers: usize,
    pub heads: usize,
    pub ffn_hidden: usize,
    pub tfr_hidden: usize,
    pub kernel: usize,
    pub enable_sia: bool,
    pub enable_tfr: bool,
    pub enable_spa: bool,
    pub ln_eps: f64,
}

impl ModelConfig {
    /// Full model with the default widths: SIAformer FFN `2D`, TFR FFNs `D`,
    /// decomposition kernel 25 (clamped to the largest odd value ≤ `L`).
    pub fn new(variates: usize, lookback: usize, horizon: usize, d_model: usize, layers: usize, heads: usize) -> Self {
        let mut kernel = DEFAULT_KERNEL.min(lookback.max(1));
        if kernel % 2 == 0 {
            kernel -= 1;
        }
        Self {
            variates,
            lookback,
            horizon,
            d_model,
            layers,
            heads,
            ffn_hidden: 2 * d_model,
            tfr_hidden: d_model,
            kernel,
            enable_sia: true,
            enable_tfr: true,
            enable_spa: true,
            ln_eps: LAYER_NORM_EPS,
        }
    }

    /// `L=140, T=20, D=512, G=2, 8 heads` for `variates` series.
    pub fn reference(variates: usize) -> Self {
        Self::new(variates, 140, 20, 512, 2, 8)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("N", self.variates),
            ("L", self.lookback),
            ("T", self.horizon),
            ("D", self.d_model),
            ("G", self.layers),
            ("heads", self.heads),
            ("ffn_hidden", self.ffn_hidden),
            ("tfr_hidden", self.tfr_hidden),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "D={} is not divisible by heads={}",
                self.d_model, self.heads
            )));
        }
        if self.d_model % 4 != 0 {
            return Err(Error::Config(format!("D={} must be divisible by 4", self.d_model)));
        }
        if self.kernel % 2 == 0 || self.kernel > self.lookback {
            return Err(Error::Config(format!(
                "decomposition kernel {} must be odd and at most L={}",
                self.kernel, self.lookback
            )));
        }
        if !(self.ln_eps >= 0.0) {
            return Err(Error::Config("ln_eps must be non-negative".into()));
        }
        Ok(())
    }
}
