//! Multivariate time-series forecasting with joint spatial and temporal
//! modeling.
//!
//! Each variate's look-back window becomes one token. A stack of SIAformer
//! layers learns variate-to-variate attention, a spectral path refines each
//! series after energy equalization and seasonal-trend decomposition, and a
//! cross-attention block aligns the two before a shared linear head emits the
//! forecast.
//!
//! Module map:
//! - [`numerics`]: DFT, spectrum flipping, softmax, layer norm, moving-average
//!   decomposition, seeded randomness, finite-difference gradients.
//! - [`data`]: CSV series, subject splits, sliding windows, normalization,
//!   synthetic benchmark data.
//! - [`model`]: parameters and the forward pass.
//! - [`train`]: loss, exact gradients, RMSprop, early stopping, checkpoints.
//! - [`eval`]: metrics, baselines, attention export, sweeps and ablations.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod parallel;
pub mod train;

pub use error::{Error, Result};
pub use model::{ForwardTrace, ModelConfig, ModelParams};
pub use numerics::{ComplexMatrix, RealMatrix, SeedRng};
