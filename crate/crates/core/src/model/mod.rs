//! The forecasting network: variate embedding, SIAformer spatial path,
//! spectral temporal path, cross-attention alignment and a linear head.

pub mod config;
mod forward;
mod layers;
pub mod params;
pub mod sia;
pub mod spa;
pub mod tfr;

pub use config::ModelConfig;
pub use forward::{embed_variates, forecast_head, model_forward, predict, ForwardTrace};
pub(crate) use forward::{backward, forward_cached};
pub use layers::fan_forward;
pub use params::{DType, TensorData, FanParams, FeedForward, LayerNormParams, Linear, ModelParams, SiaLayerParams, SpaParams, TfrParams};
pub use sia::{sia_attention, sia_forward, siaformer_layer};
pub use spa::spa_align;
pub use tfr::{energy_equalize, tfr_forward};
