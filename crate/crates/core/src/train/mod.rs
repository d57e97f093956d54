//! Loss, exact gradients, RMSprop, early stopping and checkpoints.

pub mod checkpoint;
pub mod grad;
pub mod loss;
pub mod optim;
pub mod trainer;

pub use checkpoint::{
    load_checkpoint, load_params, save_checkpoint, save_params, CheckpointMeta, CHECKPOINT_VERSION,
};
pub use grad::{compute_gradients, compute_gradients_with, BatchGradient};
pub use loss::{batch_mse_loss, mse_loss};
pub use optim::{rmsprop_step, OptState, RmsPropConfig};
pub use trainer::{
    evaluate_mse, load_state, predict_windows, save_state, train, train_with, EarlyStopping,
    EpochRecord, StopReason, TrainConfig, TrainOptions, TrainOutcome, TrainState,
};
