//! Epoch loop with early stopping and resumable state.

use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use super::grad::compute_gradients_with;
use super::optim::{rmsprop_step, OptState, RmsPropConfig};
use crate::data::{WindowSample, WindowedDataset};
use crate::error::{Error, Result};
use crate::model::params::ParamRef;
use crate::model::{predict, ModelConfig, ModelParams, TensorData};
use crate::numerics::{RealMatrix, SeedRng};
use crate::parallel::Workers;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(rename = "lr")]
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    #[serde(rename = "rho")]
    pub rmsprop_decay: f64,
    #[serde(rename = "eps")]
    pub rmsprop_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 64,
            patience: 5,
            max_epochs: 100,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if !(0.0..1.0).contains(&self.rmsprop_decay) {
            return bad("rmsprop decay must lie in [0, 1)");
        }
        if !(self.rmsprop_eps > 0.0) {
            return bad("rmsprop eps must be positive");
        }
        Ok(())
    }

    pub fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            learning_rate: self.learning_rate,
            decay: self.rmsprop_decay,
            eps: self.rmsprop_eps,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Elementwise MSE averaged over the epoch's batches, measured before
    /// each update.
    pub train_mse: f64,
    /// Elementwise MSE on the validation split after the epoch.
    pub val_mse: f64,
    pub elapsed_s: f64,
    /// True on the epoch where the patience rule fired.
    pub stopped: bool,
}

/// Patience rule on validation loss. Strict improvement resets the counter.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    pub bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, val: f64) -> (bool, bool) {
        if val < self.best {
            self.best = val;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs >= self.patience)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    /// A loss or gradient went non-finite; the best parameters so far are kept.
    Diverged,
}

/// Everything needed to continue training exactly where it left off.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: ModelParams,
    pub opt: OptState,
    pub best_params: ModelParams,
    pub stopper: EarlyStopping,
    pub epochs_completed: usize,
}

impl TrainState {
    pub fn fresh(cfg: &ModelConfig, tc: &TrainConfig) -> Result<Self> {
        let params = ModelParams::init(cfg, &SeedRng::new(tc.seed).split("params"))?;
        Ok(Self {
            best_params: params.clone(),
            params,
            opt: OptState::new(cfg),
            stopper: EarlyStopping::new(tc.patience),
            epochs_completed: 0,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub best_params: ModelParams,
    pub best_epoch: usize,
    pub best_val: f64,
    /// Records of the epochs run by this call only.
    pub log: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub state: TrainState,
    /// Set when `stop_reason` is `Diverged`.
    pub divergence: Option<String>,
}

/// Execution knobs that do not change the arithmetic.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrainOptions {
    /// Worker threads for gradient evaluation; 0 runs on the calling thread.
    pub threads: usize,
    /// Record wall-clock time in the log. Off gives byte-reproducible logs.
    pub record_elapsed: bool,
}

/// Forecasts for a list of windows, in input order.
pub fn predict_windows(
    params: &ModelParams,
    cfg: &ModelConfig,
    samples: &[WindowSample],
    workers: &Workers,
) -> Result<Vec<RealMatrix>> {
    workers.map(samples, |w| predict(&w.lookback, params, cfg)).into_iter().collect()
}

/// Elementwise MSE over a set of windows.
pub fn evaluate_mse(params: &ModelParams, cfg: &ModelConfig, samples: &[WindowSample], workers: &Workers) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty split".into()));
    }
    let preds = predict_windows(params, cfg, samples, workers)?;
    let mut sq = 0.0;
    let mut count = 0usize;
    for (p, w) in preds.iter().zip(samples) {
        sq += p.sub(&w.horizon).as_slice().iter().map(|e| e * e).sum::<f64>();
        count += p.as_slice().len();
    }
    Ok(sq / count as f64)
}

pub fn train(data: &WindowedDataset, cfg: &ModelConfig, tc: &TrainConfig) -> Result<TrainOutcome> {
    train_with(data, cfg, tc, TrainOptions::default(), None)
}

/// Runs epochs until early stopping or `tc.max_epochs` total epochs
/// (counting any already completed in `resume`). The shuffle of epoch `e`
/// depends only on the seed and `e`, so a resumed run repeats the exact
/// sequence of an uninterrupted one.
pub fn train_with(
    data: &WindowedDataset,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    opts: TrainOptions,
    resume: Option<TrainState>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    tc.validate()?;
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Data(format!(
            "training needs non-empty train and val splits (got {} and {} windows)",
            data.train.len(),
            data.val.len()
        )));
    }
    if data.variates != cfg.variates
        || data.window.lookback != cfg.lookback
        || data.window.horizon != cfg.horizon
    {
        return Err(Error::Config(format!(
            "data windows are {}x{} -> {} but the model expects {}x{} -> {}",
            data.variates, data.window.lookback, data.window.horizon, cfg.variates, cfg.lookback, cfg.horizon
        )));
    }
    let workers = Workers::new(opts.threads)?;
    let mut state = match resume {
        Some(s) => s,
        None => TrainState::fresh(cfg, tc)?,
    };
    state.stopper.patience = tc.patience;
    let shuffle = SeedRng::new(tc.seed).split("shuffle");
    let rms = tc.rmsprop();
    let mut log = Vec::new();
    let start = Instant::now();
    let mut stop_reason = StopReason::MaxEpochs;
    let mut divergence = None;
    let mut indices: Vec<usize> = (0..data.train.len()).collect();

    'epochs: while state.epochs_completed < tc.max_epochs {
        let epoch = state.epochs_completed + 1;
        indices.sort_unstable();
        indices.shuffle(&mut shuffle.stream(&format!("epoch.{epoch}")));
        let epoch_start = state.params.clone();
        let epoch_opt = state.opt.clone();

        let mut loss_sum = 0.0;
        for batch_idx in indices.chunks(tc.batch_size) {
            let batch: Vec<WindowSample> = batch_idx.iter().map(|&i| data.train[i].clone()).collect();
            let g = match compute_gradients_with(&state.params, &batch, cfg, &workers) {
                Ok(g) if g.loss.is_finite() => g,
                Ok(_) => {
                    divergence = Some(format!("non-finite training loss in epoch {epoch}"));
                    break;
                }
                Err(Error::NonFiniteGradient(name)) => {
                    divergence = Some(format!("non-finite gradient for `{name}` in epoch {epoch}"));
                    break;
                }
                // Inputs are finite, so this comes from the parameters.
                Err(Error::NonFinite { context, .. }) => {
                    divergence = Some(format!("non-finite activations ({context}) in epoch {epoch}"));
                    break;
                }
                Err(e) => return Err(e),
            };
            loss_sum += g.loss * batch.len() as f64;
            rmsprop_step(&mut state.params, &g.grads, &mut state.opt, &rms);
        }
        let val = if divergence.is_none() {
            match evaluate_mse(&state.params, cfg, &data.val, &workers) {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) | Err(Error::NonFinite { .. }) => {
                    divergence = Some(format!("non-finite validation loss in epoch {epoch}"));
                    None
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let Some(val_mse) = val else {
            log::warn!("{}; keeping parameters from epoch {}", divergence.as_deref().unwrap_or(""), state.stopper.best_epoch);
            state.params = epoch_start;
            state.opt = epoch_opt;
            stop_reason = StopReason::Diverged;
            break 'epochs;
        };

        let train_mse = loss_sum / (data.train.len() * cfg.horizon) as f64;
        let (improved, stop) = state.stopper.observe(epoch, val_mse);
        if improved {
            state.best_params = state.params.clone();
        }
        state.epochs_completed = epoch;
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            elapsed_s: if opts.record_elapsed { start.elapsed().as_secs_f64() } else { 0.0 },
            stopped: stop,
        };
        log::info!("epoch {epoch}: train {train_mse:.6} val {val_mse:.6}{}", if improved { " *" } else { "" });
        log.push(record);
        if stop {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    Ok(TrainOutcome {
        best_params: state.best_params.clone(),
        best_epoch: state.stopper.best_epoch,
        best_val: state.stopper.best,
        log,
        stop_reason,
        state,
        divergence,
    })
}

#[derive(Serialize, Deserialize)]
struct StateExtra {
    step: u64,
    epochs_completed: usize,
    best_val: Option<f64>,
    best_epoch: usize,
    bad_epochs: usize,
    patience: usize,
}

/// Writes the full resumable state (parameters, optimizer accumulators, best
/// parameters and stopping counters) as a checkpoint file.
pub fn save_state(path: impl AsRef<Path>, state: &TrainState, cfg: &ModelConfig, seed: u64) -> Result<()> {
    let mut tensors: Vec<ParamRef<'_>> = state.params.tensors();
    for (prefix, src) in [("opt.", &state.opt.sq_avg), ("best.", &state.best_params)] {
        tensors.extend(src.tensors().into_iter().map(|mut t| {
            t.name = format!("{prefix}{}", t.name);
            t
        }));
    }
    let best_val = state.stopper.best.is_finite().then_some(state.stopper.best);
    let extra = StateExtra {
        step: state.opt.step,
        epochs_completed: state.epochs_completed,
        best_val,
        best_epoch: state.stopper.best_epoch,
        bad_epochs: state.stopper.bad_epochs,
        patience: state.stopper.patience,
    };
    let meta = CheckpointMeta {
        model: cfg.clone(),
        seed,
        epoch: state.epochs_completed,
        val_loss: best_val,
        extra: serde_json::to_value(extra)?,
    };
    save_checkpoint(path, &tensors, &meta)
}

pub fn load_state(path: impl AsRef<Path>) -> Result<(TrainState, CheckpointMeta)> {
    let (tensors, meta) = load_checkpoint(path)?;
    let extra: StateExtra = serde_json::from_value(meta.extra.clone())
        .map_err(|e| Error::Checkpoint(format!("state file is missing resume fields: {e}")))?;
    let per = ModelParams::zeros(&meta.model).tensors().len();
    if tensors.len() != 3 * per {
        return Err(Error::Checkpoint(format!(
            "state file holds {} tensors, expected {}",
            tensors.len(),
            3 * per
        )));
    }
    let strip = |chunk: &[TensorData], prefix: &str| -> Result<Vec<TensorData>> {
        chunk
            .iter()
            .map(|t| {
                let name = t.name.strip_prefix(prefix).ok_or_else(|| {
                    Error::Checkpoint(format!("state tensor `{}` lacks prefix `{prefix}`", t.name))
                })?;
                Ok(TensorData {
                    name: name.to_string(),
                    ..t.clone()
                })
            })
            .collect()
    };
    let params = ModelParams::from_named(&meta.model, &tensors[..per])?;
    let sq_avg = ModelParams::from_named(&meta.model, &strip(&tensors[per..2 * per], "opt.")?)?;
    let best_params = ModelParams::from_named(&meta.model, &strip(&tensors[2 * per..], "best.")?)?;
    let state = TrainState {
        params,
        opt: OptState {
            sq_avg,
            step: extra.step,
        },
        best_params,
        stopper: EarlyStopping {
            patience: extra.patience,
            best: extra.best_val.unwrap_or(f64::INFINITY),
            best_epoch: extra.best_epoch,
            bad_epochs: extra.bad_epochs,
        },
        epochs_completed: extra.epochs_completed,
    };
    Ok((state, meta))
}
