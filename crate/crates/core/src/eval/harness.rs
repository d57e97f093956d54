//! Full train/evaluate cycles: single runs, look-back sweeps and ablations.

use std::path::Path;

use serde::Serialize;

use super::baselines::{baseline_linear, baseline_persistence};
use super::metrics::{compute_metrics, MetricReport};
use crate::data::{
    load_manifest_records, DatasetManifest, SeriesRecord, SubjectSplit, WindowConfig, WindowSample, WindowedDataset,
    DEFAULT_STD_FLOOR,
};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::parallel::Workers;
use crate::train::{predict_windows, train_with, StopReason, TrainConfig, TrainOptions, TrainOutcome};
use crate::ModelParams;

/// Series plus a fixed subject split; windows are cut per run so the
/// look-back can vary.
#[derive(Clone, Debug)]
pub struct DataSource {
    pub records: Vec<SeriesRecord>,
    pub split: SubjectSplit,
    pub stride: usize,
    pub std_floor: f64,
}

impl DataSource {
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        Ok(Self {
            records: load_manifest_records(manifest)?,
            split: manifest.split.clone(),
            stride: manifest.window.stride,
            std_floor: DEFAULT_STD_FLOOR,
        })
    }

    pub fn shortest_series(&self) -> usize {
        self.records.iter().map(|r| r.len()).min().unwrap_or(0)
    }

    pub fn windows(&self, lookback: usize, horizon: usize) -> Result<WindowedDataset> {
        let window = WindowConfig {
            lookback,
            horizon,
            stride: self.stride,
        };
        WindowedDataset::build(&self.records, &self.split, window, self.std_floor)
    }
}

/// Model predictions scored against the window targets.
pub fn evaluate_params(
    params: &ModelParams,
    cfg: &ModelConfig,
    samples: &[WindowSample],
    workers: &Workers,
) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty split".into()));
    }
    let preds = predict_windows(params, cfg, samples, workers)?;
    let targets: Vec<_> = samples.iter().map(|w| w.horizon.clone()).collect();
    compute_metrics(&preds, &targets)
}

/// Persistence and ridge-linear scores on `data.test`, the ridge map fitted
/// on `data.train`.
pub fn evaluate_baselines(data: &WindowedDataset) -> Result<(MetricReport, MetricReport)> {
    if data.test.is_empty() {
        return Err(Error::Data("test split has no windows".into()));
    }
    let horizon = data.window.horizon;
    let targets: Vec<_> = data.test.iter().map(|w| w.horizon.clone()).collect();
    let persistence = data
        .test
        .iter()
        .map(|w| baseline_persistence(&w.lookback, horizon))
        .collect::<Result<Vec<_>>>()?;
    let ridge = baseline_linear(&data.train)?;
    let linear = data.test.iter().map(|w| ridge.predict(&w.lookback)).collect::<Result<Vec<_>>>()?;
    let mut linear_report = compute_metrics(&linear, &targets)?;
    if ridge.rank_deficient {
        linear_report
            .notes
            .push("ridge normal equations were rank deficient; solution relies on damping".into());
    }
    Ok((compute_metrics(&persistence, &targets)?, linear_report))
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    /// Best parameters scored on the test split.
    pub test: MetricReport,
}

/// Trains on `data` and scores the best parameters on its test split.
pub fn train_and_evaluate(
    data: &WindowedDataset,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    opts: TrainOptions,
) -> Result<RunResult> {
    let outcome = train_with(data, cfg, tc, opts, None)?;
    if outcome.stop_reason == StopReason::Diverged {
        log::warn!("{}", outcome.divergence.as_deref().unwrap_or("training diverged"));
    }
    let workers = Workers::new(opts.threads)?;
    let test = evaluate_params(&outcome.best_params, cfg, &data.test, &workers)?;
    Ok(RunResult { outcome, test })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    /// `L=<lookback>` for sweeps, the variant name for ablations.
    pub config: String,
    pub lookback: usize,
    pub mse: f64,
    pub mae: f64,
    pub r: Option<f64>,
    pub r2: Option<f64>,
    pub best_epoch: usize,
    pub epochs: usize,
}

impl TableRow {
    fn new(config: String, lookback: usize, run: &RunResult) -> Self {
        Self {
            config,
            lookback,
            mse: run.test.mse,
            mae: run.test.mae,
            r: run.test.r,
            r2: run.test.r2,
            best_epoch: run.outcome.best_epoch,
            epochs: run.outcome.state.epochs_completed,
        }
    }
}

/// Odd moving-average kernel no longer than the look-back.
fn fit_kernel(kernel: usize, lookback: usize) -> usize {
    let k = kernel.min(lookback);
    if k % 2 == 0 {
        k - 1
    } else {
        k
    }
}

/// One independent train/evaluate cycle per look-back, horizon and seeds
/// fixed. Look-backs that do not fit the shortest series are skipped with a
/// warning.
pub fn sweep_lookback(
    source: &DataSource,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    lookbacks: &[usize],
    opts: TrainOptions,
) -> Result<Vec<TableRow>> {
    let shortest = source.shortest_series();
    let mut rows = Vec::new();
    for &l in lookbacks {
        if l == 0 || l + cfg.horizon > shortest {
            log::warn!("skipping L={l}: L + T = {} exceeds the shortest series ({shortest})", l + cfg.horizon);
            continue;
        }
        let mut c = cfg.clone();
        c.lookback = l;
        c.kernel = fit_kernel(cfg.kernel, l);
        let data = source.windows(l, cfg.horizon)?;
        let run = train_and_evaluate(&data, &c, tc, opts)?;
        rows.push(TableRow::new(format!("L={l}"), l, &run));
    }
    Ok(rows)
}

pub const ABLATION_VARIANTS: [&str; 4] = ["full", "no_sia", "no_tfr", "no_spa"];

/// Trains the full model and the three single-module ablations on the same
/// windows with the same seeds.
pub fn run_ablation(
    source: &DataSource,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    opts: TrainOptions,
) -> Result<Vec<TableRow>> {
    let data = source.windows(cfg.lookback, cfg.horizon)?;
    ablation_on(&data, cfg, tc, opts)
}

/// [`run_ablation`] on already windowed data.
pub fn ablation_on(data: &WindowedDataset, cfg: &ModelConfig, tc: &TrainConfig, opts: TrainOptions) -> Result<Vec<TableRow>> {
    ABLATION_VARIANTS
        .iter()
        .map(|&variant| {
            let mut c = cfg.clone();
            c.enable_sia = variant != "no_sia";
            c.enable_tfr = variant != "no_tfr";
            c.enable_spa = variant != "no_spa";
            let run = train_and_evaluate(data, &c, tc, opts)?;
            log::info!("ablation {variant}: test mse {:.6}", run.test.mse);
            Ok(TableRow::new(variant.to_string(), c.lookback, &run))
        })
        .collect()
}

pub fn write_table_csv(rows: &[TableRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let err = |e: csv::Error| Error::Data(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
