//! Metrics, baselines, attention export, look-back sweeps and ablations.

pub mod attention;
pub mod baselines;
pub mod harness;
pub mod metrics;

pub use attention::{export_attention, variate_scores, write_attention_csv, AttentionExport};
pub use baselines::{baseline_linear, baseline_persistence, RidgeLinear, RIDGE_LAMBDA};
pub use harness::{
    ablation_on, evaluate_baselines, evaluate_params, run_ablation, sweep_lookback, train_and_evaluate,
    write_table_csv, DataSource, RunResult, TableRow, ABLATION_VARIANTS,
};
pub use metrics::{compute_metrics, MetricReport, GLOBAL_AGGREGATION};
