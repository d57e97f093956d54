use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use braincast::data::{
    generate_synthetic, load_series_csv, normalize_window, denormalize_forecast, split_subjects, DatasetManifest,
    FileEntry, Normalization, SplitName, SyntheticConfig, WindowConfig, WindowSample, write_series_csv,
    DEFAULT_FRACTIONS, DEFAULT_STD_FLOOR,
};
use braincast::eval::{
    evaluate_params, export_attention, run_ablation, sweep_lookback, write_attention_csv, write_table_csv,
    DataSource,
};
use braincast::model::{model_forward, predict};
use braincast::parallel::{threads_from_env, Workers};
use braincast::train::{
    load_params, load_state, save_params, save_state, train_with, CheckpointMeta, StopReason, TrainOptions,
};
use braincast::{Error, ModelParams, RealMatrix, SeedRng};
use serde_json::{json, Value};

use crate::config::{Resolver, RunConfig};
use crate::{CliError, ExportArgs, EvalArgs, ForecastArgs, GenerateArgs, RunArgs, SweepArgs, TrainArgs};

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    write_text(path, &(text + "\n"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn options() -> TrainOptions {
    let threads = threads_from_env();
    TrainOptions {
        threads,
        // Wall-clock time would make logs differ between identical runs.
        record_elapsed: threads > 0,
    }
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        subjects: a.subjects,
        variates: a.variates,
        length: a.length,
        latents: a.latents,
        noise_ar: a.noise_ar,
        noise_std: a.noise_std,
    };
    let rng = SeedRng::new(a.seed);
    let records = generate_synthetic(&cfg, &rng)?;
    let split_seed = a.split_seed.unwrap_or(a.seed);
    let split = split_subjects(&records, DEFAULT_FRACTIONS, &SeedRng::new(split_seed))?;
    create_dir(&a.out)?;
    let mut files = Vec::with_capacity(records.len());
    for r in &records {
        let name = format!("{}.csv", r.subject_id);
        write_series_csv(a.out.join(&name), r)?;
        files.push(FileEntry {
            path: PathBuf::from(name),
            subject_id: r.subject_id.clone(),
        });
    }
    let manifest = DatasetManifest {
        files,
        split,
        window: WindowConfig {
            lookback: a.lookback,
            horizon: a.horizon,
            stride: a.stride,
        },
        seed: split_seed,
        normalization: Normalization::LookbackZscore,
    };
    let manifest_path = a.out.join("manifest.json");
    manifest.save(&manifest_path)?;
    DatasetManifest::load(&manifest_path)?;
    write_json(&a.out.join("generator.json"), &cfg)?;
    println!("wrote {} series and manifest.json to {}", records.len(), a.out.display());
    Ok(())
}

struct Prepared {
    resolver: Resolver,
    cfg: RunConfig,
    manifest_path: Option<PathBuf>,
    source: Option<DataSource>,
}

/// Merges defaults, config file and flags; loads the dataset when one is
/// configured and lets it fill unset window sizes and `N`.
fn prepare(run: &RunArgs, need_data: bool) -> Result<Option<Prepared>> {
    let mut r = Resolver::new();
    if let Some(path) = &run.config {
        r.apply_file(path)?;
    }
    if let Some(m) = &run.manifest {
        r.set_flag("data.manifest", Value::String(m.display().to_string()))?;
    }
    r.apply_flags(&run.overrides)?;
    if run.dry_run {
        let cfg = r.resolve()?;
        println!("{}", serde_json::to_string_pretty(&r.resolved_document(&cfg)).map_err(Error::from)?);
        return Ok(None);
    }
    let manifest_path = match r.get("data.manifest") {
        Value::String(s) => Some(PathBuf::from(s)),
        Value::Null => None,
        other => return Err(CliError::Usage(format!("data.manifest must be a path, got {other}"))),
    };
    let source = match &manifest_path {
        Some(path) => {
            let manifest = DatasetManifest::load(path)?;
            let source = DataSource::from_manifest(&manifest)?;
            let variates = source
                .records
                .first()
                .ok_or_else(|| Error::Data("manifest lists no series".into()))?
                .variates();
            r.apply_manifest(&manifest, variates)?;
            Some(source)
        }
        None if need_data => {
            return Err(CliError::Usage(
                "no dataset: pass --manifest or set data.manifest in the config".into(),
            ))
        }
        None => None,
    };
    let cfg = r.resolve()?;
    let source = source.map(|mut s| {
        s.stride = cfg.data.s;
        s.std_floor = cfg.data.std_floor;
        s
    });
    Ok(Some(Prepared {
        resolver: r,
        cfg,
        manifest_path,
        source,
    }))
}

fn out_dir(run: &RunArgs) -> Result<&Path> {
    let out = run.out.as_deref().ok_or_else(|| CliError::Usage("--out is required".into()))?;
    create_dir(out)?;
    Ok(out)
}

fn write_config(out: &Path, p: &Prepared) -> Result<()> {
    write_json(&out.join("config.json"), &p.resolver.resolved_document(&p.cfg))
}

pub fn train(a: TrainArgs) -> Result<()> {
    let Some(p) = prepare(&a.run, true)? else {
        return Ok(());
    };
    let out = out_dir(&a.run)?;
    let source = p.source.as_ref().expect("dataset loaded");
    let cfg = &p.cfg;
    let data = source.windows(cfg.model.lookback, cfg.model.horizon)?;
    log::info!(
        "windows: {} train, {} val, {} test",
        data.train.len(),
        data.val.len(),
        data.test.len()
    );

    let log_path = out.join("train_log.jsonl");
    let state_path = out.join("state.bin");
    let (resume, mut log_text) = if a.resume {
        let (state, meta) = load_state(&state_path)?;
        if meta.model != cfg.model || meta.seed != cfg.train.seed {
            return Err(CliError::Usage(format!(
                "{} was written with a different model configuration or seed",
                state_path.display()
            )));
        }
        let previous = std::fs::read_to_string(&log_path).map_err(|e| io_err(&log_path, e))?;
        let kept: String = previous
            .lines()
            .take(state.epochs_completed)
            .map(|l| format!("{l}\n"))
            .collect();
        (Some(state), kept)
    } else {
        (None, String::new())
    };
    write_config(out, &p)?;

    let outcome = train_with(&data, &cfg.model, &cfg.train, options(), resume)?;
    for rec in &outcome.log {
        let _ = writeln!(log_text, "{}", serde_json::to_string(rec).map_err(Error::from)?);
    }
    write_text(&log_path, &log_text)?;

    let manifest = p
        .manifest_path
        .as_ref()
        .map(|m| std::fs::canonicalize(m).unwrap_or_else(|_| m.clone()).display().to_string());
    let meta = CheckpointMeta {
        model: cfg.model.clone(),
        seed: cfg.train.seed,
        epoch: outcome.best_epoch,
        val_loss: outcome.best_val.is_finite().then_some(outcome.best_val),
        extra: json!({
            "manifest": manifest,
            "stride": cfg.data.s,
            "std_floor": cfg.data.std_floor,
        }),
    };
    save_params(out.join("checkpoint.bin"), &outcome.best_params, &meta)?;
    save_state(&state_path, &outcome.state, &cfg.model, cfg.train.seed)?;

    let workers = Workers::new(options().threads)?;
    let metrics = evaluate_params(&outcome.best_params, &cfg.model, &data.test, &workers)?;
    write_json(&out.join("metrics.json"), &metrics)?;
    println!(
        "best epoch {} (val mse {:.6}); test mse {:.6}, r {}; {} epochs, stop: {:?}",
        outcome.best_epoch,
        outcome.best_val,
        metrics.mse,
        metrics.r.map_or("n/a".to_string(), |r| format!("{r:.4}")),
        outcome.state.epochs_completed,
        outcome.stop_reason
    );
    if outcome.stop_reason == StopReason::Diverged {
        return Err(CliError::Diverged(outcome.divergence.unwrap_or_default()));
    }
    Ok(())
}

/// Parameters, checkpoint metadata and the dataset windows the checkpoint
/// was trained on (or those of `manifest` when given).
fn checkpoint_data(
    checkpoint: &Path,
    manifest: Option<&Path>,
) -> Result<(ModelParams, CheckpointMeta, braincast::data::WindowedDataset)> {
    let (params, meta) = load_params(checkpoint)?;
    let manifest_path = match manifest {
        Some(m) => m.to_path_buf(),
        None => meta
            .extra
            .get("manifest")
            .and_then(Value::as_str)
            .map(PathBuf::from)
            .ok_or_else(|| CliError::Usage("checkpoint records no manifest; pass --manifest".into()))?,
    };
    let manifest = DatasetManifest::load(&manifest_path)?;
    let mut source = DataSource::from_manifest(&manifest)?;
    if let Some(s) = meta.extra.get("stride").and_then(Value::as_u64) {
        source.stride = s as usize;
    }
    if let Some(f) = meta.extra.get("std_floor").and_then(Value::as_f64) {
        source.std_floor = f;
    }
    let data = source.windows(meta.model.lookback, meta.model.horizon)?;
    if data.variates != meta.model.variates {
        return Err(CliError::Core(Error::Data(format!(
            "dataset has {} variates, checkpoint expects {}",
            data.variates, meta.model.variates
        ))));
    }
    Ok((params, meta, data))
}

fn parse_split(s: &str) -> Result<SplitName> {
    s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let split = parse_split(&a.split)?;
    let (params, meta, data) = checkpoint_data(&a.checkpoint, a.manifest.as_deref())?;
    let workers = Workers::new(options().threads)?;
    let report = evaluate_params(&params, &meta.model, data.split(split), &workers)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_json(&out.join(format!("metrics_{}.json", a.split)), &report)?;
    }
    Ok(())
}

pub fn forecast(a: ForecastArgs) -> Result<()> {
    let (params, meta) = load_params(&a.checkpoint)?;
    let cfg = &meta.model;
    let series = load_series_csv(&a.input, "input")?;
    if series.variates() != cfg.variates {
        return Err(CliError::Core(Error::Data(format!(
            "{} has {} variates, the model expects {}",
            a.input.display(),
            series.variates(),
            cfg.variates
        ))));
    }
    if series.len() < cfg.lookback {
        return Err(CliError::Core(Error::Data(format!(
            "{} has {} points, the model needs a look-back of {}",
            a.input.display(),
            series.len(),
            cfg.lookback
        ))));
    }
    let start = series.len() - cfg.lookback;
    let raw = WindowSample {
        lookback: RealMatrix::from_fn(cfg.variates, cfg.lookback, |r, c| series.values.get(r, start + c)),
        horizon: RealMatrix::zeros(cfg.variates, cfg.horizon),
        norm_mean: vec![0.0; cfg.variates],
        norm_std: vec![1.0; cfg.variates],
        subject_id: "input".into(),
        offset: start,
    };
    let floor = meta.extra.get("std_floor").and_then(Value::as_f64).unwrap_or(DEFAULT_STD_FLOOR);
    let w = normalize_window(&raw, floor);
    let pred = denormalize_forecast(&predict(&w.lookback, &params, cfg)?, &w)?;

    let mut text = String::from("t");
    for v in 0..cfg.variates {
        let _ = write!(text, ",v{v}");
    }
    text.push('\n');
    for step in 0..cfg.horizon {
        let _ = write!(text, "{}", series.len() + step);
        for v in 0..cfg.variates {
            let _ = write!(text, ",{}", pred.get(v, step));
        }
        text.push('\n');
    }
    write_text(&a.out, &text)?;
    println!("wrote {}-step forecast to {}", cfg.horizon, a.out.display());
    Ok(())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let Some(p) = prepare(&a.run, true)? else {
        return Ok(());
    };
    let out = out_dir(&a.run)?;
    write_config(out, &p)?;
    let source = p.source.as_ref().expect("dataset loaded");
    let rows = sweep_lookback(source, &p.cfg.model, &p.cfg.train, &a.lookbacks, options())?;
    if rows.len() < a.lookbacks.len() {
        eprintln!(
            "notice: {} look-back value(s) skipped as infeasible for the shortest series",
            a.lookbacks.len() - rows.len()
        );
    }
    write_table_csv(&rows, out.join("sweep.csv"))?;
    for r in &rows {
        println!("{}: mse {:.6} mae {:.6}", r.config, r.mse, r.mae);
    }
    Ok(())
}

pub fn ablate(a: RunArgs) -> Result<()> {
    let Some(p) = prepare(&a, true)? else {
        return Ok(());
    };
    let out = out_dir(&a)?;
    write_config(out, &p)?;
    let source = p.source.as_ref().expect("dataset loaded");
    let rows = run_ablation(source, &p.cfg.model, &p.cfg.train, options())?;
    write_table_csv(&rows, out.join("ablation.csv"))?;
    for r in &rows {
        println!("{}: mse {:.6} mae {:.6}", r.config, r.mse, r.mae);
    }
    Ok(())
}

pub fn export_attn(a: ExportArgs) -> Result<()> {
    let split = parse_split(&a.split)?;
    let (params, meta, data) = checkpoint_data(&a.checkpoint, a.manifest.as_deref())?;
    let samples = data.split(split);
    let take = a.max_windows.unwrap_or(samples.len()).min(samples.len());
    let traces = Workers::new(options().threads)?
        .map(&samples[..take], |w| model_forward(&w.lookback, &params, &meta.model))
        .into_iter()
        .collect::<braincast::Result<Vec<_>>>()?;
    let export = export_attention(&traces)?;
    for notice in &export.notices {
        eprintln!("notice: {notice}");
    }
    for path in write_attention_csv(&export, &a.out)? {
        println!("{}", path.display());
    }
    Ok(())
}
