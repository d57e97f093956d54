use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn braincast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_braincast"))
        .args(args)
        .env("BRAINCAST_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = braincast(args);
    assert!(
        out.status.success(),
        "braincast {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Four short subjects with four variates; windows of 16 → 4 at stride 8.
fn small_dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    ok(&[
        "generate", "--subjects", "4", "--variates", "4", "--length", "120", "--seed", "3", "--lookback", "16",
        "--horizon", "4", "--stride", "8", "--out", p(&data),
    ]);
    data.join("manifest.json")
}

const TINY: &[&str] = &[
    "--model.D", "8", "--model.G", "1", "--model.heads", "2", "--model.kernel", "3", "--train.lr", "1e-3",
    "--train.batch_size", "8", "--train.seed", "5",
];

fn train(manifest: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["train", "--manifest", p(manifest), "--out", p(out)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(extra);
    ok(&args)
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn default_train_config_echoes_reference_setting() {
    let text = ok(&["train", "--dry-run"]);
    let cfg: Value = serde_json::from_str(&text).unwrap();
    for (key, want) in [("L", 140), ("T", 20), ("D", 512), ("G", 2), ("heads", 8)] {
        assert_eq!(cfg["model"][key], want, "model.{key}");
    }
    assert_eq!(cfg["data"]["s"], 20);
    assert_eq!(cfg["train"]["lr"], 1e-5);
    assert_eq!(cfg["train"]["batch_size"], 64);
    assert_eq!(cfg["train"]["patience"], 5);
    assert_eq!(cfg["provenance"]["model.L"], "default");
}

#[test]
fn generate_writes_one_csv_per_subject_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    ok(&[
        "generate", "--subjects", "12", "--variates", "16", "--length", "800", "--seed", "7", "--out", p(&out),
    ]);
    let csvs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 12);
    let manifest: Value = serde_json::from_slice(&read(out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 12);
    let split = &manifest["split"];
    let sizes: Vec<usize> = ["train", "val", "test"].iter().map(|k| split[k].as_array().unwrap().len()).collect();
    assert_eq!(sizes, vec![10, 1, 1]);
}

#[test]
fn split_seed_reshuffles_subjects_of_the_same_series() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, split_seed: &str| {
        let out = dir.path().join(name);
        ok(&[
            "generate", "--subjects", "6", "--variates", "4", "--length", "60", "--seed", "4", "--split-seed",
            split_seed, "--out", p(&out),
        ]);
        out
    };
    let splits: Vec<(PathBuf, Value)> = ["1", "2", "3"]
        .iter()
        .map(|s| {
            let out = gen(&format!("d{s}"), s);
            let m: Value = serde_json::from_slice(&read(out.join("manifest.json"))).unwrap();
            (out, m["split"].clone())
        })
        .collect();
    for i in 0..6 {
        let f = format!("sub{i:03}.csv");
        assert_eq!(read(splits[0].0.join(&f)), read(splits[1].0.join(&f)), "{f}");
    }
    assert!(splits[1..].iter().any(|(_, s)| *s != splits[0].1), "split never changed");
}

#[test]
fn identical_train_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let (a, b) = (dir.path().join("run1"), dir.path().join("run2"));
    train(&manifest, &a, &["--train.max_epochs", "3"]);
    train(&manifest, &b, &["--train.max_epochs", "3"]);
    for f in ["train_log.jsonl", "metrics.json", "checkpoint.bin", "state.bin", "config.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f} differs");
    }
    let log = String::from_utf8(read(a.join("train_log.jsonl"))).unwrap();
    assert_eq!(log.lines().count(), 3);
    let first: Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    for key in ["epoch", "train_mse", "val_mse", "elapsed_s", "stopped"] {
        assert!(first.get(key).is_some(), "log record lacks {key}");
    }
    let metrics: Value = serde_json::from_slice(&read(a.join("metrics.json"))).unwrap();
    for key in ["mse", "mae", "r", "r2", "n_samples", "n_variates", "horizon", "aggregation"] {
        assert!(metrics.get(key).is_some(), "metrics lack {key}");
    }
    let cfg: Value = serde_json::from_slice(&read(a.join("config.json"))).unwrap();
    assert_eq!(cfg["model"]["N"], 4);
    assert_eq!(cfg["provenance"]["model.N"], "data");
    assert_eq!(cfg["provenance"]["model.D"], "flag");
}

#[test]
fn resumed_training_continues_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let (full, split) = (dir.path().join("full"), dir.path().join("split"));
    train(&manifest, &full, &["--train.max_epochs", "4", "--train.patience", "10"]);
    train(&manifest, &split, &["--train.max_epochs", "2", "--train.patience", "10"]);
    let mut args = vec!["train", "--resume", "--manifest", p(&manifest), "--out", p(&split)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--train.max_epochs", "4", "--train.patience", "10"]);
    ok(&args);
    for f in ["train_log.jsonl", "checkpoint.bin", "state.bin", "metrics.json"] {
        assert_eq!(read(full.join(f)), read(split.join(f)), "{f} differs after resume");
    }
}

#[test]
fn eval_reproduces_the_best_validation_loss() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("run");
    train(&manifest, &run, &["--train.max_epochs", "4"]);
    let log = String::from_utf8(read(run.join("train_log.jsonl"))).unwrap();
    let best = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["val_mse"].as_f64().unwrap())
        .fold(f64::INFINITY, f64::min);
    let ckpt = run.join("checkpoint.bin");
    let text = ok(&["eval", "--checkpoint", p(&ckpt), "--split", "val", "--out", p(&run)]);
    let report: Value = serde_json::from_str(&text).unwrap();
    assert!((report["mse"].as_f64().unwrap() - best).abs() < 1e-9);
    assert!(run.join("metrics_val.json").exists());

    let test: Value = serde_json::from_str(&ok(&["eval", "--checkpoint", p(&ckpt)])).unwrap();
    let stored: Value = serde_json::from_slice(&read(run.join("metrics.json"))).unwrap();
    assert_eq!(test["mse"], stored["mse"]);
}

#[test]
fn forecast_and_attention_export() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("run");
    train(&manifest, &run, &["--train.max_epochs", "1"]);
    let ckpt = run.join("checkpoint.bin");

    let fc = dir.path().join("fc.csv");
    let series = manifest.parent().unwrap().join("sub000.csv");
    ok(&["forecast", "--checkpoint", p(&ckpt), "--input", p(&series), "--out", p(&fc)]);
    let text = String::from_utf8(read(&fc)).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "t,v0,v1,v2,v3");
    assert_eq!(lines.len(), 1 + 4);
    assert!(lines[1].starts_with("120,"));

    let attn = dir.path().join("attn");
    ok(&["export-attn", "--checkpoint", p(&ckpt), "--out", p(&attn)]);
    for f in ["sia_layer0.csv", "spa_scores.csv", "variate_scores.csv"] {
        assert!(attn.join(f).exists(), "{f} missing");
    }
    let scores = String::from_utf8(read(attn.join("variate_scores.csv"))).unwrap();
    let total: f64 = scores.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-6);
}

#[test]
fn ablation_without_sia_skips_its_export() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("run");
    train(&manifest, &run, &["--train.max_epochs", "1", "--model.enable_sia", "false"]);
    let attn = dir.path().join("attn");
    let out = braincast(&["export-attn", "--checkpoint", p(&run.join("checkpoint.bin")), "--out", p(&attn)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("SIA maps omitted"));
    assert!(!attn.join("sia_layer0.csv").exists());
    assert!(attn.join("spa_scores.csv").exists());
}

#[test]
fn ablate_and_sweep_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let out = dir.path().join("ablate");
    let mut args = vec!["ablate", "--manifest", p(&manifest), "--out", p(&out)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--train.max_epochs", "1"]);
    ok(&args);
    let table = String::from_utf8(read(out.join("ablation.csv"))).unwrap();
    let names: Vec<_> = table.lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(names, ["full", "no_sia", "no_tfr", "no_spa"]);

    let out = dir.path().join("sweep");
    let mut args = vec!["sweep", "--lookbacks", "8,16,500", "--manifest", p(&manifest), "--out", p(&out)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--train.max_epochs", "1"]);
    let o = braincast(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(read(out.join("sweep.csv"))).unwrap();
    assert_eq!(table.lines().count(), 1 + 2, "infeasible L=500 is skipped");
    assert!(table.starts_with("config,lookback,mse,mae,r,r2,best_epoch,epochs\n"));
}

#[test]
fn exit_codes_follow_the_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| braincast(args).status.code().unwrap();
    assert_eq!(code(&["train", "--dry-run", "--model.nope", "1"]), 1);
    assert_eq!(code(&["train", "--config", p(&dir.path().join("missing.json")), "--out", "x"]), 1);
    assert_eq!(code(&["train", "--dry-run", "--model.D", "30"]), 1);
    assert_eq!(code(&["no-such-command"]), 1);

    let manifest = small_dataset(dir.path());
    let bad = manifest.parent().unwrap().join("sub001.csv");
    std::fs::write(&bad, "t,v0,v1,v2,v3\n0,1,2,3,oops\n").unwrap();
    let r = dir.path().join("r");
    let mut args = vec!["train", "--manifest", p(&manifest), "--out", p(&r)];
    args.extend_from_slice(TINY);
    assert_eq!(code(&args), 2);

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"{\"format\":\"x\"}\n").unwrap();
    assert_eq!(code(&["eval", "--checkpoint", p(&junk), "--manifest", p(&manifest)]), 4);
    assert_eq!(code(&["eval", "--checkpoint", p(&dir.path().join("none.bin"))]), 4);
}

#[test]
fn divergence_exits_with_code_three_and_keeps_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = small_dataset(dir.path());
    let run = dir.path().join("run");
    let mut args = vec!["train", "--manifest", p(&manifest), "--out", p(&run)];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--train.lr", "1e300", "--train.max_epochs", "3"]);
    let out = braincast(&args);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run.join("checkpoint.bin").exists());
}
