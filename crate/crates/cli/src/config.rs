//! Run configuration: defaults, a JSON file and `--section.key value` flags
//! merged into one resolved document, with the origin of every value.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use braincast::data::{DatasetManifest, DEFAULT_STD_FLOOR};
use braincast::numerics::decompose::DEFAULT_KERNEL;
use braincast::train::TrainConfig;
use braincast::ModelConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    /// Window stride.
    pub s: usize,
    pub std_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub data: DataSection,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::reference(268),
            data: DataSection {
                manifest: None,
                s: 20,
                std_floor: DEFAULT_STD_FLOOR,
            },
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Flag,
    /// Taken from the dataset manifest or the data itself.
    Data,
    /// Computed from other values (feed-forward widths, kernel).
    Derived,
}

/// Flat `section.key → value` view with provenance.
#[derive(Clone, Debug)]
pub struct Resolver {
    values: BTreeMap<String, (Value, Source)>,
}

fn flatten(v: &Value) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    if let Value::Object(sections) = v {
        for (section, body) in sections {
            if let Value::Object(fields) = body {
                for (k, val) in fields {
                    out.insert(format!("{section}.{k}"), val.clone());
                }
            }
        }
    }
    out
}

impl Resolver {
    pub fn new() -> Self {
        let defaults = serde_json::to_value(RunConfig::default()).expect("default config serializes");
        Self {
            values: flatten(&defaults).into_iter().map(|(k, v)| (k, (v, Source::Default))).collect(),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    fn set(&mut self, key: &str, value: Value, source: Source) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = (value, source);
                Ok(())
            }
            None => Err(CliError::Usage(format!(
                "unknown configuration key `{key}`; known keys: {}",
                self.keys().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn set_flag(&mut self, key: &str, value: Value) -> Result<(), CliError> {
        self.set(key, value, Source::Flag)
    }

    pub fn get(&self, key: &str) -> &Value {
        &self.values[key].0
    }

    pub fn source(&self, key: &str) -> Source {
        self.values.get(key).map_or(Source::Default, |v| v.1)
    }

    /// Overlays a JSON config file. A top-level `provenance` object (as
    /// written into run directories) is ignored, so resolved configs can be
    /// fed back in.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let Value::Object(obj) = &mut doc else {
            return Err(CliError::Usage(format!("config {} must be a JSON object", path.display())));
        };
        obj.remove("provenance");
        for (section, body) in obj.iter() {
            if !body.is_object() {
                return Err(CliError::Usage(format!(
                    "config section `{section}` in {} must be an object",
                    path.display()
                )));
            }
        }
        for (key, value) in flatten(&doc) {
            self.set(&key, value, Source::File)?;
        }
        Ok(())
    }

    /// Applies `--section.key value` / `--section.key=value` pairs.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let Some(flag) = arg.strip_prefix("--") else {
                return Err(CliError::Usage(format!("unexpected argument `{arg}`")));
            };
            let (key, raw) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| CliError::Usage(format!("flag `--{flag}` needs a value")))?;
                    (flag.to_string(), v.clone())
                }
            };
            if !key.contains('.') {
                return Err(CliError::Usage(format!("unknown flag `--{key}`")));
            }
            let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
            self.set(&key, value, Source::Flag)?;
        }
        Ok(())
    }

    /// Fills window sizes from the manifest and `N` from the data where the
    /// user gave no explicit value; explicit values must agree with the data.
    pub fn apply_manifest(&mut self, manifest: &DatasetManifest, variates: usize) -> Result<(), CliError> {
        let w = manifest.window;
        for (key, v) in [("model.L", w.lookback), ("model.T", w.horizon), ("data.s", w.stride)] {
            if self.source(key) == Source::Default {
                self.set(key, v.into(), Source::Data)?;
            }
        }
        match self.source("model.N") {
            Source::Default | Source::Derived => self.set("model.N", variates.into(), Source::Data)?,
            _ => {
                let n = self.values["model.N"].0.as_u64();
                if n != Some(variates as u64) {
                    return Err(CliError::Core(braincast::Error::Data(format!(
                        "model.N is {} but the dataset has {variates} variates",
                        self.values["model.N"].0
                    ))));
                }
            }
        }
        Ok(())
    }

    /// Recomputes widths and the kernel from `D` and `L` unless set
    /// explicitly, then builds and validates the typed config.
    pub fn resolve(&mut self) -> Result<RunConfig, CliError> {
        let num = |r: &Self, k: &str| r.values[k].0.as_u64().unwrap_or(0) as usize;
        let (d, l) = (num(self, "model.D"), num(self, "model.L"));
        let mut kernel = DEFAULT_KERNEL.min(l.max(1));
        if kernel % 2 == 0 {
            kernel -= 1;
        }
        for (key, v) in [("model.ffn_hidden", 2 * d), ("model.tfr_hidden", d), ("model.kernel", kernel)] {
            if matches!(self.source(key), Source::Default | Source::Derived) {
                self.set(key, v.into(), Source::Derived)?;
            }
        }
        let cfg: RunConfig = serde_json::from_value(self.document())
            .map_err(|e| CliError::Usage(format!("invalid configuration value: {e}")))?;
        cfg.model.validate().map_err(CliError::Core)?;
        cfg.train.validate().map_err(CliError::Core)?;
        if cfg.data.s == 0 {
            return Err(CliError::Usage("data.s must be at least 1".into()));
        }
        Ok(cfg)
    }

    fn document(&self) -> Value {
        let mut root = Map::new();
        for (key, (v, _)) in &self.values {
            let (section, field) = key.split_once('.').expect("dotted key");
            root.entry(section)
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("section object")
                .insert(field.to_string(), v.clone());
        }
        Value::Object(root)
    }

    /// Resolved values plus a `provenance` object, as written to `config.json`.
    pub fn resolved_document(&self, cfg: &RunConfig) -> Value {
        let mut doc = serde_json::to_value(cfg).expect("config serializes");
        let prov: Map<String, Value> = self
            .values
            .iter()
            .map(|(k, (_, s))| (k.clone(), serde_json::to_value(s).expect("source serializes")))
            .collect();
        doc.as_object_mut().expect("object").insert("provenance".into(), Value::Object(prov));
        doc
    }
}
