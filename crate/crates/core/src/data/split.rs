use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::series::SeriesRecord;
use crate::error::{Error, Result};
use crate::numerics::SeedRng;

/// Subject-level train/val/test assignment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SubjectSplit {
    /// Fails if any subject is listed in more than one split.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id) {
                return Err(Error::Data(format!("subject `{id}` appears in more than one split")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    #[serde(rename = "L")]
    pub lookback: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "s")]
    pub stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            lookback: 140,
            horizon: 20,
            stride: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    LookbackZscore,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub subject_id: String,
}

/// On-disk description of a dataset. Relative file paths resolve against the
/// directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub files: Vec<FileEntry>,
    pub split: SubjectSplit,
    pub window: WindowConfig,
    pub seed: u64,
    #[serde(default)]
    pub normalization: Normalization,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for f in &mut manifest.files {
            if f.path.is_relative() {
                f.path = base.join(&f.path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Checks split disjointness, that every split subject has a file, and
    /// that every file exists.
    pub fn validate(&self) -> Result<()> {
        self.split.check_disjoint()?;
        let ids: HashSet<_> = self.files.iter().map(|f| &f.subject_id).collect();
        for id in self.split.train.iter().chain(&self.split.val).chain(&self.split.test) {
            if !ids.contains(id) {
                return Err(Error::Data(format!("split lists `{id}` but no file is registered for it")));
            }
        }
        for f in &self.files {
            if !f.path.exists() {
                return Err(Error::Data(format!("missing series file {}", f.path.display())));
            }
        }
        Ok(())
    }
}

/// Default split fractions (train, val, test).
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Shuffles subjects and partitions them.
///
/// Validation and test sizes are `floor(n · fraction)`, raised to one when the
/// fraction is positive; every remaining subject goes to training.
pub fn split_subjects(
    records: &[SeriesRecord],
    fractions: (f64, f64, f64),
    rng: &SeedRng,
) -> Result<SubjectSplit> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be in [0,1] and sum to 1, got ({ft}, {fv}, {fs})"
        )));
    }
    let n = records.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 subjects, got {n}")));
    }
    let mut ids: Vec<String> = records.iter().map(|r| r.subject_id.clone()).collect();
    let unique: HashSet<_> = ids.iter().collect();
    if unique.len() != n {
        return Err(Error::Data("duplicate subject ids".into()));
    }
    ids.shuffle(&mut rng.stream("split_subjects"));

    let count = |f: f64| {
        if f > 0.0 {
            ((n as f64 * f).floor() as usize).max(1)
        } else {
            0
        }
    };
    let n_val = count(fv);
    let n_test = count(fs);
    if n_val + n_test >= n {
        return Err(Error::InvalidArgument(format!(
            "{n} subjects leave none for training with fractions ({ft}, {fv}, {fs})"
        )));
    }
    let test = ids.split_off(n - n_test);
    let val = ids.split_off(ids.len() - n_val);
    let split = SubjectSplit { train: ids, val, test };
    split.check_disjoint()?;
    Ok(split)
}
