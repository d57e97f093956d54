use std::collections::HashMap;

use super::series::{load_series_csv, SeriesRecord};
use super::split::{DatasetManifest, SubjectSplit, WindowConfig};
use super::window::{make_windows, normalize_window, WindowSample};
use crate::error::{Error, Result};

/// Normalized windows for each split.
#[derive(Clone, Debug)]
pub struct WindowedDataset {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub variates: usize,
    pub window: WindowConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split `{s}` (train|val|test)"))),
        }
    }
}

impl WindowedDataset {
    /// Cuts and normalizes windows for every subject in `split`. Windows keep
    /// the subject order of the split lists, then offset order.
    pub fn build(
        records: &[SeriesRecord],
        split: &SubjectSplit,
        window: WindowConfig,
        std_floor: f64,
    ) -> Result<Self> {
        split.check_disjoint()?;
        let variates = records
            .first()
            .ok_or_else(|| Error::Data("no series records".into()))?
            .variates();
        if let Some(r) = records.iter().find(|r| r.variates() != variates) {
            return Err(Error::Data(format!(
                "subject `{}` has {} variates, expected {variates}",
                r.subject_id,
                r.variates()
            )));
        }
        let by_id: HashMap<&str, &SeriesRecord> =
            records.iter().map(|r| (r.subject_id.as_str(), r)).collect();
        let cut = |ids: &[String]| -> Result<Vec<WindowSample>> {
            let mut out = Vec::new();
            for id in ids {
                let rec = by_id
                    .get(id.as_str())
                    .ok_or_else(|| Error::Data(format!("no series for subject `{id}`")))?;
                for w in make_windows(rec, window.lookback, window.horizon, window.stride)? {
                    out.push(normalize_window(&w, std_floor));
                }
            }
            Ok(out)
        };
        Ok(Self {
            train: cut(&split.train)?,
            val: cut(&split.val)?,
            test: cut(&split.test)?,
            variates,
            window,
        })
    }

    pub fn split(&self, which: SplitName) -> &[WindowSample] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

/// Loads every series listed in the manifest.
pub fn load_manifest_records(manifest: &DatasetManifest) -> Result<Vec<SeriesRecord>> {
    manifest
        .files
        .iter()
        .map(|f| load_series_csv(&f.path, f.subject_id.clone()))
        .collect()
}
