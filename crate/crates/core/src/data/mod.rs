//! Series ingestion, subject-level splitting, sliding windows, normalization
//! and the synthetic benchmark generator.

pub mod dataset;
pub mod series;
pub mod split;
pub mod synthetic;
pub mod window;

pub use dataset::{load_manifest_records, SplitName, WindowedDataset};
pub use series::{load_series_csv, write_series_csv, SeriesRecord};
pub use split::{
    split_subjects, DatasetManifest, FileEntry, Normalization, SubjectSplit, WindowConfig,
    DEFAULT_FRACTIONS,
};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use window::{
    denormalize_forecast, denormalize_window, make_windows, normalize_window, window_count,
    WindowSample, DEFAULT_STD_FLOOR,
};
