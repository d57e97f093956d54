use super::series::SeriesRecord;
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

pub const DEFAULT_STD_FLOOR: f64 = 1e-5;

/// A look-back / horizon pair cut from one series.
///
/// `norm_mean` and `norm_std` map the stored values back to the raw scale:
/// `raw = stored · std + mean`. Freshly cut windows carry the identity
/// statistics (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    /// `N × L`
    pub lookback: RealMatrix,
    /// `N × T`
    pub horizon: RealMatrix,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    pub subject_id: String,
    pub offset: usize,
}

impl WindowSample {
    pub fn variates(&self) -> usize {
        self.lookback.rows()
    }
}

/// Number of full windows of `lookback + horizon` points at stride `stride`.
pub fn window_count(length: usize, lookback: usize, horizon: usize, stride: usize) -> usize {
    if stride == 0 || length < lookback + horizon {
        0
    } else {
        (length - lookback - horizon) / stride + 1
    }
}

/// Cuts full windows at offsets `0, s, 2s, …`. Series too short for a single
/// window yield an empty list.
pub fn make_windows(
    record: &SeriesRecord,
    lookback: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    if lookback == 0 || horizon == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "window geometry must be positive: L={lookback}, T={horizon}, s={stride}"
        )));
    }
    let len = record.len();
    if len < lookback + horizon {
        log::warn!(
            "series `{}` has {len} points, fewer than L+T={}; no windows",
            record.subject_id,
            lookback + horizon
        );
        return Ok(Vec::new());
    }
    let n = record.variates();
    let v = &record.values;
    Ok((0..=len - lookback - horizon)
        .step_by(stride)
        .map(|off| WindowSample {
            lookback: RealMatrix::from_fn(n, lookback, |r, c| v.get(r, off + c)),
            horizon: RealMatrix::from_fn(n, horizon, |r, c| v.get(r, off + lookback + c)),
            norm_mean: vec![0.0; n],
            norm_std: vec![1.0; n],
            subject_id: record.subject_id.clone(),
            offset: off,
        })
        .collect())
}

/// Standardizes each variate with the mean and (population) standard
/// deviation of its look-back points. The horizon uses the same statistics.
/// The standard deviation is clamped below by `std_floor`.
pub fn normalize_window(w: &WindowSample, std_floor: f64) -> WindowSample {
    let n = w.variates();
    let l = w.lookback.cols() as f64;
    let mut out = w.clone();
    for v in 0..n {
        let row = w.lookback.row(v);
        let mean = row.iter().sum::<f64>() / l;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / l;
        let std = var.sqrt().max(std_floor);
        for x in out.lookback.row_mut(v) {
            *x = (*x - mean) / std;
        }
        for x in out.horizon.row_mut(v) {
            *x = (*x - mean) / std;
        }
        out.norm_mean[v] = w.norm_mean[v] + w.norm_std[v] * mean;
        out.norm_std[v] = w.norm_std[v] * std;
    }
    out
}

/// Maps an `N × T` prediction in normalized space back to the raw scale.
pub fn denormalize_forecast(pred: &RealMatrix, w: &WindowSample) -> Result<RealMatrix> {
    if pred.rows() != w.variates() || pred.cols() != w.horizon.cols() {
        return Err(Error::shape(
            "denormalize_forecast",
            format!("{}x{}", w.variates(), w.horizon.cols()),
            format!("{}x{}", pred.rows(), pred.cols()),
        ));
    }
    Ok(RealMatrix::from_fn(pred.rows(), pred.cols(), |r, c| {
        pred.get(r, c) * w.norm_std[r] + w.norm_mean[r]
    }))
}

/// Inverse of [`normalize_window`] applied to both halves of a window.
pub fn denormalize_window(w: &WindowSample) -> WindowSample {
    let n = w.variates();
    let restore = |m: &RealMatrix| RealMatrix::from_fn(n, m.cols(), |r, c| m.get(r, c) * w.norm_std[r] + w.norm_mean[r]);
    WindowSample {
        lookback: restore(&w.lookback),
        horizon: restore(&w.horizon),
        norm_mean: vec![0.0; n],
        norm_std: vec![1.0; n],
        subject_id: w.subject_id.clone(),
        offset: w.offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize, len: usize) -> SeriesRecord {
        SeriesRecord::new(
            "r",
            RealMatrix::from_fn(n, len, |r, c| (c as f64 * 0.37 + r as f64).sin() * (r + 1) as f64 + c as f64 * 0.01),
        )
        .unwrap()
    }

    fn enumerate_offsets(len: usize, l: usize, t: usize, s: usize) -> Vec<usize> {
        let mut v = Vec::new();
        let mut off = 0;
        while off + l + t <= len {
            v.push(off);
            off += s;
        }
        v
    }

    #[test]
    fn rest_protocol_window_count() {
        assert_eq!(enumerate_offsets(1200, 140, 20, 20).len(), 53);
        let w = make_windows(&ramp(2, 1200), 140, 20, 20).unwrap();
        assert_eq!(w.len(), 53);
        assert_eq!(window_count(1200, 140, 20, 20), 53);
    }

    #[test]
    fn exact_fit_and_offsets() {
        let w = make_windows(&ramp(1, 160), 140, 20, 20).unwrap();
        assert_eq!(w.iter().map(|x| x.offset).collect::<Vec<_>>(), vec![0]);
        let w = make_windows(&ramp(1, 200), 140, 20, 20).unwrap();
        assert_eq!(w.iter().map(|x| x.offset).collect::<Vec<_>>(), vec![0, 20, 40]);
        assert_eq!(w[1].lookback.get(0, 0), ramp(1, 200).values.get(0, 20));
        assert_eq!(w[1].horizon.get(0, 0), ramp(1, 200).values.get(0, 160));
    }

    #[test]
    fn short_series_gives_no_windows() {
        assert!(make_windows(&ramp(1, 100), 140, 20, 20).unwrap().is_empty());
        assert!(make_windows(&ramp(1, 100), 0, 20, 20).is_err());
    }

    #[test]
    fn count_formula_matches_enumeration_exhaustively() {
        for len in 1..=500 {
            for &(l, t, s) in &[(1, 1, 1), (3, 2, 1), (10, 5, 3), (40, 20, 20), (64, 16, 7)] {
                assert_eq!(window_count(len, l, t, s), enumerate_offsets(len, l, t, s).len(), "len={len} l={l} t={t} s={s}");
            }
        }
    }

    #[test]
    fn constant_variate_normalizes_to_zero() {
        let rec = SeriesRecord::new("c", RealMatrix::filled(1, 30, 4.0)).unwrap();
        let w = &make_windows(&rec, 20, 5, 5).unwrap()[0];
        let n = normalize_window(w, DEFAULT_STD_FLOOR);
        assert!(n.lookback.as_slice().iter().chain(n.horizon.as_slice()).all(|v| *v == 0.0));
        assert_eq!(n.norm_std[0], DEFAULT_STD_FLOOR);
    }

    #[test]
    fn normalized_moments_and_inverse() {
        let w = &make_windows(&ramp(3, 300), 64, 16, 30).unwrap()[2];
        let n = normalize_window(w, DEFAULT_STD_FLOOR);
        for v in 0..3 {
            let row = n.lookback.row(v);
            let mean = row.iter().sum::<f64>() / 64.0;
            let std = (row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 64.0).sqrt();
            assert!(mean.abs() < 1e-9);
            assert!((std - 1.0).abs() < 1e-6);
        }
        let back = denormalize_window(&n);
        assert!(back.lookback.max_abs_diff(&w.lookback) < 1e-9 * w.lookback.max_abs());
        assert!(back.horizon.max_abs_diff(&w.horizon) < 1e-9 * w.horizon.max_abs());
        let pred = denormalize_forecast(&n.horizon, &n).unwrap();
        assert!(pred.max_abs_diff(&w.horizon) < 1e-9 * w.horizon.max_abs());
    }

    #[test]
    fn denormalize_formula() {
        let mut w = make_windows(&ramp(2, 30), 10, 4, 10).unwrap().remove(0);
        w.norm_mean = vec![2.0, 2.0];
        w.norm_std = vec![3.0, 3.0];
        let pred = RealMatrix::from_fn(2, 4, |r, c| (r * 4 + c) as f64 * 0.3 - 1.0);
        let out = denormalize_forecast(&pred, &w).unwrap();
        assert_eq!(out, pred.map(|v| 3.0 * v + 2.0));
        let zeros = denormalize_forecast(&RealMatrix::zeros(2, 4), &w).unwrap();
        assert!(zeros.as_slice().iter().all(|v| *v == 2.0));
        assert!(denormalize_forecast(&RealMatrix::zeros(2, 3), &w).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(seed in 0u64..1000, len in 30usize..80) {
            let rec = SeriesRecord::new(
                "p",
                RealMatrix::from_fn(2, len, |r, c| ((c as u64 * 2654435761 ^ seed) % 97) as f64 * 0.1 + r as f64),
            ).unwrap();
            let w = &make_windows(&rec, 20, 5, 5).unwrap()[0];
            let once = normalize_window(w, DEFAULT_STD_FLOOR);
            let twice = normalize_window(&once, DEFAULT_STD_FLOOR);
            prop_assert!(twice.lookback.max_abs_diff(&once.lookback) < 1e-9);
            prop_assert!(twice.horizon.max_abs_diff(&once.horizon) < 1e-9);
        }
    }
}
