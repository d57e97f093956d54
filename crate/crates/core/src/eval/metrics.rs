use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

pub const GLOBAL_AGGREGATION: &str = "global_flatten";

/// Forecast quality over a set of windows. All four numbers come from one
/// flattened vector of (prediction, target) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub mae: f64,
    /// `None` when either vector has zero variance.
    pub r: Option<f64>,
    /// `None` when the targets have zero variance.
    pub r2: Option<f64>,
    pub n_samples: usize,
    pub n_variates: usize,
    pub horizon: usize,
    pub aggregation: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn compute_metrics(preds: &[RealMatrix], targets: &[RealMatrix]) -> Result<MetricReport> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "need equal, non-zero numbers of predictions and targets ({} vs {})",
            preds.len(),
            targets.len()
        )));
    }
    let shape = targets[0].shape();
    for (p, t) in preds.iter().zip(targets) {
        if p.shape() != shape || t.shape() != shape {
            return Err(Error::shape(
                "compute_metrics",
                format!("{shape:?}"),
                format!("{:?} / {:?}", p.shape(), t.shape()),
            ));
        }
    }
    let yhat: Vec<f64> = preds.iter().flat_map(|p| p.as_slice().iter().copied()).collect();
    let y: Vec<f64> = targets.iter().flat_map(|t| t.as_slice().iter().copied()).collect();
    let n = y.len() as f64;

    let mse = yhat.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let mae = yhat.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mean_p = yhat.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ss_p: f64 = yhat.iter().map(|v| (v - mean_p).powi(2)).sum();
    let cov: f64 = yhat.iter().zip(&y).map(|(a, b)| (a - mean_p) * (b - mean_y)).sum();

    let mut notes = Vec::new();
    let r = if ss_tot > 0.0 && ss_p > 0.0 {
        Some((cov / (ss_tot * ss_p).sqrt()).clamp(-1.0, 1.0))
    } else {
        notes.push(format!(
            "R undefined: {} have zero variance",
            if ss_tot == 0.0 { "targets" } else { "predictions" }
        ));
        None
    };
    let r2 = if ss_tot > 0.0 {
        Some(1.0 - mse * n / ss_tot)
    } else {
        notes.push("R2 undefined: targets have zero variance".into());
        None
    };
    Ok(MetricReport {
        mse,
        mae,
        r,
        r2,
        n_samples: preds.len(),
        n_variates: shape.0,
        horizon: shape.1,
        aggregation: GLOBAL_AGGREGATION.into(),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> RealMatrix {
        RealMatrix::row_vector(v.to_vec())
    }

    #[test]
    fn perfect_and_reversed() {
        let m = compute_metrics(&[row(&[1.0, 2.0, 3.0])], &[row(&[1.0, 2.0, 3.0])]).unwrap();
        assert_eq!((m.mse, m.mae, m.r, m.r2), (0.0, 0.0, Some(1.0), Some(1.0)));
        let m = compute_metrics(&[row(&[1.0, 2.0, 3.0])], &[row(&[3.0, 2.0, 1.0])]).unwrap();
        assert!((m.r.unwrap() + 1.0).abs() < 1e-15);
        assert!((m.mse - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_targets_leave_r_undefined() {
        let m = compute_metrics(&[row(&[1.0, 2.0])], &[row(&[5.0, 5.0])]).unwrap();
        assert_eq!(m.r, None);
        assert_eq!(m.r2, None);
        assert_eq!(m.notes.len(), 2);
        let json = serde_json::to_value(&m).unwrap();
        assert!(json["r"].is_null());
    }

    #[test]
    fn rejects_mismatch() {
        assert!(compute_metrics(&[row(&[1.0])], &[row(&[1.0, 2.0])]).is_err());
        assert!(compute_metrics(&[], &[]).is_err());
    }
}
