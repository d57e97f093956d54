use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::WindowSample;
use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Repeats the last look-back column `horizon` times.
pub fn baseline_persistence(lookback: &RealMatrix, horizon: usize) -> Result<RealMatrix> {
    if lookback.cols() == 0 {
        return Err(Error::InvalidArgument("persistence needs at least one look-back point".into()));
    }
    let last = lookback.cols() - 1;
    Ok(RealMatrix::from_fn(lookback.rows(), horizon, |r, _| lookback.get(r, last)))
}

/// One linear map `L → T` shared by every variate, fitted by ridge least
/// squares over all (window, variate) rows. The bias is not penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeLinear {
    /// `L × T`
    pub weight: RealMatrix,
    /// `1 × T`
    pub bias: RealMatrix,
    /// The undamped normal equations were singular (or nearly so).
    pub rank_deficient: bool,
}

impl RidgeLinear {
    pub fn fit(windows: &[WindowSample], lambda: f64) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::Data("ridge baseline needs at least one training window".into()))?;
        if !(lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("ridge damping must be ≥ 0, got {lambda}")));
        }
        let (l, t) = (first.lookback.cols(), first.horizon.cols());
        let rows: Vec<(&[f64], &[f64])> = windows
            .iter()
            .flat_map(|w| (0..w.lookback.rows()).map(move |v| (w.lookback.row(v), w.horizon.row(v))))
            .collect();
        if rows.iter().any(|(x, y)| x.len() != l || y.len() != t) {
            return Err(Error::shape("RidgeLinear::fit", format!("L={l}, T={t}"), "mixed window shapes"));
        }
        let n = rows.len() as f64;
        let mut mx = vec![0.0; l];
        let mut my = vec![0.0; t];
        for (x, y) in &rows {
            mx.iter_mut().zip(*x).for_each(|(m, v)| *m += v / n);
            my.iter_mut().zip(*y).for_each(|(m, v)| *m += v / n);
        }
        let mut gram = DMatrix::<f64>::zeros(l, l);
        let mut rhs = DMatrix::<f64>::zeros(l, t);
        let mut xc = vec![0.0; l];
        for (x, y) in &rows {
            for (c, (v, m)) in xc.iter_mut().zip(x.iter().zip(&mx)) {
                *c = v - m;
            }
            for i in 0..l {
                let xi = xc[i];
                for j in i..l {
                    gram[(i, j)] += xi * xc[j];
                }
                for k in 0..t {
                    rhs[(i, k)] += xi * (y[k] - my[k]);
                }
            }
        }
        for i in 0..l {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }

        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let max_eig = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min_eig = eig.iter().fold(f64::INFINITY, |m, v| m.min(*v));
        let rank_deficient = min_eig <= 1e-12 * max_eig.max(f64::MIN_POSITIVE);
        if rank_deficient {
            log::warn!("ridge baseline: normal equations are rank deficient; relying on damping λ={lambda}");
        }

        for i in 0..l {
            gram[(i, i)] += lambda;
        }
        let w = gram
            .cholesky()
            .ok_or_else(|| Error::Data("ridge normal equations are singular; use a positive λ".into()))?
            .solve(&rhs);
        let weight = RealMatrix::from_fn(l, t, |i, k| w[(i, k)]);
        let bias = RealMatrix::from_fn(1, t, |_, k| my[k] - (0..l).map(|i| mx[i] * w[(i, k)]).sum::<f64>());
        Ok(Self {
            weight,
            bias,
            rank_deficient,
        })
    }

    /// Applies the shared map to each variate of `lookback` (`N × L → N × T`).
    pub fn predict(&self, lookback: &RealMatrix) -> Result<RealMatrix> {
        if lookback.cols() != self.weight.rows() {
            return Err(Error::shape("RidgeLinear::predict", self.weight.rows(), lookback.cols()));
        }
        let mut out = lookback.matmul(&self.weight);
        out.add_row_broadcast(&self.bias);
        Ok(out)
    }
}

/// Ridge fit with the default damping.
pub fn baseline_linear(train: &[WindowSample]) -> Result<RidgeLinear> {
    RidgeLinear::fit(train, RIDGE_LAMBDA)
}
