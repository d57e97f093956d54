use crate::error::{Error, Result};

/// Central-difference gradient of `f` at `p`:
/// `(f(p + h·eᵢ) − f(p − h·eᵢ)) / 2h` for every coordinate.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, p: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut work = p.to_vec();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = work[i];
        work[i] = orig + h;
        let plus = f(&work);
        work[i] = orig - h;
        let minus = f(&work);
        work[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite {
                context: format!("finite_diff_grad at coordinate {i}"),
                row: 0,
                col: i,
            });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|w| w[0] * w[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn constant_is_zero() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 3.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn linear_model_mse_matches_chain_rule() {
        // y = w·x + b, loss = mean((y − t)²)
        let xs = [0.5, -1.0, 2.0, 0.25];
        let ts = [1.0, 0.0, 3.5, -0.5];
        let loss = |p: &[f64]| {
            xs.iter()
                .zip(&ts)
                .map(|(x, t)| (p[0] * x + p[1] - t).powi(2))
                .sum::<f64>()
                / xs.len() as f64
        };
        let p = [0.7, -0.2];
        let n = xs.len() as f64;
        let gw: f64 = xs.iter().zip(&ts).map(|(x, t)| 2.0 * (p[0] * x + p[1] - t) * x).sum::<f64>() / n;
        let gb: f64 = xs.iter().zip(&ts).map(|(x, t)| 2.0 * (p[0] * x + p[1] - t)).sum::<f64>() / n;
        let g = finite_diff_grad(loss, &p, 1e-5).unwrap();
        assert!((g[0] - gw).abs() / gw.abs() < 1e-6);
        assert!((g[1] - gb).abs() / gb.abs() < 1e-6);
    }

    #[test]
    fn non_finite_reports_coordinate() {
        let err = finite_diff_grad(|w| if w[1] > 1.0 { f64::NAN } else { 0.0 }, &[0.0, 1.0], 1e-3)
            .unwrap_err();
        assert!(err.to_string().contains("coordinate 1"));
    }
}
