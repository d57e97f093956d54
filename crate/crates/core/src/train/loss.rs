use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// `(1/N)·Σ_n ‖pred(n,:) − target(n,:)‖²`: squared error summed over the
/// horizon and averaged over variates.
pub fn mse_loss(pred: &RealMatrix, target: &RealMatrix) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse_loss",
            format!("{:?}", target.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    let sq: f64 = pred
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sq / pred.rows() as f64)
}

/// Mean of [`mse_loss`] over paired samples.
pub fn batch_mse_loss(preds: &[RealMatrix], targets: &[RealMatrix]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidArgument(format!(
            "need equal, non-zero numbers of predictions and targets ({} vs {})",
            preds.len(),
            targets.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        total += mse_loss(p, t)?;
    }
    Ok(total / preds.len() as f64)
}

/// `∂ mse_loss / ∂ pred`, scaled by `weight`.
pub(crate) fn mse_loss_grad(pred: &RealMatrix, target: &RealMatrix, weight: f64) -> RealMatrix {
    let s = 2.0 * weight / pred.rows() as f64;
    pred.zip_map(target, |p, t| s * (p - t))
}
