use super::matrix::RealMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_KERNEL: usize = 25;

/// Splits every row into a moving-average trend and the seasonal residual.
///
/// The trend is a centered mean over `kernel` points; the row is padded by
/// replicating its first and last value `(kernel − 1) / 2` times on either
/// side, so the output keeps the input length. `seasonal = x − trend`.
pub fn moving_avg_decompose(x: &RealMatrix, kernel: usize) -> Result<(RealMatrix, RealMatrix)> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "moving-average kernel must be odd, got {kernel}"
        )));
    }
    if kernel > x.cols() {
        return Err(Error::InvalidArgument(format!(
            "moving-average kernel {kernel} exceeds row length {}",
            x.cols()
        )));
    }
    let half = (kernel - 1) / 2;
    let len = x.cols() as isize;
    let mut trend = RealMatrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        for c in 0..x.cols() {
            let lo = c as isize - half as isize;
            let sum: f64 = (lo..lo + kernel as isize)
                .map(|i| row[i.clamp(0, len - 1) as usize])
                .sum();
            trend.set(r, c, sum / kernel as f64);
        }
    }
    let seasonal = x.sub(&trend);
    Ok((trend, seasonal))
}
