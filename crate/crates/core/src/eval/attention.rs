use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::ForwardTrace;
use crate::numerics::RealMatrix;

/// Attention maps averaged over a batch of forward passes.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionExport {
    /// Per SIAformer layer, the mean over samples and heads.
    pub sia_layers: Option<Vec<RealMatrix>>,
    /// Mean cross-attention score matrix.
    pub spa: Option<RealMatrix>,
    /// Column means of `spa`, normalized to sum to one.
    pub variate_scores: Option<Vec<f64>>,
    /// Why a part was left out.
    pub notices: Vec<String>,
}

/// Importance of each variate as a key: the column means of a score matrix,
/// normalized to a probability vector.
pub fn variate_scores(m: &RealMatrix) -> Vec<f64> {
    let sums = m.col_sums();
    let total = sums.sum();
    sums.as_slice().iter().map(|v| v / total).collect()
}

pub fn export_attention(traces: &[ForwardTrace]) -> Result<AttentionExport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no forward traces to export".into()))?;
    let count = traces.len() as f64;
    let mut notices = Vec::new();

    let sia_layers = if first.attention.is_empty() {
        notices.push("spatial attention is disabled; SIA maps omitted".to_string());
        None
    } else {
        let n = first.attention[0][0].rows();
        let mut layers = Vec::with_capacity(first.attention.len());
        for layer in 0..first.attention.len() {
            let mut acc = RealMatrix::zeros(n, n);
            let mut maps = 0usize;
            for t in traces {
                let heads = t.attention.get(layer).ok_or_else(|| {
                    Error::InvalidArgument("traces disagree on the number of SIA layers".into())
                })?;
                for a in heads {
                    if a.shape() != (n, n) {
                        return Err(Error::shape("export_attention", format!("{n}x{n}"), format!("{:?}", a.shape())));
                    }
                    acc.add_assign(a);
                    maps += 1;
                }
            }
            layers.push(acc.scale(1.0 / maps as f64));
        }
        Some(layers)
    };

    let (spa, scores) = if traces.iter().all(|t| t.spa_enabled) {
        let n = first.spa_scores.rows();
        let mut acc = RealMatrix::zeros(n, n);
        for t in traces {
            if t.spa_scores.shape() != (n, n) {
                return Err(Error::shape("export_attention", format!("{n}x{n}"), format!("{:?}", t.spa_scores.shape())));
            }
            acc.add_assign(&t.spa_scores);
        }
        let m = acc.scale(1.0 / count);
        let s = variate_scores(&m);
        (Some(m), Some(s))
    } else {
        notices.push("pattern alignment is disabled; SPA scores omitted".to_string());
        (None, None)
    };

    Ok(AttentionExport {
        sia_layers,
        spa,
        variate_scores: scores,
        notices,
    })
}

fn matrix_csv(m: &RealMatrix) -> String {
    let mut s = String::from("variate");
    for j in 0..m.cols() {
        let _ = write!(s, ",{j}");
    }
    s.push('\n');
    for i in 0..m.rows() {
        let _ = write!(s, "{i}");
        for v in m.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Writes `sia_layer{g}.csv`, `spa_scores.csv` and `variate_scores.csv`
/// (whichever are present) into `dir`, returning the paths written.
pub fn write_attention_csv(export: &AttentionExport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(())
    };
    if let Some(layers) = &export.sia_layers {
        for (g, m) in layers.iter().enumerate() {
            put(format!("sia_layer{g}.csv"), matrix_csv(m))?;
        }
    }
    if let Some(m) = &export.spa {
        put("spa_scores.csv".into(), matrix_csv(m))?;
    }
    if let Some(scores) = &export.variate_scores {
        let mut s = String::from("variate,score\n");
        for (i, v) in scores.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        put("variate_scores.csv".into(), s)?;
    }
    Ok(files)
}
