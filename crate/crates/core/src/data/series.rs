use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RealMatrix;

/// One subject's multivariate series, variates along rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRecord {
    pub subject_id: String,
    /// `N × length`
    pub values: RealMatrix,
}

impl SeriesRecord {
    pub fn new(subject_id: impl Into<String>, values: RealMatrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::Data("series needs at least one variate".into()));
        }
        if let Some((row, col)) = values.first_non_finite() {
            return Err(Error::NonFinite {
                context: "series values".into(),
                row,
                col,
            });
        }
        Ok(Self {
            subject_id: subject_id.into(),
            values,
        })
    }

    pub fn variates(&self) -> usize {
        self.values.rows()
    }

    pub fn len(&self) -> usize {
        self.values.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.cols() == 0
    }
}

/// Reads a series CSV with header `t,v0,...,v{N-1}`, one row per time point.
/// The `t` column is ignored.
pub fn load_series_csv(path: impl AsRef<Path>, subject_id: impl Into<String>) -> Result<SeriesRecord> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    if &header[0] != "t" {
        return Err(parse_err(1, format!("first column must be `t`, found `{}`", &header[0])));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("v{i}") {
            return Err(parse_err(1, format!("expected column `v{i}`, found `{name}`")));
        }
    }
    let n = header.len() - 1;
    if n == 0 {
        return Err(parse_err(1, "no variate columns".into()));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", n + 1, rec.len()),
            ));
        }
        for (i, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(line, format!("column v{i}: `{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("column v{i}: non-finite value `{cell}`")));
            }
            columns[i].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    let values = RealMatrix::from_rows(&columns)?;
    SeriesRecord::new(subject_id, values)
}

/// Writes a series in the format read by [`load_series_csv`]. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_series_csv(path: impl AsRef<Path>, record: &SeriesRecord) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..record.variates()).map(|i| format!("v{i}")))
        .collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for t in 0..record.len() {
        write!(w, "{t}").map_err(io)?;
        for v in 0..record.variates() {
            write!(w, ",{}", record.values.get(v, t)).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}
