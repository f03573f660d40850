//! Gnuplot data files built from a `rates.csv` table.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use nitsche::analysis::least_squares_slope;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub h: f64,
    pub err_l2: f64,
    pub err_h1: f64,
}

pub fn parse_rates(text: &str) -> Result<Vec<RateRow>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or("empty file")?.split(',').map(str::trim).collect();
    let col = |name: &str| header.iter().position(|c| *c == name).ok_or(format!("missing column `{name}`"));
    let (ih, il2, ih1) = (col("h")?, col("err_l2")?, col("err_h1")?);
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, String> {
            fields
                .get(i)
                .ok_or(format!("row {} is too short", n + 1))?
                .parse::<f64>()
                .map_err(|e| format!("row {}: {e}", n + 1))
        };
        rows.push(RateRow { h: get(ih)?, err_l2: get(il2)?, err_h1: get(ih1)? });
    }
    if rows.len() < 2 {
        return Err(format!("need at least 2 data rows, found {}", rows.len()));
    }
    Ok(rows)
}

fn dat(pairs: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::new();
    for (h, e) in pairs {
        writeln!(out, "{h:e} {e:e}").expect("writing to a String");
    }
    out
}

/// Order inferred from the rounded H¹ slope, at least 1.
pub fn infer_order(rows: &[RateRow]) -> usize {
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.err_h1)).collect();
    least_squares_slope(&pairs).map(|(s, _)| s.round().max(1.0) as usize).unwrap_or(1)
}

/// Gnuplot script with reference lines `c h^m` and `c h^(m+1)` passing
/// through the coarsest data point of each series.
pub fn script(rows: &[RateRow], order: usize) -> String {
    let coarse = rows.iter().max_by(|a, b| a.h.total_cmp(&b.h)).expect("non-empty rows");
    let (h0, m) = (coarse.h, order);
    let mut s = String::new();
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel \"h\"");
    let _ = writeln!(s, "set ylabel \"error\"");
    let _ = writeln!(s, "set key bottom right");
    let _ = writeln!(s, "ref_h1(h) = {:e} * (h / {h0:e})**{m}", coarse.err_h1);
    let _ = writeln!(s, "ref_l2(h) = {:e} * (h / {h0:e})**{}", coarse.err_l2, m + 1);
    let _ = writeln!(
        s,
        "plot \"h1.dat\" using 1:2 with linespoints title \"H1 error\", \
         ref_h1(x) with lines dashtype 2 title \"h^{m}\", \
         \"l2.dat\" using 1:2 with linespoints title \"L2 error\", \
         ref_l2(x) with lines dashtype 2 title \"h^{}\"",
        m + 1
    );
    s
}

/// Writes `l2.dat`, `h1.dat` and `rates.gp` next to `csv` (or into
/// `out_dir`) and returns the written paths.
pub fn plot(csv: &Path, order: Option<usize>, out_dir: Option<&Path>) -> Result<Vec<PathBuf>, PlotError> {
    let text = std::fs::read_to_string(csv).map_err(|source| PlotError::Read { path: csv.into(), source })?;
    let rows = parse_rates(&text).map_err(|message| PlotError::Format { path: csv.into(), message })?;
    let order = order.unwrap_or_else(|| infer_order(&rows));
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| csv.parent().unwrap_or(Path::new(".")).to_path_buf());
    let files = [
        ("l2.dat", dat(rows.iter().map(|r| (r.h, r.err_l2)))),
        ("h1.dat", dat(rows.iter().map(|r| (r.h, r.err_h1)))),
        ("rates.gp", script(&rows, order)),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|source| PlotError::Write { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
