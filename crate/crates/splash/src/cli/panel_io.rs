//! Panel CSV format: first row holds unit labels; each subsequent row is one
//! time point (T x N on disk, transposed into the N x T panel on load).

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::simulate::Panel;

/// Parse a panel from CSV text. Empty or `NaN` cells are missing; they are
/// rejected with their cell coordinates unless `interpolate` is set, in which
/// case each unit's series is filled by linear interpolation in time (nearest
/// value at the ends). Cell coordinates in errors are 1-based CSV positions.
pub fn parse_panel_csv(text: &str, interpolate: bool) -> Result<Panel> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::CsvParse { row: 1, col: 1, msg: "empty file".into() })?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let n = labels.len();
    if n == 0 || labels.iter().any(|l| l.is_empty()) {
        return Err(Error::CsvParse { row: 1, col: 1, msg: "header must list unit labels".into() });
    }
    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    for (idx, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n {
            return Err(Error::CsvParse {
                row: idx + 1,
                col: cells.len(),
                msg: format!("expected {n} columns, found {}", cells.len()),
            });
        }
        let mut row = Vec::with_capacity(n);
        for (j, cell) in cells.iter().enumerate() {
            let c = cell.trim();
            if c.is_empty() || c.eq_ignore_ascii_case("nan") {
                row.push(None);
            } else {
                let v: f64 = c.parse().map_err(|_| Error::CsvParse {
                    row: idx + 1,
                    col: j + 1,
                    msg: format!("cannot parse '{c}' as a number"),
                })?;
                if !v.is_finite() {
                    row.push(None);
                } else {
                    row.push(Some(v));
                }
            }
        }
        rows.push(row);
    }
    let t = rows.len();
    if t == 0 {
        return Err(Error::CsvParse { row: 2, col: 1, msg: "no data rows".into() });
    }
    let missing: Vec<(usize, usize)> = rows
        .iter()
        .enumerate()
        .flat_map(|(s, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| v.is_none())
                .map(move |(j, _)| (s + 2, j + 1))
        })
        .collect();
    if !missing.is_empty() && !interpolate {
        return Err(Error::MissingValues(missing));
    }
    let mut values = Mat::zeros(n, t);
    for j in 0..n {
        let series: Vec<Option<f64>> = rows.iter().map(|r| r[j]).collect();
        let filled = fill_series(&series)
            .ok_or_else(|| Error::MissingValues(vec![(2, j + 1)]))?;
        for (s, v) in filled.into_iter().enumerate() {
            values.set(j, s, v);
        }
    }
    Panel::new(values, labels)
}

/// Linear interpolation over missing stretches; nearest observed value at the
/// ends. `None` when the whole series is missing.
fn fill_series(series: &[Option<f64>]) -> Option<Vec<f64>> {
    let observed: Vec<usize> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    if observed.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        if let Some(v) = series[i] {
            out.push(v);
            continue;
        }
        let next = observed.iter().find(|&&o| o > i);
        let prev = observed.iter().rev().find(|&&o| o < i);
        let v = match (prev, next) {
            (Some(&p), Some(&q)) => {
                let w = (i - p) as f64 / (q - p) as f64;
                series[p].unwrap() * (1.0 - w) + series[q].unwrap() * w
            }
            (Some(&p), None) => series[p].unwrap(),
            (None, Some(&q)) => series[q].unwrap(),
            (None, None) => unreachable!(),
        };
        out.push(v);
    }
    Some(out)
}

/// Serialize a panel in the on-disk orientation.
pub fn panel_to_csv(p: &Panel) -> String {
    let mut out = String::new();
    out.push_str(&p.unit_labels.join(","));
    out.push('\n');
    for s in 0..p.n_time() {
        let row: Vec<String> =
            (0..p.n_units()).map(|i| p.values.get(i, s).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
