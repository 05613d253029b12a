//! CSV time series: header `t,<obs>,<obs>_stderr,...`, one row per sample,
//! every number written with 17 significant digits in scientific notation.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::ConfigError;
use crate::ensemble::EnsembleResult;
use crate::error::Result;
use crate::integrator::DensitySeries;
use crate::observables::Observable;
use crate::stats::{compare_series, ComparisonReport};

/// Mean and uncertainty columns on a shared time grid. Deterministic series
/// carry zero uncertainty.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesTable {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl From<&EnsembleResult> for SeriesTable {
    fn from(r: &EnsembleResult) -> Self {
        Self {
            times: r.summary.times.clone(),
            names: r.summary.names.clone(),
            values: r.summary.mean.clone(),
            stderr: r.summary.stderr.clone(),
        }
    }
}

/// Observables evaluated along an RK4 run.
pub fn density_table(series: &DensitySeries, observables: &[Observable]) -> Result<SeriesTable> {
    let mut values = Vec::with_capacity(observables.len());
    for o in observables {
        values.push(
            series
                .states
                .iter()
                .map(|rho| o.eval_density(rho))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(SeriesTable {
        times: series.times.clone(),
        names: observables.iter().map(|o| o.name.clone()).collect(),
        stderr: vec![vec![0.0; series.times.len()]; observables.len()],
        values,
    })
}

fn number(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

pub fn emit_csv(table: &SeriesTable, mut w: impl Write) -> std::io::Result<()> {
    let mut out = String::from("t");
    for name in &table.names {
        write!(out, ",{name},{name}_stderr").unwrap();
    }
    out.push('\n');
    for (i, &t) in table.times.iter().enumerate() {
        number(&mut out, t);
        for (v, s) in table.values.iter().zip(&table.stderr) {
            out.push(',');
            number(&mut out, v[i]);
            out.push(',');
            number(&mut out, s[i]);
        }
        out.push('\n');
    }
    w.write_all(out.as_bytes())
}

pub fn write_csv_file(table: &SeriesTable, path: &Path) -> std::result::Result<(), ConfigError> {
    let io_err = |source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut w = std::io::BufWriter::new(file);
    emit_csv(table, &mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Reads a table written by [`emit_csv`]. Value columns without a matching
/// `_stderr` column get zero uncertainty.
pub fn read_csv(text: &str) -> std::result::Result<SeriesTable, ConfigError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| ConfigError::semantic("csv", "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(ConfigError::semantic("csv", "first column must be `t`"));
    }
    let mut names = Vec::new();
    let mut value_idx = Vec::new();
    let mut stderr_idx = Vec::new();
    for (i, c) in cols.iter().enumerate().skip(1) {
        if c.ends_with("_stderr") {
            continue;
        }
        names.push(c.to_string());
        value_idx.push(i);
        stderr_idx.push(cols.iter().position(|x| *x == format!("{c}_stderr")));
    }
    let mut table = SeriesTable {
        times: Vec::new(),
        values: vec![Vec::new(); names.len()],
        stderr: vec![Vec::new(); names.len()],
        names,
    };
    for (ln, line) in lines {
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| ConfigError::Parse {
                line: ln + 1,
                column: 1,
                message: e.to_string(),
            })?;
        if fields.len() != cols.len() {
            return Err(ConfigError::Parse {
                line: ln + 1,
                column: 1,
                message: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        table.times.push(fields[0]);
        for k in 0..table.names.len() {
            table.values[k].push(fields[value_idx[k]]);
            table.stderr[k].push(stderr_idx[k].map_or(0.0, |j| fields[j]));
        }
    }
    Ok(table)
}

/// Compares every observable present in both tables. The uncertainty of a
/// point is the quadrature sum of both tables' standard errors.
pub fn compare_tables(
    a: &SeriesTable,
    b: &SeriesTable,
    abs_tol: f64,
    z_max: f64,
) -> std::result::Result<Vec<(String, ComparisonReport)>, ConfigError> {
    let grid_ok = a.times.len() == b.times.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0));
    if !grid_ok {
        return Err(ConfigError::semantic("t", "time grids differ"));
    }
    let mut reports = Vec::new();
    for (ka, name) in a.names.iter().enumerate() {
        let Some(kb) = b.names.iter().position(|n| n == name) else {
            continue;
        };
        let sigma: Vec<f64> = a.stderr[ka]
            .iter()
            .zip(&b.stderr[kb])
            .map(|(x, y)| x.hypot(*y))
            .collect();
        let report = compare_series(&a.values[ka], &b.values[kb], &sigma, abs_tol, z_max)?;
        reports.push((name.clone(), report));
    }
    if reports.is_empty() {
        return Err(ConfigError::semantic("header", "no observable in common"));
    }
    Ok(reports)
}
