//! Streaming ensemble moments and series comparison.

use crate::error::{Error, Result};
use crate::observables::TimeSeries;

/// Denominator floor for z-scores.
pub const Z_FLOOR: f64 = 1e-12;

/// Per-cell count, mean and sum of squared deviations (Welford), mergeable
/// with the pairwise update of Chan et al.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleAccumulator {
    times: Vec<f64>,
    names: Vec<String>,
    count: u64,
    mean: Vec<Vec<f64>>,
    m2: Vec<Vec<f64>>,
}

/// Mean and standard error of the mean per observable and time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub count: u64,
    /// Set when only one series was seen; the standard errors are then 0.
    pub single_sample: bool,
}

impl EnsembleAccumulator {
    pub fn new(times: Vec<f64>, names: Vec<String>) -> Self {
        let cells = vec![vec![0.0; times.len()]; names.len()];
        Self {
            times,
            names,
            count: 0,
            mean: cells.clone(),
            m2: cells,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    fn check_grid(&self, times: &[f64], names: &[String]) -> Result<()> {
        if names != self.names.as_slice() {
            return Err(Error::GridMismatch(format!(
                "observables {:?} vs {:?}",
                names, self.names
            )));
        }
        if times.len() != self.times.len() || times.iter().zip(&self.times).any(|(a, b)| a != b) {
            return Err(Error::GridMismatch(format!(
                "{} sample times vs {}",
                times.len(),
                self.times.len()
            )));
        }
        Ok(())
    }

    pub fn accumulate(&mut self, series: &TimeSeries) -> Result<()> {
        self.check_grid(&series.times, &series.names)?;
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), values) in self.mean.iter_mut().zip(&mut self.m2).zip(&series.values) {
            for ((mu, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(values) {
                let delta = x - *mu;
                *mu += delta / n;
                *s += delta * (x - *mu);
            }
        }
        Ok(())
    }

    /// Folds `other` into `self`. Deterministic for a fixed merge order.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        self.check_grid(&other.times, &other.names)?;
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for k in 0..self.names.len() {
            for i in 0..self.times.len() {
                let delta = other.mean[k][i] - self.mean[k][i];
                self.mean[k][i] += delta * nb / n;
                self.m2[k][i] += other.m2[k][i] + delta * delta * na * nb / n;
            }
        }
        self.count += other.count;
        Ok(())
    }

    /// Standard error = √(s²/N) with the unbiased sample variance s².
    pub fn finalize(&self) -> EnsembleSummary {
        let n = self.count as f64;
        let stderr = self
            .m2
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&s| {
                        if self.count > 1 {
                            (s.max(0.0) / (n - 1.0) / n).sqrt()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        EnsembleSummary {
            times: self.times.clone(),
            names: self.names.clone(),
            mean: self.mean.clone(),
            stderr,
            count: self.count,
            single_sample: self.count == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub abs_diff: Vec<f64>,
    pub z: Vec<f64>,
    pub max_abs_diff: f64,
    pub max_z: f64,
    /// Points with z > z_max and |a − b| > abs_tol.
    pub failing: Vec<usize>,
    pub passed: bool,
}

/// Compares `a` against `b ± b_stderr`. A point passes when its z-score is at
/// most `z_max` or its absolute difference is at most `abs_tol`; the
/// comparison passes when every point does.
pub fn compare_series(
    a: &[f64],
    b: &[f64],
    b_stderr: &[f64],
    abs_tol: f64,
    z_max: f64,
) -> Result<ComparisonReport> {
    if a.len() != b.len() || b.len() != b_stderr.len() {
        return Err(Error::GridMismatch(format!(
            "series lengths {}, {}, {}",
            a.len(),
            b.len(),
            b_stderr.len()
        )));
    }
    let abs_diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    let z: Vec<f64> = abs_diff
        .iter()
        .zip(b_stderr)
        .map(|(d, s)| d / s.max(Z_FLOOR))
        .collect();
    let failing: Vec<usize> = (0..a.len())
        .filter(|&i| !(z[i] <= z_max || abs_diff[i] <= abs_tol))
        .collect();
    Ok(ComparisonReport {
        max_abs_diff: abs_diff.iter().copied().fold(0.0, f64::max),
        max_z: z.iter().copied().fold(0.0, f64::max),
        passed: failing.is_empty(),
        failing,
        abs_diff,
        z,
    })
}
