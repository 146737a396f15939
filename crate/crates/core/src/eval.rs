//! Error counts, significance tests and error-versus-iteration curves.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// P-values below this are reported as exactly zero.
pub const PVALUE_ZERO_BELOW: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub iteration: usize,
    pub train_loss: f64,
    pub test_errors: Option<usize>,
    pub seconds: f64,
}

/// Training curve: one row per logged iteration, iterations increasing.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricLog {
    rows: Vec<MetricRow>,
}

impl MetricLog {
    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&MetricRow> {
        self.rows.last()
    }

    /// Appends a row; rows whose iteration does not increase are ignored.
    pub fn push(&mut self, row: MetricRow) {
        if self.rows.last().map_or(true, |r| row.iteration > r.iteration) {
            self.rows.push(row);
        }
    }
}

pub fn misclassification_count(predictions: &[usize], truth: &[usize]) -> Result<usize> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    Ok(predictions.iter().zip(truth).filter(|(p, t)| p != t).count())
}

/// Standard normal upper tail `1 − Φ(z)`, computed without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Standard normal CDF `Φ(z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// One-sided test that method B (with `err_b` errors) has a lower error rate
/// than method A on the same `n_test` samples.
///
/// Each rate is a binomial proportion with variance `p̂(1 − p̂)/N`; the
/// statistic is `(p̂_a − p̂_b) / sqrt(var_a + var_b)` and the result is
/// `1 − Φ(z)`.
pub fn pvalue_two_proportion(err_a: u64, err_b: u64, n_test: u64) -> Result<f64> {
    if n_test == 0 {
        return Err(Error::InvalidArgument("test size must be positive".into()));
    }
    if err_a > n_test || err_b > n_test {
        return Err(Error::InvalidArgument(format!(
            "error counts ({err_a}, {err_b}) exceed the test size {n_test}"
        )));
    }
    let n = n_test as f64;
    let pa = err_a as f64 / n;
    let pb = err_b as f64 / n;
    let var = pa * (1.0 - pa) / n + pb * (1.0 - pb) / n;
    if var == 0.0 {
        return Err(Error::Degenerate(format!(
            "both error rates are {pa}, the test statistic has zero variance"
        )));
    }
    let z = (pa - pb) / var.sqrt();
    let p = normal_sf(z);
    Ok(if p < PVALUE_ZERO_BELOW { 0.0 } else { p })
}

/// `(err_base − err_new) / err_base`; negative when the new method is worse.
pub fn relative_improvement(err_base: u64, err_new: u64) -> Result<f64> {
    if err_base == 0 {
        return Err(Error::Degenerate("baseline error count is zero".into()));
    }
    Ok((err_base as f64 - err_new as f64) / err_base as f64)
}

pub const CURVE_HEADER: &str = "iteration,train_loss,test_errors,seconds";

/// Writes the log as CSV; `test_errors` is empty when no test set was used.
pub fn emit_curves(log: &MetricLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if log.is_empty() {
        return Err(Error::InvalidArgument("metric log is empty".into()));
    }
    let mut out = Vec::new();
    writeln!(out, "{CURVE_HEADER}").expect("in-memory write");
    for r in log.rows() {
        let errors = r.test_errors.map(|e| e.to_string()).unwrap_or_default();
        writeln!(out, "{},{:.16e},{},{:.16e}", r.iteration, r.train_loss, errors, r.seconds).expect("in-memory write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`emit_curves`].
pub fn read_curves(path: impl AsRef<Path>) -> Result<MetricLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |line: usize, message: &str| Error::MalformedLine {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CURVE_HEADER => {}
        _ => return Err(malformed(1, "missing curve header")),
    }
    let mut log = MetricLog::default();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(malformed(i + 1, "expected 4 columns"));
        }
        let bad = || malformed(i + 1, "bad number");
        log.rows.push(MetricRow {
            iteration: cells[0].parse().map_err(|_| bad())?,
            train_loss: cells[1].parse().map_err(|_| bad())?,
            test_errors: if cells[2].is_empty() {
                None
            } else {
                Some(cells[2].parse().map_err(|_| bad())?)
            },
            seconds: cells[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(log)
}
