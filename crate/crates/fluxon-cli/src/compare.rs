//! Joining exact and asymptotic tables and summarizing their differences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use fluxon::exact_ist::WaveSample;

use crate::error::{HarnessError, Result};

/// One sample of a solution table at condensate index `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Condensate index.
    pub n: usize,
    /// Wave sample (carries `x` and `t`).
    pub sample: WaveSample,
}

impl TableRow {
    fn key(&self) -> (usize, u64, u64) {
        (self.n, self.sample.x.to_bits(), self.sample.t.to_bits())
    }
}

/// Exact and asymptotic samples at a common node with their differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    /// Condensate index.
    pub n: usize,
    /// Exact sample.
    pub exact: WaveSample,
    /// Asymptotic sample.
    pub asymp: WaveSample,
    /// `|cos(u/2)_exact - cos(u/2)_asymp|`.
    pub err_cos: f64,
    /// `|sin(u/2)_exact - sin(u/2)_asymp|`.
    pub err_sin: f64,
    /// `|eps u_t exact - eps u_t asymp|`.
    pub err_ut: f64,
}

/// Error statistics for one condensate index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    /// Condensate index.
    pub n: usize,
    /// Number of compared nodes.
    pub count: usize,
    /// Sup error of `cos(u/2)`.
    pub sup_err_cos: f64,
    /// Mean error of `cos(u/2)`.
    pub mean_err_cos: f64,
    /// Sup error of `sin(u/2)`.
    pub sup_err_sin: f64,
    /// Sup error of `eps u_t`.
    pub sup_err_ut: f64,
}

/// Ratio of sup errors of `cos(u/2)` between consecutive indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatio {
    /// Smaller index.
    pub n_from: usize,
    /// Larger index.
    pub n_to: usize,
    /// `sup_err(n_to) / sup_err(n_from)`.
    pub ratio: f64,
}

/// Join two tables on `(x, t, N)`.  Every key must occur exactly once in
/// each table; the output follows the order of `exact`.
pub fn compare(exact: &[TableRow], asymp: &[TableRow]) -> Result<Vec<ComparisonRecord>> {
    let mut index = BTreeMap::new();
    for row in asymp {
        if index.insert(row.key(), row.sample).is_some() {
            return Err(HarnessError::Join(format!(
                "duplicate asymptotic key (x, t, N) = ({}, {}, {})",
                row.sample.x, row.sample.t, row.n
            )));
        }
    }
    if index.len() != exact.len() {
        return Err(HarnessError::Join(format!(
            "tables have {} exact and {} asymptotic rows",
            exact.len(),
            index.len()
        )));
    }
    exact
        .iter()
        .map(|row| {
            let a = index.get(&row.key()).ok_or_else(|| {
                HarnessError::Join(format!(
                    "no asymptotic row for (x, t, N) = ({}, {}, {})",
                    row.sample.x, row.sample.t, row.n
                ))
            })?;
            let e = row.sample;
            Ok(ComparisonRecord {
                n: row.n,
                exact: e,
                asymp: *a,
                err_cos: (e.cos_half - a.cos_half).abs(),
                err_sin: (e.sin_half - a.sin_half).abs(),
                err_ut: (e.eps_ut - a.eps_ut).abs(),
            })
        })
        .collect()
}

/// Per-index statistics in increasing order of `N`.
pub fn error_stats(records: &[ComparisonRecord]) -> Vec<ErrorStats> {
    let mut by_n: BTreeMap<usize, ErrorStats> = BTreeMap::new();
    for r in records {
        let s = by_n.entry(r.n).or_insert(ErrorStats {
            n: r.n,
            count: 0,
            sup_err_cos: 0.0,
            mean_err_cos: 0.0,
            sup_err_sin: 0.0,
            sup_err_ut: 0.0,
        });
        s.count += 1;
        s.sup_err_cos = s.sup_err_cos.max(r.err_cos);
        s.mean_err_cos += r.err_cos;
        s.sup_err_sin = s.sup_err_sin.max(r.err_sin);
        s.sup_err_ut = s.sup_err_ut.max(r.err_ut);
    }
    by_n.into_values()
        .map(|mut s| {
            s.mean_err_cos /= s.count as f64;
            s
        })
        .collect()
}

/// Ratios of consecutive sup errors.
pub fn error_ratios(stats: &[ErrorStats]) -> Vec<ErrorRatio> {
    stats
        .windows(2)
        .map(|w| ErrorRatio { n_from: w[0].n, n_to: w[1].n, ratio: w[1].sup_err_cos / w[0].sup_err_cos })
        .collect()
}
