//! Serialized outputs: the JSON residual report, the time-series CSVs and
//! the refinement table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::checks::{CheckReport, Evaluation, Verdict};
use crate::config::CheckName;

/// Check name to its report entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ResidualReport {
    pub checks: BTreeMap<String, CheckReport>,
}

impl ResidualReport {
    pub fn from_evaluations(evals: &[Evaluation]) -> Self {
        Self { checks: evals.iter().map(|e| (e.check.to_string(), e.report.clone())).collect() }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Strict checks with a formula-discrepancy verdict; the run fails iff
    /// this is nonempty.
    pub fn strict_failures(&self, strict: &BTreeSet<CheckName>) -> Vec<String> {
        let strict: BTreeSet<String> = strict.iter().map(|c| c.to_string()).collect();
        self.checks
            .iter()
            .filter(|(name, r)| r.verdict == Verdict::FormulaDiscrepancy && strict.contains(*name))
            .map(|(name, _)| name.clone())
            .collect()
    }
}

pub const CSV_HEADER: &str = "t, I3_direct, I3_expr, I5_direct, I5_expr, I7_direct, I7_expr, F_min, F_max, S_min, S_max";

/// One row of the time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub t: f64,
    /// `(direct, expression)` for n = 3, 5, 7.
    pub integrals: [(f64, f64); 3],
    pub f_range: (f64, f64),
    pub s_range: (f64, f64),
}

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let [a, b, c] = r.integrals;
        let cells = [r.t, a.0, a.1, b.0, b.1, c.0, c.1, r.f_range.0, r.f_range.1, r.s_range.0, r.s_range.1];
        let line: Vec<String> = cells.iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&line.join(", "));
        out.push('\n');
    }
    out
}

/// Refinement study of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub n: Vec<usize>,
    pub residual: Vec<f64>,
    pub orders: Vec<Option<f64>>,
    /// Zero residual on every grid; orders are undefined.
    pub exact: bool,
    /// Unverified, with the finest order below the confirmed-order
    /// threshold on a nonzero residual.
    pub below_expected: bool,
    pub verdict: Verdict,
    pub isolated: Vec<String>,
    /// Refitted coefficients of the isolated terms; stated terms have
    /// coefficient 1 and candidates 0.
    pub coefficients: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ConvergenceTable {
    pub checks: BTreeMap<String, SweepEntry>,
}

impl ConvergenceTable {
    pub fn from_evaluations(evals: &[Evaluation]) -> Self {
        let checks = evals
            .iter()
            .map(|e| {
                let exact = e.exact();
                let orders = e.orders();
                let finest = orders.last().copied().flatten();
                let unverified = !exact && e.report.verdict != Verdict::Verified;
                let entry = SweepEntry {
                    n: e.levels.iter().map(|l| l.n).collect(),
                    residual: e.levels.iter().map(|l| l.residual).collect(),
                    orders,
                    exact,
                    below_expected: unverified && finest.is_some_and(|o| o < crate::checks::CONFIRMED_ORDER),
                    verdict: e.report.verdict,
                    isolated: e.report.isolated.clone(),
                    coefficients: e.coefficients.clone(),
                };
                (e.check.to_string(), entry)
            })
            .collect();
        Self { checks }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Long-format CSV `check, n, residual` for log-log plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check, n, residual\n");
        for (name, e) in &self.checks {
            for (n, r) in e.n.iter().zip(&e.residual) {
                let _ = writeln!(out, "{name}, {n}, {r:e}");
            }
        }
        out
    }

    /// Fixed-width text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, e) in &self.checks {
            let _ = write!(out, "{name:<12}");
            for (n, r) in e.n.iter().zip(&e.residual) {
                let _ = write!(out, "  n={n:<4} {r:10.3e}");
            }
            let orders: Vec<String> = e
                .orders
                .iter()
                .map(|o| o.map_or("-".to_string(), |o| format!("{o:.2}")))
                .collect();
            let note = if e.exact {
                "exact".to_string()
            } else if e.below_expected {
                "order below 3.5".to_string()
            } else {
                String::new()
            };
            let _ = writeln!(out, "  orders [{}]  {:?} {note}", orders.join(", "), e.verdict);
            for (label, c) in &e.coefficients {
                let _ = writeln!(out, "{:12}  refitted {label} = {c:.4}", "");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_exact() {
        let csv = series_csv(&[]);
        assert_eq!(csv, "t, I3_direct, I3_expr, I5_direct, I5_expr, I7_direct, I7_expr, F_min, F_max, S_min, S_max\n");
    }

    #[test]
    fn rows_have_eleven_cells() {
        let row = SeriesRow { t: 0.5, integrals: [(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)], f_range: (-1.0, 1.0), s_range: (0.0, 0.25) };
        let csv = series_csv(&[row]);
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line.split(", ").count(), 11);
        assert!(line.starts_with("5e-1, 1e0, 2e0"));
    }
}
