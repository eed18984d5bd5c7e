//! Order estimates, time differences along trajectories, and least-squares
//! isolation of misfit terms.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::flow::{integrate_fixed, FlowConfig, FlowState};

/// Observed orders `log(e_k / e_{k+1}) / log(ratio)` between successive
/// refinement levels. `None` where either error is zero or not finite.
pub fn observed_orders(errors: &[f64], ratio: f64) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite() {
                Some((w[0] / w[1]).ln() / ratio.ln())
            } else {
                None
            }
        })
        .collect()
}

/// Order from the two finest levels, the one least polluted by
/// pre-asymptotic behaviour.
pub fn finest_order(errors: &[f64], ratio: f64) -> Option<f64> {
    observed_orders(errors, ratio).last().copied().flatten()
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(h: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(errors)
        .filter(|(_, e)| **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 { None } else { Some(sxy / sxx) }
}

/// Five-point centred first derivative from samples at `t* + kτ`,
/// `k = -2..=2`: `(-q₊₂ + 8q₊₁ - 8q₋₁ + q₋₂) / (12τ)`.
pub fn five_point(samples: [&[f64]; 5], tau: f64) -> Vec<f64> {
    let n = samples[0].len();
    (0..n)
        .map(|i| (samples[0][i] - samples[4][i] + 8.0 * (samples[3][i] - samples[1][i])) / (12.0 * tau))
        .collect()
}

/// Five states at `t0, t0 + τ, .., t0 + 4τ`; the centre one is where time
/// derivatives are evaluated.
#[derive(Debug, Clone)]
pub struct TrajectoryWindow {
    pub states: Vec<FlowState>,
    pub tau: f64,
}

impl TrajectoryWindow {
    pub fn new(start: &FlowState, config: &FlowConfig, tau: f64) -> Result<Self> {
        let states = integrate_fixed(start, config, tau, 4)?;
        Ok(Self { states, tau })
    }

    pub fn centre(&self) -> &FlowState {
        &self.states[2]
    }

    /// Time derivative at the centre of a flattened quantity.
    pub fn derivative(&self, mut q: impl FnMut(&FlowState) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        let vals = self.states.iter().map(&mut q).collect::<Result<Vec<_>>>()?;
        Ok(five_point([&vals[0], &vals[1], &vals[2], &vals[3], &vals[4]], self.tau))
    }
}

/// Least-squares coefficients `c` minimizing `‖target - Σ c_k column_k‖₂`.
/// Columns whose norm is below `tiny` times the largest column norm are
/// dropped and reported as `None`.
pub fn fit_terms(target: &[f64], columns: &[Vec<f64>], tiny: f64) -> Result<Vec<Option<f64>>> {
    let rows = target.len();
    if columns.iter().any(|c| c.len() != rows) {
        return Err(LabError::Config("fit columns differ in length".into()));
    }
    let norms: Vec<f64> = columns.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let top = norms.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..columns.len()).filter(|&k| top > 0.0 && norms[k] > tiny * top).collect();
    let mut out = vec![None; columns.len()];
    if keep.is_empty() {
        return Ok(out);
    }
    // scale columns to unit norm for conditioning
    let a = DMatrix::from_fn(rows, keep.len(), |r, c| columns[keep[c]][r] / norms[keep[c]]);
    let b = DVector::from_column_slice(target);
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| LabError::Config(format!("least-squares fit failed: {e}")))?;
    for (c, &k) in keep.iter().enumerate() {
        out[k] = Some(x[c] / norms[k]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_a_fourth_order_sequence() {
        let e = [1.0, 1.0 / 16.0, 1.0 / 256.0];
        for o in observed_orders(&e, 2.0) {
            assert!((o.unwrap() - 4.0).abs() < 1e-12);
        }
        assert_eq!(observed_orders(&[0.0, 0.0], 2.0), vec![None]);
        let h = [0.4, 0.2, 0.1];
        assert!((fitted_order(&h, &e).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn five_point_is_exact_for_quartics() {
        let tau = 0.1;
        let q = |t: f64| vec![t.powi(4) - 2.0 * t.powi(3) + t];
        let t0 = 0.3;
        let s: Vec<Vec<f64>> = (-2..=2).map(|k| q(t0 + k as f64 * tau)).collect();
        let d = five_point([&s[0], &s[1], &s[2], &s[3], &s[4]], tau);
        let want = 4.0 * t0.powi(3) - 6.0 * t0 * t0 + 1.0;
        assert!((d[0] - want).abs() < 1e-12);
    }

    #[test]
    fn fit_recovers_coefficients() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let c1: Vec<f64> = x.iter().map(|t| t.sin()).collect();
        let c2: Vec<f64> = x.iter().map(|t| t.cos()).collect();
        let c3 = vec![0.0; 50];
        let target: Vec<f64> = (0..50).map(|k| 2.0 * c1[k] - 6.0 * c2[k]).collect();
        let fit = fit_terms(&target, &[c1, c2, c3], 1e-10).unwrap();
        assert!((fit[0].unwrap() - 2.0).abs() < 1e-10);
        assert!((fit[1].unwrap() + 6.0).abs() < 1e-10);
        assert_eq!(fit[2], None);
    }
}
