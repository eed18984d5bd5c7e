//! Riemannian metrics on a grid and the volume integral.

use nalgebra::Matrix3;

use crate::error::{LabError, Result};
use crate::field::{ScalarField, SymTensorField};
use crate::grid::{pairwise_sum, Grid};

/// Default lower bound on the smallest metric eigenvalue.
pub const DEFAULT_SPD_FLOOR: f64 = 1e-10;

/// Componentwise tolerance on `g g^-1 - I`, relative to `|g| |g^-1|`.
const INVERSE_TOL: f64 = 1e-13;

pub type Mat3 = [[f64; 3]; 3];

pub fn det(m: &Mat3, d: usize) -> f64 {
    match d {
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// Inverse via the adjugate. Caller guarantees `det != 0`.
pub fn inverse(m: &Mat3, d: usize) -> Mat3 {
    let det = det(m, d);
    let mut inv = [[0.0; 3]; 3];
    match d {
        2 => {
            inv[0][0] = m[1][1] / det;
            inv[1][1] = m[0][0] / det;
            inv[0][1] = -m[0][1] / det;
            inv[1][0] = -m[1][0] / det;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    inv[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
                }
            }
        }
    }
    inv
}

/// Smallest eigenvalue of a symmetric 2x2 or 3x3 matrix.
pub fn min_eigenvalue(m: &Mat3, d: usize) -> f64 {
    match d {
        2 => {
            let tr = m[0][0] + m[1][1];
            let diff = m[0][0] - m[1][1];
            0.5 * (tr - (diff * diff + 4.0 * m[0][1] * m[0][1]).sqrt())
        }
        _ => {
            let a = Matrix3::from_fn(|i, j| m[i][j]);
            a.symmetric_eigenvalues().min()
        }
    }
}

/// Symmetric positive definite metric with cached inverse and `sqrt(det g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricField {
    g: SymTensorField,
    inv: SymTensorField,
    sqrt_det: ScalarField,
}

impl MetricField {
    /// Validates and caches with the default eigenvalue floor.
    pub fn new(g: SymTensorField) -> Result<Self> {
        Self::with_floor(g, DEFAULT_SPD_FLOOR)
    }

    pub fn with_floor(g: SymTensorField, spd_floor: f64) -> Result<Self> {
        g.validate()?;
        let grid = *g.grid();
        let d = grid.dim();
        let n = grid.nodes();
        let mut inv = SymTensorField::zeros(grid);
        let mut sqrt_det = vec![0.0; n];
        for node in 0..n {
            let m = g.matrix_at(node);
            let lmin = min_eigenvalue(&m, d);
            if !(lmin > spd_floor) {
                return Err(LabError::NotPositiveDefinite { node, min_eigenvalue: lmin });
            }
            let mi = inverse(&m, d);
            let mut gnorm = 0.0_f64;
            let mut inorm = 0.0_f64;
            for i in 0..d {
                for j in 0..d {
                    gnorm = gnorm.max(m[i][j].abs());
                    inorm = inorm.max(mi[i][j].abs());
                }
            }
            let tol = INVERSE_TOL * (d as f64 * gnorm * inorm).max(1.0);
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += m[i][k] * mi[k][j];
                    }
                    let defect = (s - if i == j { 1.0 } else { 0.0 }).abs();
                    if defect > tol {
                        return Err(LabError::InverseDefect { node, defect });
                    }
                }
            }
            for i in 0..d {
                for j in i..d {
                    inv.comp_mut(i, j)[node] = 0.5 * (mi[i][j] + mi[j][i]);
                }
            }
            sqrt_det[node] = det(&m, d).sqrt();
        }
        Ok(Self { g, inv, sqrt_det: ScalarField::from_vec_unchecked(grid, sqrt_det) })
    }

    pub fn flat(grid: Grid) -> Self {
        Self::new(SymTensorField::identity(grid)).expect("identity metric is valid")
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        self.g.grid()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    #[inline]
    pub fn tensor(&self) -> &SymTensorField {
        &self.g
    }

    #[inline]
    pub fn inverse(&self) -> &SymTensorField {
        &self.inv
    }

    #[inline]
    pub fn sqrt_det(&self) -> &ScalarField {
        &self.sqrt_det
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize, node: usize) -> f64 {
        self.g.at(i, j, node)
    }

    #[inline]
    pub fn ginv(&self, i: usize, j: usize, node: usize) -> f64 {
        self.inv.at(i, j, node)
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        (0..self.grid().nodes())
            .map(|node| min_eigenvalue(&self.g.matrix_at(node), d))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest row-sum norm of `g^-1` over all nodes.
    pub fn inverse_inf_norm(&self) -> f64 {
        let d = self.dim();
        let mut best = 0.0_f64;
        for node in 0..self.grid().nodes() {
            for i in 0..d {
                let row: f64 = (0..d).map(|j| self.ginv(i, j, node).abs()).sum();
                best = best.max(row);
            }
        }
        best
    }
}

/// `sum_nodes s * sqrt(det g) * cell volume`, summed pairwise in node order.
pub fn integrate(s: &ScalarField, g: &MetricField) -> Result<f64> {
    if s.grid() != g.grid() {
        return Err(LabError::GridMismatch);
    }
    s.validate()?;
    let w: Vec<f64> = s.values().iter().zip(g.sqrt_det().values()).map(|(a, b)| a * b).collect();
    Ok(pairwise_sum(&w) * g.grid().cell_volume())
}
