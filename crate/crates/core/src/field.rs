//! Node-indexed field containers.
//!
//! All containers store their components contiguously, component-major:
//! component `c` occupies `data[c * nodes .. (c + 1) * nodes]`. That layout
//! lets the difference stencil run over one component at a time.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{LabError, Result};
use crate::grid::{l2_norm, max_abs, partial_slice, Grid};

/// Position of a symmetric pair `(i, j)` in the packed upper triangle.
#[inline]
pub fn sym_index(dim: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * (2 * dim + 1 - a) / 2 + (b - a)
}

#[inline]
pub fn sym_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn check_finite(what: &'static str, data: &[f64], nodes: usize) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(k) => Err(LabError::NonFinite { what, node: k % nodes }),
        None => Ok(()),
    }
}

/// One real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() {
            return Err(LabError::GridMismatch);
        }
        check_finite("scalar field", &values, grid.nodes())?;
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.nodes());
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.nodes()] }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples an analytic function of the chart coordinates.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        Self { grid, values: grid.sample(f) }
    }

    pub fn from_node_fn(grid: Grid, f: impl Fn(usize) -> f64) -> Self {
        Self { grid, values: (0..grid.nodes()).map(f).collect() }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("scalar field", &self.values, self.grid.nodes())
    }

    pub fn partial(&self, axis: usize) -> ScalarField {
        let mut out = vec![0.0; self.values.len()];
        partial_slice(&self.grid, &self.values, axis, &mut out);
        Self { grid: self.grid, values: out }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self { grid: self.grid, values: self.values.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn powi(&self, n: i32) -> ScalarField {
        self.map(|x| x.powi(n))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.grid, &self.values)
    }
}

macro_rules! scalar_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                self.zip_map(rhs, |a, b| a $op b)
            }
        }
        impl $trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                (&self).$method(rhs)
            }
        }
    };
}

scalar_binop!(Add, add, +);
scalar_binop!(Sub, sub, -);
scalar_binop!(Mul, mul, *);

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, c: f64) -> ScalarField {
        self.map(|x| c * x)
    }
}

impl Mul<f64> for ScalarField {
    type Output = ScalarField;
    fn mul(self, c: f64) -> ScalarField {
        (&self) * c
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|x| -x)
    }
}

/// Symmetric 2-tensor: `d(d+1)/2` packed components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    grid: Grid,
    data: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; sym_len(grid.dim()) * grid.nodes()] }
    }

    /// Builds from `f(i, j, node)`, evaluated for `i <= j` only.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let d = grid.dim();
        let n = grid.nodes();
        let mut out = Self::zeros(grid);
        for i in 0..d {
            for j in i..d {
                let c = sym_index(d, i, j);
                for (node, x) in out.data[c * n..(c + 1) * n].iter_mut().enumerate() {
                    *x = f(i, j, node);
                }
            }
        }
        out
    }

    /// Samples analytic component functions `f(i, j, x)`.
    pub fn from_coord_fn(grid: Grid, f: impl Fn(usize, usize, [f64; 3]) -> f64) -> Self {
        Self::from_fn(grid, |i, j, node| f(i, j, grid.coords(node)))
    }

    /// Per-node 3x3 matrices (only the leading `dim` block is used).
    pub fn from_matrices(grid: Grid, m: &[[[f64; 3]; 3]]) -> Self {
        Self::from_fn(grid, |i, j, node| 0.5 * (m[node][i][j] + m[node][j][i]))
    }

    pub fn identity(grid: Grid) -> Self {
        Self::from_fn(grid, |i, j, _| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    #[inline]
    pub fn comp(&self, i: usize, j: usize) -> &[f64] {
        let n = self.grid.nodes();
        let c = sym_index(self.grid.dim(), i, j);
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn comp_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let n = self.grid.nodes();
        let c = sym_index(self.grid.dim(), i, j);
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, node: usize) -> f64 {
        self.data[sym_index(self.grid.dim(), i, j) * self.grid.nodes() + node]
    }

    pub fn matrix_at(&self, node: usize) -> [[f64; 3]; 3] {
        let d = self.dim();
        let mut m = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = self.at(i, j, node);
            }
        }
        m
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("symmetric tensor field", &self.data, self.grid.nodes())
    }

    /// Symmetric tensor scaled by a scalar field, node by node.
    pub fn scale_by(&self, s: &ScalarField) -> SymTensorField {
        let n = self.grid.nodes();
        let mut out = self.clone();
        for (k, x) in out.data.iter_mut().enumerate() {
            *x *= s.values()[k % n];
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymTensorField {
        Self { grid: self.grid, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn zip_map(&self, other: &SymTensorField, f: impl Fn(f64, f64) -> f64) -> SymTensorField {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Full covariant 2-tensor with both components of each pair filled.
    pub fn to_full(&self) -> TensorField {
        TensorField::from_fn(self.grid, vec![Variance::Lower; 2], |idx, node| {
            self.at(idx[0], idx[1], node)
        })
    }

    /// Symmetric part of a rank-2 tensor together with `max |T - T^t| / 2`.
    pub fn symmetrize(t: &TensorField) -> (SymTensorField, f64) {
        assert_eq!(t.rank(), 2, "symmetrize expects a rank-2 tensor");
        let grid = *t.grid();
        let mut defect = 0.0_f64;
        let s = SymTensorField::from_fn(grid, |i, j, node| {
            let a = t.comp(&[i, j])[node];
            let b = t.comp(&[j, i])[node];
            defect = defect.max(0.5 * (a - b).abs());
            0.5 * (a + b)
        });
        (s, defect)
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.data)
    }

    /// L2 over all `d^2` entries (off-diagonal entries counted twice).
    pub fn l2(&self) -> f64 {
        let d = self.dim();
        let n = self.grid.nodes();
        let mut weighted = Vec::with_capacity(self.data.len());
        for i in 0..d {
            for j in i..d {
                let w = if i == j { 1.0 } else { 2.0_f64.sqrt() };
                let c = sym_index(d, i, j);
                weighted.extend(self.data[c * n..(c + 1) * n].iter().map(|x| w * x));
            }
        }
        l2_norm(&self.grid, &weighted)
    }
}

impl Add<&SymTensorField> for &SymTensorField {
    type Output = SymTensorField;
    fn add(self, rhs: &SymTensorField) -> SymTensorField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&SymTensorField> for &SymTensorField {
    type Output = SymTensorField;
    fn sub(self, rhs: &SymTensorField) -> SymTensorField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SymTensorField {
    type Output = SymTensorField;
    fn mul(self, c: f64) -> SymTensorField {
        self.map(|x| c * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variance {
    Lower,
    Upper,
}

/// General tensor field with full (unsymmetrized) component storage and
/// per-slot index variance. Used for covariant derivatives, vectors and
/// one-forms.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    grid: Grid,
    variance: Vec<Variance>,
    data: Vec<f64>,
}

/// Vector fields are rank-1 tensor fields with an upper index.
pub type VectorField = TensorField;
/// One-forms are rank-1 tensor fields with a lower index.
pub type OneFormField = TensorField;

impl TensorField {
    pub fn zeros(grid: Grid, variance: Vec<Variance>) -> Self {
        let ncomp = grid.dim().pow(variance.len() as u32);
        Self { grid, variance, data: vec![0.0; ncomp * grid.nodes()] }
    }

    pub fn from_fn(grid: Grid, variance: Vec<Variance>, mut f: impl FnMut(&[usize], usize) -> f64) -> Self {
        let mut out = Self::zeros(grid, variance);
        let n = grid.nodes();
        let rank = out.rank();
        let mut idx = vec![0usize; rank];
        for c in 0..out.ncomp() {
            out.decode(c, &mut idx);
            for (node, x) in out.data[c * n..(c + 1) * n].iter_mut().enumerate() {
                *x = f(&idx, node);
            }
        }
        out
    }

    /// Rank-1 field from per-axis components.
    pub fn from_components(grid: Grid, variance: Variance, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), grid.dim());
        let data = comps.into_iter().flatten().collect::<Vec<_>>();
        assert_eq!(data.len(), grid.dim() * grid.nodes());
        Self { grid, variance: vec![variance], data }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.grid.dim().pow(self.rank() as u32)
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let d = self.grid.dim();
        idx.iter().fold(0, |acc, &i| acc * d + i)
    }

    pub fn decode(&self, mut c: usize, idx: &mut [usize]) {
        let d = self.grid.dim();
        for s in (0..idx.len()).rev() {
            idx[s] = c % d;
            c /= d;
        }
    }

    #[inline]
    pub fn comp(&self, idx: &[usize]) -> &[f64] {
        let n = self.grid.nodes();
        let c = self.flat_index(idx);
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn comp_mut(&mut self, idx: &[usize]) -> &mut [f64] {
        let n = self.grid.nodes();
        let c = self.flat_index(idx);
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, idx: &[usize], node: usize) -> f64 {
        self.data[self.flat_index(idx) * self.grid.nodes() + node]
    }

    #[inline]
    pub fn comp_by_flat(&self, c: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("tensor field", &self.data, self.grid.nodes())
    }

    pub fn zip_map(&self, other: &TensorField, f: impl Fn(f64, f64) -> f64) -> TensorField {
        debug_assert_eq!(self.grid, other.grid);
        debug_assert_eq!(self.variance, other.variance);
        Self {
            grid: self.grid,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TensorField {
        Self {
            grid: self.grid,
            variance: self.variance.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Plain chart partial of every component; the new index comes first.
    /// The result carries a lower index in front and is not a tensor in
    /// general.
    pub fn partials(&self) -> TensorField {
        let d = self.grid.dim();
        let n = self.grid.nodes();
        let mut variance = vec![Variance::Lower];
        variance.extend_from_slice(&self.variance);
        let mut out = TensorField::zeros(self.grid, variance);
        let ncomp = self.ncomp();
        for k in 0..d {
            for c in 0..ncomp {
                let dst = (k * ncomp + c) * n;
                partial_slice(&self.grid, self.comp_by_flat(c), k, &mut out.data[dst..dst + n]);
            }
        }
        out
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn l2(&self) -> f64 {
        l2_norm(&self.grid, &self.data)
    }
}

impl From<&ScalarField> for TensorField {
    fn from(s: &ScalarField) -> Self {
        TensorField { grid: *s.grid(), variance: Vec::new(), data: s.values().to_vec() }
    }
}

impl From<&SymTensorField> for TensorField {
    fn from(s: &SymTensorField) -> Self {
        s.to_full()
    }
}

impl TensorField {
    /// Rank-0 tensor back into a scalar field.
    pub fn to_scalar(&self) -> ScalarField {
        assert_eq!(self.rank(), 0);
        ScalarField::from_vec_unchecked(self.grid, self.data.clone())
    }
}

impl Add<&TensorField> for &TensorField {
    type Output = TensorField;
    fn add(self, rhs: &TensorField) -> TensorField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub<&TensorField> for &TensorField {
    type Output = TensorField;
    fn sub(self, rhs: &TensorField) -> TensorField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &TensorField {
    type Output = TensorField;
    fn mul(self, c: f64) -> TensorField {
        self.map(|x| c * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn sym_index_is_a_packing() {
        for d in 2..=3 {
            let mut seen = vec![false; sym_len(d)];
            for i in 0..d {
                for j in i..d {
                    let c = sym_index(d, i, j);
                    assert_eq!(c, sym_index(d, j, i));
                    assert!(!seen[c]);
                    seen[c] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn scalar_rejects_non_finite() {
        let g = Grid::new(2, 8, TAU).unwrap();
        let mut v = vec![1.0; g.nodes()];
        v[5] = f64::NAN;
        assert_eq!(
            ScalarField::new(g, v),
            Err(LabError::NonFinite { what: "scalar field", node: 5 })
        );
    }

    #[test]
    fn symmetrize_reports_antisymmetric_part() {
        let g = Grid::new(2, 8, TAU).unwrap();
        let t = TensorField::from_fn(g, vec![Variance::Lower; 2], |idx, _| {
            (idx[0] * 2 + idx[1]) as f64
        });
        let (s, defect) = SymTensorField::symmetrize(&t);
        assert_eq!(s.at(0, 1, 3), 1.5);
        assert_eq!(defect, 0.5);
    }

    #[test]
    fn partials_put_derivative_index_first() {
        let g = Grid::new(2, 16, TAU).unwrap();
        let v = TensorField::from_fn(g, vec![Variance::Upper], |idx, node| {
            let x = g.coords(node);
            if idx[0] == 0 { x[0].sin() } else { x[1].cos() }
        });
        let dv = v.partials();
        assert_eq!(dv.variance(), &[Variance::Lower, Variance::Upper]);
        // d/dy of v^0 vanishes, d/dx of v^0 = cos x
        assert!(max_abs(dv.comp(&[1, 0])) < 1e-14);
        assert!((dv.at(&[0, 0], 0) - 1.0).abs() < 1e-3);
    }
}
