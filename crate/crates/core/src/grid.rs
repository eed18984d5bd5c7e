//! Periodic uniform grids, the fourth-order central difference, and
//! deterministic reductions.
//!
//! Nodes are numbered lexicographically with the last axis running fastest.
//! Every axis wraps, so a grid is a flat torus chart.

use rayon::prelude::*;

use crate::error::{LabError, Result};

/// Smallest number of nodes per axis accepted by [`Grid::new`].
pub const MIN_NODES_PER_AXIS: usize = 8;

/// Below this node count the stencil loops stay on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 3],
    length: [f64; 3],
}

impl Grid {
    /// Uniform grid with the same node count and side length on every axis.
    pub fn new(dim: usize, n_per_axis: usize, length_per_axis: f64) -> Result<Self> {
        Self::with_axes(dim, &[n_per_axis; 3][..dim.min(3)], &[length_per_axis; 3][..dim.min(3)])
    }

    pub fn with_axes(dim: usize, n: &[usize], length: &[f64]) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(LabError::UnsupportedDimension(dim));
        }
        if n.len() != dim || length.len() != dim {
            return Err(LabError::Config(format!(
                "expected {dim} axis sizes, got {} counts and {} lengths",
                n.len(),
                length.len()
            )));
        }
        let mut grid = Grid { dim, n: [1; 3], length: [1.0; 3] };
        for a in 0..dim {
            if n[a] < MIN_NODES_PER_AXIS {
                return Err(LabError::StencilUnderflow { n: n[a] });
            }
            if !(length[a].is_finite() && length[a] > 0.0) {
                return Err(LabError::InvalidLength(length[a]));
            }
            grid.n[a] = n[a];
            grid.length[a] = length[a];
        }
        Ok(grid)
    }

    /// The same chart with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut g = *self;
        for a in 0..self.dim {
            g.n[a] *= factor;
        }
        g
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    #[inline]
    pub fn length(&self, axis: usize) -> f64 {
        self.length[axis]
    }

    #[inline]
    pub fn spacing(&self, axis: usize) -> f64 {
        self.length[axis] / self.n[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.n[..self.dim].iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.length[..self.dim].iter().product()
    }

    #[inline]
    fn stride(&self, axis: usize) -> usize {
        self.n[axis + 1..self.dim].iter().product()
    }

    /// Integer coordinates of a node.
    pub fn multi_index(&self, node: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = node;
        for a in (0..self.dim).rev() {
            idx[a] = rem % self.n[a];
            rem /= self.n[a];
        }
        idx
    }

    pub fn node_at(&self, idx: [usize; 3]) -> usize {
        let mut node = 0;
        for a in 0..self.dim {
            node = node * self.n[a] + idx[a] % self.n[a];
        }
        node
    }

    /// Chart coordinates of a node; unused axes are zero.
    pub fn coords(&self, node: usize) -> [f64; 3] {
        let idx = self.multi_index(node);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * self.spacing(a);
        }
        x
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64 + Sync) -> Vec<f64> {
        let n = self.nodes();
        if n >= PAR_THRESHOLD {
            (0..n).into_par_iter().map(|k| f(self.coords(k))).collect()
        } else {
            (0..n).map(|k| f(self.coords(k))).collect()
        }
    }
}

/// Fourth-order central difference along `axis` with periodic wrap:
/// `(-f[+2] + 8 f[+1] - 8 f[-1] + f[-2]) / (12 h)`.
///
/// Non-periodic data (e.g. `f(x) = x`) is not detected; the wrap is applied
/// regardless.
pub fn partial_slice(grid: &Grid, src: &[f64], axis: usize, out: &mut [f64]) {
    debug_assert!(axis < grid.dim);
    debug_assert_eq!(src.len(), grid.nodes());
    let n = grid.n[axis];
    let stride = grid.stride(axis);
    let inv = 1.0 / (12.0 * grid.spacing(axis));
    let wrap: Vec<[usize; 4]> = (0..n)
        .map(|i| [(i + n - 2) % n, (i + n - 1) % n, (i + 1) % n, (i + 2) % n])
        .collect();
    let kernel = |node: usize| {
        let ia = (node / stride) % n;
        let base = node - ia * stride;
        let [m2, m1, p1, p2] = wrap[ia];
        let fm2 = src[base + m2 * stride];
        let fm1 = src[base + m1 * stride];
        let fp1 = src[base + p1 * stride];
        let fp2 = src[base + p2 * stride];
        ((fm2 - fp2) + 8.0 * (fp1 - fm1)) * inv
    };
    if src.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(k, o)| *o = kernel(k));
    } else {
        out.iter_mut().enumerate().for_each(|(k, o)| *o = kernel(k));
    }
}

pub fn partial_vec(grid: &Grid, src: &[f64], axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    partial_slice(grid, src, axis, &mut out);
    out
}

/// Pairwise (tree) summation in index order. The split points depend only on
/// the length, so the result is reproducible bit for bit.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        let mut s = 0.0;
        for &x in xs {
            s += x;
        }
        return s;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Maximum absolute value; zero for an empty slice.
pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Grid L2 norm `sqrt(sum x^2 * cell volume)` of flattened component data.
pub fn l2_norm(grid: &Grid, xs: &[f64]) -> f64 {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    (pairwise_sum(&sq) * grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn make_grid_examples() {
        let g = Grid::new(2, 32, TAU).unwrap();
        assert_eq!(g.nodes(), 32 * 32);
        assert_eq!(g.spacing(0), TAU / 32.0);
        assert_eq!(g.spacing(1), TAU / 32.0);

        let g3 = Grid::new(3, 16, TAU).unwrap();
        assert_eq!(g3.nodes(), 16 * 16 * 16);

        assert_eq!(Grid::new(2, 4, TAU), Err(LabError::StencilUnderflow { n: 4 }));
        assert_eq!(Grid::new(4, 16, TAU), Err(LabError::UnsupportedDimension(4)));
        assert_eq!(Grid::new(1, 16, TAU), Err(LabError::UnsupportedDimension(1)));
        assert!(matches!(Grid::new(2, 16, -1.0), Err(LabError::InvalidLength(_))));
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::with_axes(3, &[8, 9, 10], &[1.0, 2.0, 3.0]).unwrap();
        for node in 0..g.nodes() {
            assert_eq!(g.node_at(g.multi_index(node)), node);
        }
        assert_eq!(g.multi_index(1), [0, 0, 1]);
        assert_eq!(g.coords(10), [0.0, 2.0 / 9.0, 0.0]);
    }

    #[test]
    fn derivative_of_sine_at_origin() {
        for &n in &[16usize, 32, 64] {
            let g = Grid::new(2, n, TAU).unwrap();
            let f = g.sample(|x| x[0].sin());
            let d = partial_vec(&g, &f, 0);
            let h = g.spacing(0);
            // leading truncation term of the stencil is h^4/30 f^(5)
            assert!((d[0] - 1.0).abs() <= h.powi(4) / 30.0 * 1.01);
            let dy = partial_vec(&g, &f, 1);
            assert!(max_abs(&dy) < 1e-14);
        }
    }

    #[test]
    fn constant_is_annihilated_exactly() {
        let g = Grid::new(3, 8, 1.3).unwrap();
        let f = vec![2.5; g.nodes()];
        for a in 0..3 {
            assert!(partial_vec(&g, &f, a).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
