//! Pointwise Riemannian tensor calculus on a grid chart.
//!
//! Conventions used throughout the crate:
//!
//! * `R(X, Y) Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_[X,Y] Z` with components
//!   `R(∂_i, ∂_j) ∂_k = R^l_{ijk} ∂_l`, so
//!   `R^l_{ijk} = ∂_i Γ^l_{jk} - ∂_j Γ^l_{ik} + Γ^l_{ip} Γ^p_{jk} - Γ^l_{jp} Γ^p_{ik}`.
//! * The fully covariant tensor is `R_{ijkl} = g_{kp} R^p_{ijl}`. With this
//!   layout `R_{1212} = K det g` for a surface with Gauss curvature `K`,
//!   `Ric_{ij} = g^{kl} R_{kilj}`, and `R_{ijk}^p` means raising the last slot.
//! * Covariant derivatives put the new index first: `(∇T)_{k i j} = ∇_k T_{ij}`.
//!
//! The covariant Riemann tensor is assembled from first-kind Christoffel
//! symbols, `R_{ijkl} = ∂_i Γ_{k,jl} - ∂_j Γ_{k,il} + g^{pq}(Γ_{p,jk} Γ_{q,il} - Γ_{p,ik} Γ_{q,jl})`,
//! which keeps every algebraic symmetry exact on the grid up to round-off.
//! [`riemann_mixed`] evaluates the mixed formula directly and is kept as an
//! independent route.

use crate::error::{LabError, Result};
use crate::field::{sym_index, sym_len, ScalarField, SymTensorField, TensorField, Variance};
use crate::grid::{max_abs, partial_slice, Grid};
use crate::metric::MetricField;

/// Post-symmetrization residual above which [`riemann`] fails.
pub const RIEMANN_SYMMETRY_TOL: f64 = 1e-8;

/// Christoffel symbols `Γ^k_{ij}` with the symmetric pair stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelField {
    grid: Grid,
    data: Vec<f64>,
}

impl ChristoffelField {
    pub fn zeros(grid: Grid) -> Self {
        let d = grid.dim();
        Self { grid, data: vec![0.0; d * sym_len(d) * grid.nodes()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let d = grid.dim();
        for k in 0..d {
            for i in 0..d {
                for j in i..d {
                    let comp = out.comp_mut(k, i, j);
                    for (node, x) in comp.iter_mut().enumerate() {
                        *x = f(k, i, j, node);
                    }
                }
            }
        }
        out
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    fn offset(&self, k: usize, i: usize, j: usize) -> usize {
        let d = self.grid.dim();
        (k * sym_len(d) + sym_index(d, i, j)) * self.grid.nodes()
    }

    #[inline]
    pub fn comp(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let o = self.offset(k, i, j);
        &self.data[o..o + self.grid.nodes()]
    }

    #[inline]
    pub fn comp_mut(&mut self, k: usize, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(k, i, j);
        let n = self.grid.nodes();
        &mut self.data[o..o + n]
    }

    #[inline]
    pub fn at(&self, k: usize, i: usize, j: usize, node: usize) -> f64 {
        self.data[self.offset(k, i, j) + node]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Expands to a rank-3 tensor field with slots `(k, i, j)`.
    pub fn to_tensor(&self) -> TensorField {
        TensorField::from_fn(
            self.grid,
            vec![Variance::Upper, Variance::Lower, Variance::Lower],
            |idx, node| self.at(idx[0], idx[1], idx[2], node),
        )
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.data)
    }
}

/// Index of the antisymmetric pair `(a, b)`, `a < b`.
#[inline]
fn pair_index(dim: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b);
    // pairs ordered (0,1), (0,2), .., (1,2), ..
    a * (2 * dim - a - 1) / 2 + (b - a - 1)
}

#[inline]
fn pair_count(dim: usize) -> usize {
    dim * (dim - 1) / 2
}

/// Fully covariant Riemann tensor in symmetry-reduced storage: one value per
/// unordered pair of antisymmetric index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann4Field {
    grid: Grid,
    data: Vec<f64>,
    symmetry_residual: f64,
}

impl Riemann4Field {
    fn reduced_len(dim: usize) -> usize {
        let m = pair_count(dim);
        m * (m + 1) / 2
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            data: vec![0.0; Self::reduced_len(grid.dim()) * grid.nodes()],
            symmetry_residual: 0.0,
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Relative size of the non-symmetric part removed at construction.
    pub fn symmetry_residual(&self) -> f64 {
        self.symmetry_residual
    }

    /// Sign and storage slot for `R_{ijkl}`, or `None` when it vanishes
    /// identically.
    #[inline]
    fn locate(&self, i: usize, j: usize, k: usize, l: usize) -> Option<(f64, usize)> {
        if i == j || k == l {
            return None;
        }
        let d = self.grid.dim();
        let mut sign = 1.0;
        let a = if i < j { pair_index(d, i, j) } else { sign = -sign; pair_index(d, j, i) };
        let b = if k < l { pair_index(d, k, l) } else { sign = -sign; pair_index(d, l, k) };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Some((sign, sym_index(pair_count(d), lo, hi)))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize, node: usize) -> f64 {
        match self.locate(i, j, k, l) {
            Some((s, c)) => s * self.data[c * self.grid.nodes() + node],
            None => 0.0,
        }
    }

    /// Projects a full rank-4 covariant array onto the symmetric subspace.
    /// Returns the projection and `max |T - P(T)| / max |T|`.
    pub fn from_full(full: &TensorField) -> Self {
        assert_eq!(full.rank(), 4);
        let grid = *full.grid();
        let d = grid.dim();
        let n = grid.nodes();
        let mut out = Self::zeros(grid);
        let m = pair_count(d);
        let pairs: Vec<(usize, usize)> =
            (0..d).flat_map(|a| (a + 1..d).map(move |b| (a, b))).collect();
        for pa in 0..m {
            for pb in pa..m {
                let (i, j) = pairs[pa];
                let (k, l) = pairs[pb];
                let images: [([usize; 4], f64); 8] = [
                    ([i, j, k, l], 1.0),
                    ([j, i, k, l], -1.0),
                    ([i, j, l, k], -1.0),
                    ([j, i, l, k], 1.0),
                    ([k, l, i, j], 1.0),
                    ([l, k, i, j], -1.0),
                    ([k, l, j, i], -1.0),
                    ([l, k, j, i], 1.0),
                ];
                let c = sym_index(m, pa, pb);
                let dst = &mut out.data[c * n..(c + 1) * n];
                for (idx, s) in images.iter() {
                    let src = full.comp(idx);
                    for (x, y) in dst.iter_mut().zip(src) {
                        *x += 0.125 * s * y;
                    }
                }
            }
        }
        let scale = full.linf();
        if scale > 0.0 {
            let mut worst = 0.0_f64;
            let mut idx = [0usize; 4];
            for c in 0..full.ncomp() {
                full.decode(c, &mut idx);
                let src = full.comp_by_flat(c);
                for node in 0..n {
                    let sym = out.at(idx[0], idx[1], idx[2], idx[3], node);
                    worst = worst.max((src[node] - sym).abs());
                }
            }
            out.symmetry_residual = worst / scale;
        }
        out
    }

    pub fn to_full(&self) -> TensorField {
        TensorField::from_fn(self.grid, vec![Variance::Lower; 4], |idx, node| {
            self.at(idx[0], idx[1], idx[2], idx[3], node)
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn linf(&self) -> f64 {
        max_abs(&self.data)
    }
}

/// First-kind symbols `Γ_{p,ij} = ½(∂_i g_{jp} + ∂_j g_{ip} - ∂_p g_{ij})`,
/// stored in a [`ChristoffelField`] with the lowered index in the `k` slot.
pub fn christoffel_first_kind(g: &MetricField) -> ChristoffelField {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.nodes();
    // dg[a][sym(i,j)] = ∂_a g_ij
    let mut dg = vec![vec![0.0; n]; d * sym_len(d)];
    for a in 0..d {
        for i in 0..d {
            for j in i..d {
                partial_slice(&grid, g.tensor().comp(i, j), a, &mut dg[a * sym_len(d) + sym_index(d, i, j)]);
            }
        }
    }
    let dgc = |a: usize, i: usize, j: usize| &dg[a * sym_len(d) + sym_index(d, i, j)];
    let mut out = ChristoffelField::zeros(grid);
    for p in 0..d {
        for i in 0..d {
            for j in i..d {
                let (x, y, z) = (dgc(i, j, p), dgc(j, i, p), dgc(p, i, j));
                let dst = out.comp_mut(p, i, j);
                for node in 0..n {
                    dst[node] = 0.5 * (x[node] + y[node] - z[node]);
                }
            }
        }
    }
    out
}

fn raise_first_kind(g: &MetricField, first: &ChristoffelField) -> ChristoffelField {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let mut out = ChristoffelField::zeros(grid);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let dst = out.comp_mut(k, i, j);
                for p in 0..d {
                    let gi = g.inverse().comp(k, p);
                    let src = first.comp(p, i, j);
                    for node in 0..n {
                        dst[node] += gi[node] * src[node];
                    }
                }
            }
        }
    }
    out
}

fn lower_second_kind(g: &MetricField, gamma: &ChristoffelField) -> ChristoffelField {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let mut out = ChristoffelField::zeros(grid);
    for p in 0..d {
        for i in 0..d {
            for j in i..d {
                let dst = out.comp_mut(p, i, j);
                for k in 0..d {
                    let gm = g.tensor().comp(p, k);
                    let src = gamma.comp(k, i, j);
                    for node in 0..n {
                        dst[node] += gm[node] * src[node];
                    }
                }
            }
        }
    }
    out
}

/// `Γ^k_{ij} = ½ g^{kp}(∂_i g_{jp} + ∂_j g_{ip} - ∂_p g_{ij})`.
pub fn christoffel(g: &MetricField) -> ChristoffelField {
    raise_first_kind(g, &christoffel_first_kind(g))
}

/// Fully covariant Riemann tensor from a metric and its Christoffel symbols.
///
/// Fails when the post-symmetrization residual exceeds
/// [`RIEMANN_SYMMETRY_TOL`].
pub fn riemann(g: &MetricField, gamma: &ChristoffelField) -> Result<Riemann4Field> {
    let full = riemann_full(g, gamma);
    let r = Riemann4Field::from_full(&full);
    if r.symmetry_residual > RIEMANN_SYMMETRY_TOL {
        return Err(LabError::SymmetryResidual {
            residual: r.symmetry_residual,
            tolerance: RIEMANN_SYMMETRY_TOL,
        });
    }
    Ok(r)
}

/// Unsymmetrized `R_{ijkl}` from first-kind symbols (all `d^4` entries).
pub fn riemann_full(g: &MetricField, gamma: &ChristoffelField) -> TensorField {
    let grid = *g.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let first = lower_second_kind(g, gamma);
    // dfirst[a][k][sym(j,l)] = ∂_a Γ_{k,jl}
    let s = sym_len(d);
    let mut dfirst = vec![vec![0.0; n]; d * d * s];
    for a in 0..d {
        for k in 0..d {
            for j in 0..d {
                for l in j..d {
                    partial_slice(&grid, first.comp(k, j, l), a, &mut dfirst[(a * d + k) * s + sym_index(d, j, l)]);
                }
            }
        }
    }
    let df = |a: usize, k: usize, j: usize, l: usize| &dfirst[(a * d + k) * s + sym_index(d, j, l)];
    let mut out = TensorField::zeros(grid, vec![Variance::Lower; 4]);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut comp = vec![0.0; n];
                    let (a, b) = (df(i, k, j, l), df(j, k, i, l));
                    for node in 0..n {
                        comp[node] = a[node] - b[node];
                    }
                    for p in 0..d {
                        for q in 0..d {
                            let gi = g.inverse().comp(p, q);
                            let (x1, y1) = (first.comp(p, j, k), first.comp(q, i, l));
                            let (x2, y2) = (first.comp(p, i, k), first.comp(q, j, l));
                            for node in 0..n {
                                comp[node] += gi[node] * (x1[node] * y1[node] - x2[node] * y2[node]);
                            }
                        }
                    }
                    out.comp_mut(&[i, j, k, l]).copy_from_slice(&comp);
                }
            }
        }
    }
    out
}

/// `R^l_{ijk}` from the mixed formula, slots ordered `(l, i, j, k)`.
pub fn riemann_mixed(gamma: &ChristoffelField) -> TensorField {
    let grid = *gamma.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let variance = vec![Variance::Upper, Variance::Lower, Variance::Lower, Variance::Lower];
    let mut out = TensorField::zeros(grid, variance);
    let mut da = vec![0.0; n];
    let mut db = vec![0.0; n];
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    partial_slice(&grid, gamma.comp(l, j, k), i, &mut da);
                    partial_slice(&grid, gamma.comp(l, i, k), j, &mut db);
                    let mut comp: Vec<f64> = da.iter().zip(&db).map(|(a, b)| a - b).collect();
                    for p in 0..d {
                        let (a1, b1) = (gamma.comp(l, i, p), gamma.comp(p, j, k));
                        let (a2, b2) = (gamma.comp(l, j, p), gamma.comp(p, i, k));
                        for node in 0..n {
                            comp[node] += a1[node] * b1[node] - a2[node] * b2[node];
                        }
                    }
                    out.comp_mut(&[l, i, j, k]).copy_from_slice(&comp);
                }
            }
        }
    }
    out
}

/// `Ric_{ij} = g^{kl} R_{kilj}`.
pub fn ricci_from(g: &MetricField, riem: &Riemann4Field) -> SymTensorField {
    let d = g.dim();
    let n = g.grid().nodes();
    SymTensorField::from_fn(*g.grid(), |i, j, node| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += g.ginv(k, l, node) * riem.at(k, i, l, j, node);
            }
        }
        debug_assert!(node < n);
        s
    })
}

/// Christoffel symbols, Riemann, Ricci and scalar curvature of one metric.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub christoffel: ChristoffelField,
    pub riemann: Riemann4Field,
    pub ricci: SymTensorField,
    pub scalar: ScalarField,
}

impl CurvaturePack {
    pub fn new(g: &MetricField) -> Result<Self> {
        let christoffel = christoffel(g);
        let riemann = riemann(g, &christoffel)?;
        let ricci = ricci_from(g, &riemann);
        let scalar = trace(&ricci, g);
        Ok(Self { christoffel, riemann, ricci, scalar })
    }
}

pub fn ricci(pack: &CurvaturePack) -> &SymTensorField {
    &pack.ricci
}

pub fn scalar_curv(pack: &CurvaturePack) -> &ScalarField {
    &pack.scalar
}

/// Covariant derivative of a tensor of rank at most 3. The derivative index
/// is prepended and lower.
pub fn covariant_d(t: &TensorField, gamma: &ChristoffelField) -> Result<TensorField> {
    let rank = t.rank();
    if rank > 3 {
        return Err(LabError::RankUnsupported(rank));
    }
    let grid = *t.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let mut out = t.partials();
    let mut idx = vec![0usize; rank + 1];
    let mut src_idx = vec![0usize; rank];
    for c in 0..out.ncomp() {
        out.decode(c, &mut idx);
        let k = idx[0];
        let mut acc = vec![0.0; n];
        for s in 0..rank {
            src_idx.copy_from_slice(&idx[1..]);
            let slot = idx[1 + s];
            for p in 0..d {
                src_idx[s] = p;
                let src = t.comp(&src_idx);
                match t.variance()[s] {
                    Variance::Lower => {
                        let gm = gamma.comp(p, k, slot);
                        for node in 0..n {
                            acc[node] -= gm[node] * src[node];
                        }
                    }
                    Variance::Upper => {
                        let gm = gamma.comp(slot, k, p);
                        for node in 0..n {
                            acc[node] += gm[node] * src[node];
                        }
                    }
                }
            }
        }
        let dst = &mut out.data_mut()[c * n..(c + 1) * n];
        for (x, a) in dst.iter_mut().zip(&acc) {
            *x += a;
        }
    }
    Ok(out)
}

/// `df` as a one-form.
pub fn gradient(f: &ScalarField) -> TensorField {
    TensorField::from(f).partials()
}

/// Covariant Hessian `∇_i ∇_j f` (symmetric part).
pub fn hessian(f: &ScalarField, gamma: &ChristoffelField) -> SymTensorField {
    let grid = *f.grid();
    let df = gradient(f);
    let ddf = df.partials();
    SymTensorField::from_fn(grid, |i, j, node| {
        let mut s = 0.5 * (ddf.at(&[i, j], node) + ddf.at(&[j, i], node));
        for k in 0..grid.dim() {
            s -= gamma.at(k, i, j, node) * df.at(&[k], node);
        }
        s
    })
}

/// Contracts two lower slots `a < b` of `t` with `g^{..}`.
pub fn contract_lower(t: &TensorField, a: usize, b: usize, g: &MetricField) -> TensorField {
    assert!(a < b && b < t.rank());
    debug_assert_eq!(t.variance()[a], Variance::Lower);
    debug_assert_eq!(t.variance()[b], Variance::Lower);
    let grid = *t.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let variance: Vec<Variance> = t
        .variance()
        .iter()
        .enumerate()
        .filter(|(s, _)| *s != a && *s != b)
        .map(|(_, v)| *v)
        .collect();
    let mut out = TensorField::zeros(grid, variance);
    let mut oidx = vec![0usize; out.rank()];
    let mut full = vec![0usize; t.rank()];
    for c in 0..out.ncomp() {
        out.decode(c, &mut oidx);
        let mut acc = vec![0.0; n];
        for p in 0..d {
            for q in 0..d {
                let mut o = 0;
                for s in 0..t.rank() {
                    full[s] = if s == a {
                        p
                    } else if s == b {
                        q
                    } else {
                        o += 1;
                        oidx[o - 1]
                    };
                }
                let gi = g.inverse().comp(p, q);
                let src = t.comp(&full);
                for node in 0..n {
                    acc[node] += gi[node] * src[node];
                }
            }
        }
        out.data_mut()[c * n..(c + 1) * n].copy_from_slice(&acc);
    }
    out
}

/// Raises slot `s` with `g^{..}`.
pub fn raise(t: &TensorField, s: usize, g: &MetricField) -> TensorField {
    reindex(t, s, g, Variance::Upper)
}

/// Lowers slot `s` with `g_{..}`.
pub fn lower(t: &TensorField, s: usize, g: &MetricField) -> TensorField {
    reindex(t, s, g, Variance::Lower)
}

fn reindex(t: &TensorField, s: usize, g: &MetricField, to: Variance) -> TensorField {
    assert_ne!(t.variance()[s], to, "slot already has the requested variance");
    let grid = *t.grid();
    let d = grid.dim();
    let n = grid.nodes();
    let mut variance = t.variance().to_vec();
    variance[s] = to;
    let m = match to {
        Variance::Upper => g.inverse(),
        Variance::Lower => g.tensor(),
    };
    let mut out = TensorField::zeros(grid, variance);
    let mut idx = vec![0usize; t.rank()];
    for c in 0..out.ncomp() {
        out.decode(c, &mut idx);
        let i = idx[s];
        let mut acc = vec![0.0; n];
        for p in 0..d {
            idx[s] = p;
            let src = t.comp(&idx);
            let mc = m.comp(i, p);
            for node in 0..n {
                acc[node] += mc[node] * src[node];
            }
        }
        out.data_mut()[c * n..(c + 1) * n].copy_from_slice(&acc);
    }
    out
}

/// `Δf = g^{ij} ∇_i ∇_j f`.
pub fn laplacian_scalar(f: &ScalarField, g: &MetricField, gamma: &ChristoffelField) -> ScalarField {
    trace(&hessian(f, gamma), g)
}

/// `(Δv)_{ij} = g^{kl} ∇_k ∇_l v_{ij}` for a symmetric 2-tensor.
pub fn laplacian_sym2(v: &SymTensorField, g: &MetricField, gamma: &ChristoffelField) -> SymTensorField {
    let dv = covariant_d(&v.to_full(), gamma).expect("rank 2");
    let ddv = covariant_d(&dv, gamma).expect("rank 3");
    let lap = contract_lower(&ddv, 0, 1, g);
    SymTensorField::symmetrize(&lap).0
}

/// `tr_g v = g^{ij} v_{ij}`.
pub fn trace(v: &SymTensorField, g: &MetricField) -> ScalarField {
    let d = g.dim();
    ScalarField::from_node_fn(*g.grid(), |node| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += g.ginv(i, j, node) * v.at(i, j, node);
            }
        }
        s
    })
}

/// `(div v)_i = ∇^j v_{ij}` as a one-form.
pub fn div_sym2(v: &SymTensorField, g: &MetricField, gamma: &ChristoffelField) -> TensorField {
    let dv = covariant_d(&v.to_full(), gamma).expect("rank 2");
    // slots (k, i, j): contract k with j
    let grid = *g.grid();
    let d = grid.dim();
    let comps = (0..d)
        .map(|i| {
            (0..grid.nodes())
                .map(|node| {
                    let mut s = 0.0;
                    for j in 0..d {
                        for k in 0..d {
                            s += g.ginv(j, k, node) * dv.at(&[k, i, j], node);
                        }
                    }
                    s
                })
                .collect()
        })
        .collect();
    TensorField::from_components(grid, Variance::Lower, comps)
}

/// `⟨v, w⟩_g = g^{ik} g^{jl} v_{ij} w_{kl}`.
pub fn inner2(v: &SymTensorField, w: &SymTensorField, g: &MetricField) -> ScalarField {
    let d = g.dim();
    ScalarField::from_node_fn(*g.grid(), |node| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                let vij = v.at(i, j, node);
                for k in 0..d {
                    let gik = g.ginv(i, k, node);
                    for l in 0..d {
                        s += gik * g.ginv(j, l, node) * vij * w.at(k, l, node);
                    }
                }
            }
        }
        s
    })
}

/// `|∇f|^2 = g^{ij} ∂_i f ∂_j f`.
pub fn grad_norm2(f: &ScalarField, g: &MetricField) -> ScalarField {
    let df = gradient(f);
    one_form_norm2(&df, g)
}

/// `g^{ij} ω_i ω_j`.
pub fn one_form_norm2(w: &TensorField, g: &MetricField) -> ScalarField {
    inner1(w, w, g)
}

/// `g^{ij} α_i β_j` for two one-forms.
pub fn inner1(a: &TensorField, b: &TensorField, g: &MetricField) -> ScalarField {
    let d = g.dim();
    ScalarField::from_node_fn(*g.grid(), |node| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += g.ginv(i, j, node) * a.at(&[i], node) * b.at(&[j], node);
            }
        }
        s
    })
}
