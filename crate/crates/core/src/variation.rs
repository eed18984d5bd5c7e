//! First variations of the geometric quantities under a metric direction
//! `v = ∂g/∂t`, and a central-difference oracle that re-derives each of them
//! from perturbed metrics.
//!
//! Every analytic variation is written with covariant derivatives of `v`;
//! none of them reuses the perturbed-metric path, so the oracle is
//! independent of the formulas it checks.

use crate::error::{LabError, Result};
use crate::field::{ScalarField, SymTensorField, TensorField, Variance};
use crate::grid::max_abs;
use crate::metric::MetricField;
use crate::tensor_calc::{
    christoffel, covariant_d, div_sym2, gradient, hessian, inner1, inner2, laplacian_scalar,
    laplacian_sym2, riemann, trace, ChristoffelField, CurvaturePack, Riemann4Field,
};

/// Default oracle step sizes, relative to [`VariationPair::scale`].
pub const DEFAULT_EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// A metric, a symmetric direction, and optionally a scalar field with its
/// rate of change.
#[derive(Debug, Clone)]
pub struct VariationPair {
    g: MetricField,
    v: SymTensorField,
    phi: Option<(ScalarField, ScalarField)>,
}

impl VariationPair {
    pub fn new(g: MetricField, v: SymTensorField) -> Result<Self> {
        if g.grid() != v.grid() {
            return Err(LabError::GridMismatch);
        }
        v.validate()?;
        Ok(Self { g, v, phi: None })
    }

    /// Attaches `Φ` and `∂Φ/∂t`, needed by the Hessian and Laplacian variations.
    pub fn with_scalar(mut self, phi: ScalarField, phi_rate: ScalarField) -> Result<Self> {
        if phi.grid() != self.g.grid() || phi_rate.grid() != self.g.grid() {
            return Err(LabError::GridMismatch);
        }
        phi.validate()?;
        phi_rate.validate()?;
        self.phi = Some((phi, phi_rate));
        Ok(self)
    }

    pub fn metric(&self) -> &MetricField {
        &self.g
    }

    pub fn direction(&self) -> &SymTensorField {
        &self.v
    }

    pub fn scalar(&self) -> Option<(&ScalarField, &ScalarField)> {
        self.phi.as_ref().map(|(p, r)| (p, r))
    }

    fn require_scalar(&self) -> Result<(&ScalarField, &ScalarField)> {
        self.scalar()
            .ok_or_else(|| LabError::Config("this variation needs a scalar field and its rate".into()))
    }

    /// `‖g‖∞ / ‖v‖∞`; infinite for `v = 0`.
    pub fn scale(&self) -> f64 {
        let vn = self.v.linf();
        if vn == 0.0 { f64::INFINITY } else { self.g.tensor().linf() / vn }
    }

    /// Largest step the oracle may take by default.
    pub fn eps_max(&self) -> f64 {
        DEFAULT_EPS[0] * self.scale()
    }

    /// `g + eps v` as a validated metric.
    pub fn perturbed(&self, eps: f64) -> Result<MetricField> {
        let gp = self.g.tensor().zip_map(&self.v, |a, b| a + eps * b);
        MetricField::new(gp).map_err(|e| match e {
            LabError::NotPositiveDefinite { node, .. } | LabError::InverseDefect { node, .. } => {
                LabError::EpsilonTooLarge { eps, node }
            }
            other => other,
        })
    }
}

/// `∇v` with slots `(a, i, j) = ∇_a v_ij`.
fn nabla_v(pair: &VariationPair, gamma: &ChristoffelField) -> TensorField {
    covariant_d(&pair.v.to_full(), gamma).expect("rank 2")
}

fn christoffel_variation(g: &MetricField, dv: &TensorField) -> ChristoffelField {
    let d = g.dim();
    ChristoffelField::from_fn(*g.grid(), |k, i, j, node| {
        let mut s = 0.0;
        for p in 0..d {
            let b = dv.at(&[i, j, p], node) + dv.at(&[j, i, p], node) - dv.at(&[p, i, j], node);
            s += g.ginv(k, p, node) * b;
        }
        0.5 * s
    })
}

/// `½ g^{kp}(∇_i v_jp + ∇_j v_ip - ∇_p v_ij)`.
pub fn d_christoffel(pair: &VariationPair) -> ChristoffelField {
    let gamma = christoffel(&pair.g);
    christoffel_variation(&pair.g, &nabla_v(pair, &gamma))
}

/// Named addends of the Riemann variation, all antisymmetric in both pairs.
pub fn d_riemann_terms(pair: &VariationPair) -> Result<Vec<(&'static str, TensorField)>> {
    let g = &pair.g;
    let grid = *g.grid();
    let d = g.dim();
    let gamma = christoffel(g);
    let riem = riemann(g, &gamma)?;
    let dv = nabla_v(pair, &gamma);
    let ddv = covariant_d(&dv, &gamma)?;
    let lower4 = vec![Variance::Lower; 4];
    let second = TensorField::from_fn(grid, lower4.clone(), |x, node| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        0.5 * (ddv.at(&[j, k, i, l], node) + ddv.at(&[i, l, j, k], node)
            - ddv.at(&[i, k, j, l], node)
            - ddv.at(&[j, l, i, k], node))
    });
    let curvature = TensorField::from_fn(grid, lower4, |x, node| {
        let (i, j, k, l) = (x[0], x[1], x[2], x[3]);
        let mut s = 0.0;
        for p in 0..d {
            for q in 0..d {
                let gpq = g.ginv(p, q, node);
                s += gpq
                    * (riem.at(i, j, k, q, node) * pair.v.at(p, l, node)
                        - riem.at(i, j, l, q, node) * pair.v.at(p, k, node));
            }
        }
        0.5 * s
    });
    Ok(vec![("second_derivatives", second), ("curvature_contraction", curvature)])
}

/// The Riemann variation before projection onto the curvature symmetries.
pub fn d_riemann_full(pair: &VariationPair) -> Result<TensorField> {
    Ok(sum_terms(d_riemann_terms(pair)?))
}

/// Variation of `R_ijkl`, projected onto the curvature symmetries.
pub fn d_riemann(pair: &VariationPair) -> Result<Riemann4Field> {
    Ok(Riemann4Field::from_full(&d_riemann_full(pair)?))
}

fn sum_terms(terms: Vec<(&'static str, TensorField)>) -> TensorField {
    let mut it = terms.into_iter();
    let (_, mut acc) = it.next().expect("at least one term");
    for (_, t) in it {
        acc = &acc + &t;
    }
    acc
}

/// Named addends of the Ricci variation, in chart components `(i, k)`.
/// The sum is symmetric only up to discretization error.
pub fn d_ricci_terms(pair: &VariationPair) -> Result<Vec<(&'static str, TensorField)>> {
    let g = &pair.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let dv = nabla_v(pair, gamma);
    let ddv = covariant_d(&dv, gamma)?;
    let div_v = div_sym2(&pair.v, g, gamma);
    let d_div = covariant_d(&div_v, gamma)?;
    let hess_tr = hessian(&trace(&pair.v, g), gamma);
    let lap_v = laplacian_sym2(&pair.v, g, gamma);
    let lower2 = vec![Variance::Lower; 2];

    let second = TensorField::from_fn(grid, lower2.clone(), |x, node| {
        let (i, k) = (x[0], x[1]);
        let mut rough = 0.0;
        for p in 0..d {
            for a in 0..d {
                rough += g.ginv(p, a, node) * ddv.at(&[a, k, i, p], node);
            }
        }
        0.5 * (rough + d_div.at(&[i, k], node) - hess_tr.at(i, k, node) - lap_v.at(i, k, node))
    });
    let ricci_v = TensorField::from_fn(grid, lower2.clone(), |x, node| {
        let (i, k) = (x[0], x[1]);
        let mut s = 0.0;
        for p in 0..d {
            for a in 0..d {
                s += g.ginv(p, a, node) * pack.ricci.at(i, a, node) * pair.v.at(p, k, node);
            }
        }
        0.5 * s
    });
    let riemann_v = TensorField::from_fn(grid, lower2, |x, node| {
        let (i, k) = (x[0], x[1]);
        let mut s = 0.0;
        for p in 0..d {
            for a in 0..d {
                let gpa = g.ginv(p, a, node);
                for q in 0..d {
                    for b in 0..d {
                        s += gpa * g.ginv(q, b, node) * pack.riemann.at(i, a, k, b, node) * pair.v.at(p, q, node);
                    }
                }
            }
        }
        -0.5 * s
    });
    Ok(vec![("second_derivatives", second), ("ricci_contraction", ricci_v), ("riemann_contraction", riemann_v)])
}

/// The Ricci variation in full `(i, k)` components.
pub fn d_ricci_full(pair: &VariationPair) -> Result<TensorField> {
    Ok(sum_terms(d_ricci_terms(pair)?))
}

/// Symmetric part of [`d_ricci_full`].
pub fn d_ricci(pair: &VariationPair) -> Result<SymTensorField> {
    Ok(SymTensorField::symmetrize(&d_ricci_full(pair)?).0)
}

/// `div div v - Δ(tr v) - ⟨v, Ric⟩`.
pub fn d_scalar(pair: &VariationPair) -> Result<ScalarField> {
    let terms = d_scalar_terms(pair)?;
    Ok(terms.into_iter().map(|(_, t)| t).reduce(|a, b| a + b).expect("terms"))
}

pub fn d_scalar_terms(pair: &VariationPair) -> Result<Vec<(&'static str, ScalarField)>> {
    let g = &pair.g;
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let d_div = covariant_d(&div_sym2(&pair.v, g, gamma), gamma)?;
    let div_div = ScalarField::from_node_fn(*g.grid(), |node| {
        let mut s = 0.0;
        for i in 0..d {
            for a in 0..d {
                s += g.ginv(i, a, node) * d_div.at(&[a, i], node);
            }
        }
        s
    });
    let lap_tr = laplacian_scalar(&trace(&pair.v, g), g, gamma);
    let v_ric = inner2(&pair.v, &pack.ricci, g);
    Ok(vec![("double_divergence", div_div), ("trace_laplacian", -&lap_tr), ("ricci_contraction", -&v_ric)])
}

/// Density factor `½ tr_g v` of the volume-form variation.
pub fn d_volume(pair: &VariationPair) -> ScalarField {
    trace(&pair.v, &pair.g) * 0.5
}

/// `∇_i ∇_j ψ - (∂Γ)^k_ij ∂_k Φ` with `ψ = ∂Φ/∂t`.
pub fn d_hessian(pair: &VariationPair) -> Result<SymTensorField> {
    let (phi, rate) = pair.require_scalar()?;
    let g = &pair.g;
    let gamma = christoffel(g);
    let dgamma = christoffel_variation(g, &nabla_v(pair, &gamma));
    let hess = hessian(rate, &gamma);
    let dphi = gradient(phi);
    let d = g.dim();
    Ok(SymTensorField::from_fn(*g.grid(), |i, j, node| {
        let mut s = hess.at(i, j, node);
        for k in 0..d {
            s -= dgamma.at(k, i, j, node) * dphi.at(&[k], node);
        }
        s
    }))
}

/// Addends of the Laplacian variation. The first two are the fixed-`Φ`
/// variation; the last one is the contribution of `∂Φ/∂t`.
pub fn d_laplacian_terms(pair: &VariationPair) -> Result<Vec<(&'static str, ScalarField)>> {
    let (phi, rate) = pair.require_scalar()?;
    let g = &pair.g;
    let gamma = christoffel(g);
    let hess = hessian(phi, &gamma);
    let div_v = div_sym2(&pair.v, g, &gamma);
    let dtr = gradient(&trace(&pair.v, g));
    let w = &div_v - &(&dtr * 0.5);
    let dphi = gradient(phi);
    Ok(vec![
        ("hessian_contraction", -&inner2(&pair.v, &hess, g)),
        ("divergence_coupling", -&inner1(&w, &dphi, g)),
        ("scalar_rate", laplacian_scalar(rate, g, &gamma)),
    ])
}

pub fn d_laplacian(pair: &VariationPair) -> Result<ScalarField> {
    let terms = d_laplacian_terms(pair)?;
    Ok(terms.into_iter().map(|(_, t)| t).reduce(|a, b| a + b).expect("terms"))
}

/// Quantity re-derived by the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuantityTag {
    Christoffel,
    Riemann,
    Ricci,
    Scalar,
    Volume,
    Hessian,
    Laplacian,
}

impl QuantityTag {
    pub const ALL: [QuantityTag; 7] = [
        QuantityTag::Christoffel,
        QuantityTag::Riemann,
        QuantityTag::Ricci,
        QuantityTag::Scalar,
        QuantityTag::Volume,
        QuantityTag::Hessian,
        QuantityTag::Laplacian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantityTag::Christoffel => "christoffel",
            QuantityTag::Riemann => "riemann",
            QuantityTag::Ricci => "ricci",
            QuantityTag::Scalar => "scalar",
            QuantityTag::Volume => "volume",
            QuantityTag::Hessian => "hessian",
            QuantityTag::Laplacian => "laplacian",
        }
    }

    fn needs_scalar(self) -> bool {
        matches!(self, QuantityTag::Hessian | QuantityTag::Laplacian)
    }
}

/// The quantity at `(g, Φ)` in the same flat layout as [`analytic_variation`].
/// The volume entry is `√det g`; its variation is compared after division
/// by the unperturbed `√det g`.
fn evaluate(tag: QuantityTag, g: &MetricField, phi: Option<&ScalarField>) -> Result<Vec<f64>> {
    Ok(match tag {
        QuantityTag::Christoffel => christoffel(g).data().to_vec(),
        QuantityTag::Riemann => riemann(g, &christoffel(g))?.to_full().data().to_vec(),
        QuantityTag::Ricci => CurvaturePack::new(g)?.ricci.to_full().data().to_vec(),
        QuantityTag::Scalar => CurvaturePack::new(g)?.scalar.into_values(),
        QuantityTag::Volume => g.sqrt_det().values().to_vec(),
        QuantityTag::Hessian => hessian(phi.expect("checked"), &christoffel(g)).data().to_vec(),
        QuantityTag::Laplacian => {
            laplacian_scalar(phi.expect("checked"), g, &christoffel(g)).into_values()
        }
    })
}

/// The analytic variation, flattened.
pub fn analytic_variation(tag: QuantityTag, pair: &VariationPair) -> Result<Vec<f64>> {
    Ok(match tag {
        QuantityTag::Christoffel => d_christoffel(pair).data().to_vec(),
        QuantityTag::Riemann => d_riemann(pair)?.to_full().data().to_vec(),
        QuantityTag::Ricci => d_ricci_full(pair)?.data().to_vec(),
        QuantityTag::Scalar => d_scalar(pair)?.into_values(),
        QuantityTag::Volume => d_volume(pair).into_values(),
        QuantityTag::Hessian => d_hessian(pair)?.data().to_vec(),
        QuantityTag::Laplacian => d_laplacian(pair)?.into_values(),
    })
}

/// Outcome of one oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub tag: QuantityTag,
    pub eps: Vec<f64>,
    /// `‖analytic - D_eps‖∞ / ‖limit‖∞` for each central difference.
    pub residuals: Vec<f64>,
    /// `‖analytic - limit‖∞ / ‖limit‖∞` against the Richardson limit.
    pub richardson_residual: f64,
    /// Same comparison in the grid L2 norm.
    pub richardson_residual_l2: f64,
    /// Observed order of the central difference in `eps`, from successive
    /// differences of the three largest steps.
    pub eps_slope: Option<f64>,
    pub analytic_norm: f64,
    pub limit_norm: f64,
}

fn central_difference(
    tag: QuantityTag,
    pair: &VariationPair,
    eps: f64,
) -> Result<Vec<f64>> {
    let gp = pair.perturbed(eps)?;
    let gm = pair.perturbed(-eps)?;
    let (pp, pm) = match (tag.needs_scalar(), pair.scalar()) {
        (true, Some((phi, rate))) => (
            Some(phi.zip_map(rate, |a, b| a + eps * b)),
            Some(phi.zip_map(rate, |a, b| a - eps * b)),
        ),
        (true, None) => return Err(pair.require_scalar().unwrap_err()),
        _ => (None, None),
    };
    let qp = evaluate(tag, &gp, pp.as_ref())?;
    let qm = evaluate(tag, &gm, pm.as_ref())?;
    let mut out: Vec<f64> = qp.iter().zip(&qm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    if tag == QuantityTag::Volume {
        for (x, s) in out.iter_mut().zip(pair.g.sqrt_det().values()) {
            *x /= s;
        }
    }
    Ok(out)
}

fn diff_linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn diff_l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn rel(err: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        if err == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        err / norm
    }
}

/// Central differences of the recomputed quantity at `g ± eps v` (and
/// `Φ ± eps ∂Φ/∂t` where relevant) for each step in `eps_list`, largest
/// first. At least two steps are needed; three give a slope.
pub fn fd_variation_oracle(
    tag: QuantityTag,
    pair: &VariationPair,
    eps_list: &[f64],
) -> Result<OracleReport> {
    if eps_list.len() < 2 {
        return Err(LabError::Config("the oracle needs at least two step sizes".into()));
    }
    let analytic = analytic_variation(tag, pair)?;
    let fds = eps_list
        .iter()
        .map(|&e| central_difference(tag, pair, e))
        .collect::<Result<Vec<_>>>()?;
    let r = eps_list[0] / eps_list[1];
    let limit: Vec<f64> =
        fds[0].iter().zip(&fds[1]).map(|(a, b)| b + (b - a) / (r * r - 1.0)).collect();
    let limit_norm = max_abs(&limit);
    let limit_l2 = limit.iter().map(|x| x * x).sum::<f64>().sqrt();
    let residuals = fds.iter().map(|fd| rel(diff_linf(&analytic, fd), limit_norm)).collect();
    let eps_slope = if fds.len() >= 3 {
        let d1 = diff_linf(&fds[0], &fds[1]);
        let d2 = diff_linf(&fds[1], &fds[2]);
        // for a geometric sequence of steps, successive differences shrink
        // by r^p where p is the order of the central difference
        if d1 > 0.0 && d2 > 0.0 {
            Some((d1 / d2).ln() / r.ln())
        } else {
            None
        }
    } else {
        None
    };
    Ok(OracleReport {
        tag,
        eps: eps_list.to_vec(),
        residuals,
        richardson_residual: rel(diff_linf(&analytic, &limit), limit_norm),
        richardson_residual_l2: rel(diff_l2(&analytic, &limit), limit_l2),
        eps_slope,
        analytic_norm: max_abs(&analytic),
        limit_norm,
    })
}

/// [`DEFAULT_EPS`] scaled for this pair.
pub fn default_eps(pair: &VariationPair) -> Vec<f64> {
    let s = pair.scale();
    let s = if s.is_finite() { s } else { 1.0 };
    DEFAULT_EPS.iter().map(|e| e * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::TAU;

    fn wavy_metric(grid: Grid, amp: f64) -> MetricField {
        MetricField::new(SymTensorField::from_coord_fn(grid, |i, j, x| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + amp * ((i + 1) as f64 * x[0] + (j + 2) as f64 * x[1]).sin()
        }))
        .unwrap()
    }

    fn wavy_direction(grid: Grid) -> SymTensorField {
        SymTensorField::from_coord_fn(grid, |i, j, x| {
            0.5 * ((j + 1) as f64 * x[0]).cos() + 0.3 * ((i + 1) as f64 * x[1]).sin()
        })
    }

    #[test]
    fn zero_direction_gives_zero() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let g = wavy_metric(grid, 0.05);
        let pair = VariationPair::new(g, SymTensorField::zeros(grid)).unwrap();
        assert_eq!(d_christoffel(&pair).linf(), 0.0);
        assert_eq!(d_scalar(&pair).unwrap().linf(), 0.0);
        assert_eq!(d_volume(&pair).linf(), 0.0);
        assert_eq!(d_ricci(&pair).unwrap().linf(), 0.0);
    }

    #[test]
    fn metric_direction() {
        let grid = Grid::new(2, 32, TAU).unwrap();
        let g = wavy_metric(grid, 0.05);
        let pair = VariationPair::new(g.clone(), g.tensor().clone()).unwrap();
        // ∇g = 0 up to the stencil's product-rule defect
        assert!(d_christoffel(&pair).linf() < 1e-4);
        let vol = d_volume(&pair);
        assert!(vol.values().iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let r = CurvaturePack::new(&g).unwrap().scalar;
        let dr = d_scalar(&pair).unwrap();
        assert!((&dr + &r).linf() < 1e-3 * r.linf().max(1e-3));
    }

    #[test]
    fn christoffel_oracle_on_wavy_pair() {
        let grid = Grid::new(2, 32, TAU).unwrap();
        let pair = VariationPair::new(wavy_metric(grid, 0.05), wavy_direction(grid)).unwrap();
        let rep = fd_variation_oracle(QuantityTag::Christoffel, &pair, &default_eps(&pair)).unwrap();
        assert!(rep.richardson_residual < 1e-9, "{rep:?}");
        let slope = rep.eps_slope.unwrap();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
    }

    #[test]
    fn oracle_rejects_huge_steps() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let pair = VariationPair::new(MetricField::flat(grid), SymTensorField::identity(grid)).unwrap();
        let err = fd_variation_oracle(QuantityTag::Volume, &pair, &[2.0, 1.0]).unwrap_err();
        assert!(matches!(err, LabError::EpsilonTooLarge { .. }));
    }

    #[test]
    fn hessian_without_scalar_is_an_error() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let pair = VariationPair::new(MetricField::flat(grid), SymTensorField::identity(grid)).unwrap();
        assert!(matches!(d_hessian(&pair), Err(LabError::Config(_))));
    }
}
