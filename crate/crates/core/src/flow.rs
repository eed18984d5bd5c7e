//! Explicit time integration of the Ricci flow coupled to a scalar heat
//! flow, optionally in DeTurck gauge, together with the `u` equation
//! `∂u/∂t = -F`.

use crate::error::{LabError, Result};
use crate::field::{ScalarField, SymTensorField, TensorField, Variance};
use crate::functionals::{f_quantity, f_quantity_from_pack};
use crate::metric::{MetricField, DEFAULT_SPD_FLOOR};
use crate::tensor_calc::{
    christoffel, covariant_d, gradient, hessian, inner2, laplacian_scalar, laplacian_sym2,
    lower, one_form_norm2, ChristoffelField, CurvaturePack,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    Plain,
    DeTurck,
}

/// Which definition of `F` the functionals use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FVariant {
    /// `F = -Δu + a u log u + B S u`.
    Laplacian,
    /// `F = u + a u log u + B S u`.
    Linear,
}

/// Reference metric of the DeTurck gauge with its Christoffel symbols.
#[derive(Debug, Clone)]
pub struct Reference {
    pub metric: MetricField,
    pub christoffel: ChristoffelField,
}

impl Reference {
    pub fn new(metric: MetricField) -> Self {
        let christoffel = christoffel(&metric);
        Self { metric, christoffel }
    }
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub a: f64,
    pub b: f64,
    pub gauge: Gauge,
    /// Reference metric for the gauge. `None` means "the initial metric";
    /// drivers fill it in before stepping.
    pub reference: Option<Reference>,
    pub c_cfl: f64,
    pub u_floor: f64,
    pub spd_floor: f64,
    pub max_steps: usize,
    /// Evolve `Φ` and `u` on a fixed metric.
    pub frozen_geometry: bool,
    pub f_variant: FVariant,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 0.0,
            gauge: Gauge::Plain,
            reference: None,
            c_cfl: 0.1,
            u_floor: 1e-8,
            spd_floor: DEFAULT_SPD_FLOOR,
            max_steps: 100,
            frozen_geometry: false,
            f_variant: FVariant::Laplacian,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_cfl > 0.0 && self.c_cfl <= 0.5) {
            return Err(LabError::Config(format!("c_cfl must lie in (0, 0.5], got {}", self.c_cfl)));
        }
        if !(self.u_floor > 0.0) {
            return Err(LabError::Config(format!("u_floor must be positive, got {}", self.u_floor)));
        }
        if !(self.spd_floor > 0.0) {
            return Err(LabError::Config(format!("spd_floor must be positive, got {}", self.spd_floor)));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(LabError::Config("a and B must be finite".into()));
        }
        Ok(())
    }

    /// Uses `state.g` as the reference metric unless one is already set.
    pub fn anchored_at(mut self, state: &FlowState) -> Self {
        if self.reference.is_none() {
            self.reference = Some(Reference::new(state.g.clone()));
        }
        self
    }
}

/// A snapshot `(t, g, Φ, u)`.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub g: MetricField,
    pub phi: ScalarField,
    pub u: ScalarField,
}

impl FlowState {
    pub fn new(t: f64, g: MetricField, phi: ScalarField, u: ScalarField) -> Result<Self> {
        if phi.grid() != g.grid() || u.grid() != g.grid() {
            return Err(LabError::GridMismatch);
        }
        phi.validate()?;
        u.validate()?;
        Ok(Self { t, g, phi, u })
    }

    /// Fails at the first node where `u <= floor`.
    pub fn check_u(&self, floor: f64) -> Result<()> {
        match self.u.values().iter().position(|&x| !(x > floor)) {
            Some(node) => Err(LabError::UBelowFloor {
                node,
                time: self.t,
                value: self.u.values()[node],
                floor,
            }),
            None => Ok(()),
        }
    }
}

/// Time derivatives of the three evolved fields.
#[derive(Debug, Clone)]
pub struct Rates {
    pub g: SymTensorField,
    pub phi: ScalarField,
    pub u: ScalarField,
}

/// `(-2 Ric + 2 dΦ⊗dΦ, ΔΦ)`.
pub fn list_rhs(state: &FlowState) -> Result<(SymTensorField, ScalarField)> {
    let pack = CurvaturePack::new(&state.g)?;
    Ok(list_rhs_with(state, &pack))
}

fn list_rhs_with(state: &FlowState, pack: &CurvaturePack) -> (SymTensorField, ScalarField) {
    let dphi = gradient(&state.phi);
    let dg = SymTensorField::from_fn(*state.g.grid(), |i, j, node| {
        -2.0 * pack.ricci.at(i, j, node) + 2.0 * dphi.at(&[i], node) * dphi.at(&[j], node)
    });
    let lap = laplacian_scalar(&state.phi, &state.g, &pack.christoffel);
    (dg, lap)
}

/// `W^k = g^{pq}(Γ^k_pq - Γ̄^k_pq)`.
pub fn deturck_field(g: &MetricField, gamma: &ChristoffelField, gamma_bar: &ChristoffelField) -> TensorField {
    let d = g.dim();
    TensorField::from_fn(*g.grid(), vec![Variance::Upper], |idx, node| {
        let k = idx[0];
        let mut s = 0.0;
        for p in 0..d {
            for q in 0..d {
                s += g.ginv(p, q, node) * (gamma.at(k, p, q, node) - gamma_bar.at(k, p, q, node));
            }
        }
        s
    })
}

fn reference(config: &FlowConfig) -> Result<&Reference> {
    config
        .reference
        .as_ref()
        .ok_or_else(|| LabError::Config("the DeTurck gauge needs a reference metric".into()))
}

/// `(-2 Ric + 2 dΦ⊗dΦ + ∇_i W_j + ∇_j W_i, ΔΦ + W^k ∇_k Φ)`.
pub fn deturck_rhs(state: &FlowState, config: &FlowConfig) -> Result<(SymTensorField, ScalarField)> {
    let pack = CurvaturePack::new(&state.g)?;
    deturck_rhs_with(state, config, &pack)
}

fn deturck_rhs_with(
    state: &FlowState,
    config: &FlowConfig,
    pack: &CurvaturePack,
) -> Result<(SymTensorField, ScalarField)> {
    let r = reference(config)?;
    let (dg, dphi_t) = list_rhs_with(state, pack);
    let w = deturck_field(&state.g, &pack.christoffel, &r.christoffel);
    let w_low = lower(&w, 0, &state.g);
    let dw = covariant_d(&w_low, &pack.christoffel)?;
    let dg = SymTensorField::from_fn(*state.g.grid(), |i, j, node| {
        dg.at(i, j, node) + dw.at(&[i, j], node) + dw.at(&[j, i], node)
    });
    let dphi = gradient(&state.phi);
    let d = state.g.dim();
    let transport = ScalarField::from_node_fn(*state.g.grid(), |node| {
        (0..d).map(|k| w.at(&[k], node) * dphi.at(&[k], node)).sum()
    });
    Ok((dg, dphi_t + transport))
}

/// `∂u/∂t = -F`.
pub fn du_dt(state: &FlowState, config: &FlowConfig) -> Result<ScalarField> {
    Ok(-&f_quantity(state, config)?)
}

/// All three rates under the configured gauge.
pub fn rates(state: &FlowState, config: &FlowConfig) -> Result<Rates> {
    let pack = CurvaturePack::new(&state.g)?;
    let (g, phi) = if config.frozen_geometry {
        let lap = laplacian_scalar(&state.phi, &state.g, &pack.christoffel);
        (SymTensorField::zeros(*state.g.grid()), lap)
    } else {
        match config.gauge {
            Gauge::Plain => list_rhs_with(state, &pack),
            Gauge::DeTurck => deturck_rhs_with(state, config, &pack)?,
        }
    };
    let u = -&f_quantity_from_pack(state, config, &pack)?;
    Ok(Rates { g, phi, u })
}

/// `c_cfl h_min^2 / ‖g^-1‖∞`.
pub fn stable_dt(state: &FlowState, config: &FlowConfig) -> f64 {
    let h = state.g.grid().min_spacing();
    config.c_cfl * h * h / state.g.inverse_inf_norm()
}

fn advance(state: &FlowState, k: &Rates, dt: f64, config: &FlowConfig) -> Result<FlowState> {
    let t = state.t + dt;
    let g = state.g.tensor().zip_map(&k.g, |a, b| a + dt * b);
    let g = MetricField::with_floor(g, config.spd_floor).map_err(|e| match e {
        LabError::NotPositiveDefinite { node, .. } | LabError::InverseDefect { node, .. } => {
            LabError::MetricDegenerate { node, time: t }
        }
        other => other,
    })?;
    let phi = state.phi.zip_map(&k.phi, |a, b| a + dt * b);
    let u = state.u.zip_map(&k.u, |a, b| a + dt * b);
    let next = FlowState { t, g, phi, u };
    next.phi.validate()?;
    next.check_u(config.u_floor)?;
    Ok(next)
}

/// One classical RK4 step of length `dt`.
pub fn step_rk4_dt(state: &FlowState, config: &FlowConfig, dt: f64) -> Result<FlowState> {
    let k1 = rates(state, config)?;
    let s2 = advance(state, &k1, 0.5 * dt, config)?;
    let k2 = rates(&s2, config)?;
    let s3 = advance(state, &k2, 0.5 * dt, config)?;
    let k3 = rates(&s3, config)?;
    let s4 = advance(state, &k3, dt, config)?;
    let k4 = rates(&s4, config)?;
    let combine = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|n| (a[n] + 2.0 * b[n] + 2.0 * c[n] + d[n]) / 6.0).collect()
    };
    let grid = *state.g.grid();
    let mut gk = SymTensorField::zeros(grid);
    gk.data_mut().copy_from_slice(&combine(k1.g.data(), k2.g.data(), k3.g.data(), k4.g.data()));
    let pk = ScalarField::new(grid, combine(k1.phi.values(), k2.phi.values(), k3.phi.values(), k4.phi.values()))?;
    let uk = ScalarField::new(grid, combine(k1.u.values(), k2.u.values(), k3.u.values(), k4.u.values()))?;
    advance(state, &Rates { g: gk, phi: pk, u: uk }, dt, config)
}

/// One RK4 step with the step size from [`stable_dt`].
pub fn step_rk4(state: &FlowState, config: &FlowConfig) -> Result<FlowState> {
    step_rk4_dt(state, config, stable_dt(state, config))
}

/// `steps` fixed-size steps; the trajectory includes the initial state.
pub fn integrate_fixed(state: &FlowState, config: &FlowConfig, dt: f64, steps: usize) -> Result<Vec<FlowState>> {
    if steps > config.max_steps {
        return Err(LabError::Config(format!("{steps} steps exceed max_steps = {}", config.max_steps)));
    }
    let mut out = Vec::with_capacity(steps + 1);
    out.push(state.clone());
    for _ in 0..steps {
        let next = step_rk4_dt(out.last().expect("nonempty"), config, dt)?;
        out.push(next);
    }
    Ok(out)
}

/// Gauge vector at a state; zero in plain gauge.
pub fn gauge_vector(state: &FlowState, config: &FlowConfig, pack: &CurvaturePack) -> Result<TensorField> {
    match config.gauge {
        Gauge::Plain => Ok(TensorField::zeros(*state.g.grid(), vec![Variance::Upper])),
        Gauge::DeTurck => Ok(deturck_field(&state.g, &pack.christoffel, &reference(config)?.christoffel)),
    }
}

/// Addends of the stated right-hand side of `∂Ric/∂t`, in chart
/// components. `Q` is `div W - ½ tr_g(∇W)`; for a vector field both
/// contractions equal `∇_k W^k`.
pub fn ricci_evolution_terms(
    state: &FlowState,
    config: &FlowConfig,
) -> Result<Vec<(&'static str, SymTensorField)>> {
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let ric = &pack.ricci;
    let riem = &pack.riemann;
    let dphi = gradient(&state.phi);
    let up_phi: Vec<Vec<f64>> = (0..d)
        .map(|k| (0..grid.nodes()).map(|n| (0..d).map(|a| g.ginv(k, a, n) * dphi.at(&[a], n)).sum()).collect())
        .collect();
    let hess = hessian(&state.phi, gamma);
    let lap_phi = laplacian_scalar(&state.phi, g, gamma);
    let d_lap_phi = gradient(&lap_phi);
    let w = gauge_vector(state, config, &pack)?;
    let dw = covariant_d(&w, gamma)?; // (k, l) = ∇_k W^l
    let div_w = ScalarField::from_node_fn(grid, |n| (0..d).map(|k| dw.at(&[k, k], n)).sum());
    let q = &div_w - &(&div_w * 0.5);
    let ric_up = |k: usize, l: usize, n: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += g.ginv(k, a, n) * g.ginv(l, b, n) * ric.at(a, b, n);
            }
        }
        s
    };
    let d_ric = covariant_d(&ric.to_full(), gamma)?; // (k, i, j)

    let lap = laplacian_sym2(ric, g, gamma);
    let riemann_ricci = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += riem.at(i, k, j, l, n) * ric_up(k, l, n);
            }
        }
        2.0 * s
    });
    let riemann_gradphi = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += up_phi[k][n] * up_phi[l][n] * riem.at(i, k, j, l, n);
            }
        }
        -2.0 * s
    });
    let hess_squared = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += hess.at(i, a, n) * g.ginv(a, b, n) * hess.at(j, b, n);
            }
        }
        -2.0 * s
    });
    let gradphi_laplacian = SymTensorField::from_fn(grid, |i, j, n| {
        2.0 * (dphi.at(&[i], n) * d_lap_phi.at(&[j], n) + dphi.at(&[j], n) * d_lap_phi.at(&[i], n))
    });
    let hess_norm = &hessian(&one_form_norm2(&dphi, g), gamma) * -1.0;
    let hess_q = hessian(&q, gamma);
    let w_gradient_ricci = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for k in 0..d {
            s += (d_ric.at(&[i, j, k], n) + d_ric.at(&[j, i, k], n)) * w.at(&[k], n);
        }
        -s
    });
    let ricci_gradw = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for k in 0..d {
            s += ric.at(i, k, n) * dw.at(&[j, k], n) + ric.at(j, k, n) * dw.at(&[i, k], n);
        }
        s
    });
    Ok(vec![
        ("laplacian", lap),
        ("riemann_ricci", riemann_ricci),
        ("riemann_gradphi", riemann_gradphi),
        ("hessphi_squared", hess_squared),
        ("gradphi_laplacian", gradphi_laplacian),
        ("hessian_gradphi_norm", hess_norm),
        ("hessian_q", hess_q),
        ("w_gradient_ricci", w_gradient_ricci),
        ("ricci_gradw", ricci_gradw),
    ])
}

/// Terms absent from the stated Ricci equation that the term fit
/// offers as alternatives: `Ric_ik Ric^k_j`, `W^k ∇_k Ric_ij` and
/// `ΔΦ ∇_i∇_j Φ`.
pub fn ricci_candidate_terms(
    state: &FlowState,
    config: &FlowConfig,
) -> Result<Vec<(&'static str, SymTensorField)>> {
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let ric = &pack.ricci;
    let w = gauge_vector(state, config, &pack)?;
    let d_ric = covariant_d(&ric.to_full(), &pack.christoffel)?;
    let ricci_squared = SymTensorField::from_fn(grid, |i, j, n| {
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += ric.at(i, a, n) * g.ginv(a, b, n) * ric.at(b, j, n);
            }
        }
        s
    });
    let transport = SymTensorField::from_fn(grid, |i, j, n| {
        (0..d).map(|k| w.at(&[k], n) * d_ric.at(&[k, i, j], n)).sum()
    });
    let lap_phi = laplacian_scalar(&state.phi, g, &pack.christoffel);
    let hess = hessian(&state.phi, &pack.christoffel);
    let lap_hess = SymTensorField::from_fn(grid, |i, j, n| lap_phi.values()[n] * hess.at(i, j, n));
    Ok(vec![
        ("ricci_squared", ricci_squared),
        ("w_transport_ricci", transport),
        ("laplacian_phi_hessian", lap_hess),
    ])
}

pub fn ricci_evolution_rhs(state: &FlowState, config: &FlowConfig) -> Result<SymTensorField> {
    let terms = ricci_evolution_terms(state, config)?;
    Ok(terms.into_iter().map(|(_, t)| t).reduce(|a, b| &a + &b).expect("terms"))
}

/// Addends of the stated right-hand side of `∂R/∂t`.
pub fn scalar_evolution_terms(
    state: &FlowState,
    config: &FlowConfig,
) -> Result<Vec<(&'static str, ScalarField)>> {
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let dphi = gradient(&state.phi);
    let hess = hessian(&state.phi, gamma);
    let lap_phi = laplacian_scalar(&state.phi, g, gamma);
    let w = gauge_vector(state, config, &pack)?;
    let dr = gradient(&pack.scalar);
    let ric_phi = ScalarField::from_node_fn(grid, |n| {
        // R^{ij} ∇_iΦ ∇_jΦ
        let mut s = 0.0;
        for i in 0..d {
            let ui: f64 = (0..d).map(|a| g.ginv(i, a, n) * dphi.at(&[a], n)).sum();
            for j in 0..d {
                let uj: f64 = (0..d).map(|b| g.ginv(j, b, n) * dphi.at(&[b], n)).sum();
                s += pack.ricci.at(i, j, n) * ui * uj;
            }
        }
        s
    });
    let lie = ScalarField::from_node_fn(grid, |n| (0..d).map(|k| w.at(&[k], n) * dr.at(&[k], n)).sum());
    Ok(vec![
        ("laplacian", laplacian_scalar(&pack.scalar, g, gamma)),
        ("ricci_norm", inner2(&pack.ricci, &pack.ricci, g) * 2.0),
        ("ricci_gradphi", ric_phi * -4.0),
        ("hessphi_norm", inner2(&hess, &hess, g) * -2.0),
        ("laplacian_phi_squared", lap_phi.powi(2) * 2.0),
        ("lie_derivative", lie),
    ])
}

pub fn scalar_evolution_rhs(state: &FlowState, config: &FlowConfig) -> Result<ScalarField> {
    let terms = scalar_evolution_terms(state, config)?;
    Ok(terms.into_iter().map(|(_, t)| t).reduce(|a, b| a + b).expect("terms"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::TAU;

    fn flat_state(grid: Grid, phi: f64, u: f64) -> FlowState {
        FlowState::new(0.0, MetricField::flat(grid), ScalarField::constant(grid, phi), ScalarField::constant(grid, u))
            .unwrap()
    }

    #[test]
    fn flat_torus_is_a_fixed_point_of_the_rhs() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let (dg, dp) = list_rhs(&flat_state(grid, 0.3, 1.0)).unwrap();
        assert_eq!(dg.linf(), 0.0);
        assert_eq!(dp.linf(), 0.0);
    }

    #[test]
    fn scalar_heat_part_on_flat_metric() {
        let grid = Grid::new(2, 64, TAU).unwrap();
        let mut s = flat_state(grid, 0.0, 1.0);
        s.phi = ScalarField::from_fn(grid, |x| 0.1 * x[0].sin());
        let (dg, dp) = list_rhs(&s).unwrap();
        let want_g = ScalarField::from_fn(grid, |x| 0.02 * x[0].cos().powi(2));
        let err_g: f64 = dg.comp(0, 0).iter().zip(want_g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err_g < 1e-6);
        assert_eq!(dg.comp(0, 1).iter().fold(0.0_f64, |m, x| m.max(x.abs())), 0.0);
        let err_p = (&dp + &s.phi).linf();
        assert!(err_p < 1e-6);
    }

    #[test]
    fn deturck_vanishes_at_reference() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let g = MetricField::new(SymTensorField::from_coord_fn(grid, |i, j, x| {
            if i == j { 1.0 + 0.1 * (x[0] + x[1]).sin() } else { 0.05 * x[1].cos() }
        }))
        .unwrap();
        let gamma = christoffel(&g);
        assert_eq!(deturck_field(&g, &gamma, &gamma).linf(), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = FlowConfig::default();
        assert!(c.validate().is_ok());
        c.c_cfl = 0.7;
        assert!(c.validate().is_err());
        c.c_cfl = 0.1;
        c.u_floor = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn u_floor_violation_is_reported() {
        let grid = Grid::new(2, 8, TAU).unwrap();
        let mut s = flat_state(grid, 0.0, 1.0);
        s.u.values_mut()[5] = 1e-9;
        s.t = 0.25;
        match s.check_u(1e-8) {
            Err(LabError::UBelowFloor { node, time, .. }) => {
                assert_eq!(node, 5);
                assert_eq!(time, 0.25);
            }
            other => panic!("{other:?}"),
        }
    }
}
