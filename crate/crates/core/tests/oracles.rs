//! Closed-form and identity oracles for the discrete geometry. Each test
//! measures a residual on a ladder of grids and requires both a small value
//! and the fourth-order decay of the stencils.

use std::f64::consts::TAU;

use ricci_lab_core::convergence::{finest_order, TrajectoryWindow};
use ricci_lab_core::flow::{integrate_fixed, list_rhs, stable_dt, step_rk4};
use ricci_lab_core::functionals::{i_n_expression, s_rate_oracle, s_tensor};
use ricci_lab_core::grid::max_abs;
use ricci_lab_core::init::random_scalar;
use ricci_lab_core::tensor_calc::{
    christoffel, covariant_d, div_sym2, gradient, laplacian_scalar, riemann_full, riemann_mixed, trace,
};
use ricci_lab_core::{Chart, CurvaturePack, FlowConfig, FlowState, Grid, InitialData, Preset, ScalarField};

const LEVELS: [usize; 3] = [24, 48, 96];

fn conformal() -> InitialData {
    InitialData::new(&Preset::ConformalBump { amp: 0.2, freq: 1.0, phi_amp: 0.1, u_amp: 0.2 }, 2).unwrap()
}

fn random(dim: usize) -> InitialData {
    InitialData::new(&Preset::RandomSmooth { seed: 3, cutoff: 1, amp: 0.1, phi_amp: 0.3, u_amp: 0.2 }, dim).unwrap()
}

fn ladder(data: &InitialData, chart: Chart, residual: impl Fn(&FlowState) -> f64) -> Vec<f64> {
    LEVELS
        .iter()
        .map(|&n| residual(&data.state(Grid::new(data.dim(), n, TAU).unwrap(), chart).unwrap()))
        .collect()
}

fn assert_fourth_order(errors: &[f64], bound: f64) {
    let order = finest_order(errors, 2.0).expect("nonzero errors");
    assert!(order > 3.5, "order {order} from {errors:?}");
    assert!(*errors.last().unwrap() < bound, "{errors:?} above {bound}");
}

#[test]
fn conformal_scalar_curvature_matches_closed_form() {
    // g = e^{2φ} δ on a surface has R = -2 e^{-2φ} Δ₀φ
    let data = conformal();
    let errors = ladder(&data, Chart::Identity, |s| {
        let grid = *s.g.grid();
        let exact = grid.sample(|x| -2.0 * (-2.0 * data.conformal_factor(x)).exp() * data.conformal_factor_laplacian(x));
        let r = CurvaturePack::new(&s.g).unwrap().scalar;
        max_abs(&r.values().iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>())
    });
    assert_fourth_order(&errors, 1e-5);
}

#[test]
fn laplacian_agrees_with_divergence_form() {
    let data = random(2);
    let errors = ladder(&data, Chart::Identity, |s| {
        let g = &s.g;
        let grid = *g.grid();
        let d = g.dim();
        let dphi = gradient(&s.phi);
        let mut div = vec![0.0; grid.nodes()];
        for i in 0..d {
            let flux = ScalarField::from_node_fn(grid, |n| {
                g.sqrt_det().values()[n] * (0..d).map(|j| g.ginv(i, j, n) * dphi.at(&[j], n)).sum::<f64>()
            });
            for (acc, p) in div.iter_mut().zip(flux.partial(i).values()) {
                *acc += p;
            }
        }
        let lap = laplacian_scalar(&s.phi, g, &christoffel(g));
        max_abs(
            &(0..grid.nodes())
                .map(|n| lap.values()[n] - div[n] / g.sqrt_det().values()[n])
                .collect::<Vec<_>>(),
        )
    });
    assert_fourth_order(&errors, 1e-6);
}

#[test]
fn metric_is_parallel() {
    // the symbols are built from the same discrete partials that ∇ applies
    // to g, so the identity holds to roundoff rather than to stencil order
    let data = random(3);
    let s = data.state(Grid::new(3, 16, TAU).unwrap(), Chart::Identity).unwrap();
    let dg = covariant_d(&s.g.tensor().to_full(), &christoffel(&s.g)).unwrap();
    assert!(dg.linf() < 1e-13, "{}", dg.linf());
}

#[test]
fn contracted_bianchi_identity() {
    // div Ric = ½ dR
    let data = conformal();
    let errors = ladder(&data, Chart::Shear { alpha: 0.3 }, |s| {
        let pack = CurvaturePack::new(&s.g).unwrap();
        let div = div_sym2(&pack.ricci, &s.g, &pack.christoffel);
        let half_dr = &gradient(&pack.scalar) * 0.5;
        (&div - &half_dr).linf()
    });
    assert_fourth_order(&errors, 1e-5);
}

#[test]
fn ricci_trace_is_scalar_curvature() {
    let data = random(3);
    let s = data.state(Grid::new(3, 12, TAU).unwrap(), Chart::Identity).unwrap();
    let pack = CurvaturePack::new(&s.g).unwrap();
    let tr = trace(&pack.ricci, &s.g);
    let diff: Vec<f64> = tr.values().iter().zip(pack.scalar.values()).map(|(a, b)| a - b).collect();
    assert!(max_abs(&diff) <= 1e-12 * pack.scalar.linf().max(1.0));
}

#[test]
fn lowered_mixed_riemann_matches_first_kind() {
    // R_{ijkl} = g_{km} R^m_{ijl}; the two forms differ only in where the
    // stencil meets the metric, so they agree to discretization order
    let data = random(2);
    let errors = ladder(&data, Chart::Shear { alpha: 0.3 }, |s| {
        let g = &s.g;
        let gamma = christoffel(g);
        let full = riemann_full(g, &gamma);
        let mixed = riemann_mixed(&gamma);
        let d = g.dim();
        let mut worst: f64 = 0.0;
        for n in 0..g.grid().nodes() {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            let lowered: f64 = (0..d).map(|m| g.g(k, m, n) * mixed.at(&[m, i, j, l], n)).sum();
                            worst = worst.max((lowered - full.at(&[i, j, k, l], n)).abs());
                        }
                    }
                }
            }
        }
        worst
    });
    assert_fourth_order(&errors, 1e-6);
}

#[test]
fn flow_rate_of_s_matches_trajectory_difference() {
    let data = random(2);
    let errors = ladder(&data, Chart::Identity, |s| {
        let config = FlowConfig::default();
        let window = TrajectoryWindow::new(s, &config, stable_dt(s, &config)).unwrap();
        let fd = window.derivative(|x| Ok(s_tensor(x)?.scalar.into_values())).unwrap();
        let oracle = s_rate_oracle(window.centre()).unwrap();
        let scale = max_abs(&fd);
        max_abs(&fd.iter().zip(oracle.values()).map(|(a, b)| a - b).collect::<Vec<_>>()) / scale
    });
    // both sides are exact derivatives of the same discrete flow, so the
    // gap is differencing error alone
    assert!(*errors.last().unwrap() < 1e-6, "{errors:?}");
}

#[test]
fn flat_constant_state_is_a_fixed_point() {
    let grid = Grid::new(2, 16, TAU).unwrap();
    let data = InitialData::new(&Preset::FlatConst { phi: 0.3, u: 1.5 }, 2).unwrap();
    let start = data.state(grid, Chart::Identity).unwrap();
    let (dg, dphi) = list_rhs(&start).unwrap();
    assert_eq!(dg.linf(), 0.0);
    assert_eq!(dphi.linf(), 0.0);
    let config = FlowConfig { a: 0.5, b: 0.3, ..FlowConfig::default() };
    let mut s = start.clone();
    for _ in 0..20 {
        s = step_rk4(&s, &config).unwrap();
    }
    assert_eq!(s.g.tensor().data(), start.g.tensor().data());
    assert_eq!(s.phi.values(), start.phi.values());
}

#[test]
fn ricci_identity_on_one_forms() {
    // (∇_i∇_j - ∇_j∇_i) ω_k = -R^l_{ijk} ω_l
    let data = random(2);
    let errors = ladder(&data, Chart::Shear { alpha: 0.3 }, |s| {
        let gamma = christoffel(&s.g);
        let omega = gradient(&s.u).zip_map(&gradient(&s.phi), |a, b| a + s.u.values()[0] * b);
        let omega = ricci_lab_core::TensorField::from_fn(*s.g.grid(), omega.variance().to_vec(), |idx, n| {
            omega.at(idx, n) * (1.0 + 0.5 * s.phi.values()[n])
        });
        let dd = covariant_d(&covariant_d(&omega, &gamma).unwrap(), &gamma).unwrap();
        let mixed = riemann_mixed(&gamma);
        let d = s.g.dim();
        let mut worst: f64 = 0.0;
        for n in 0..s.g.grid().nodes() {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let commutator = dd.at(&[i, j, k], n) - dd.at(&[j, i, k], n);
                        let curvature: f64 = (0..d).map(|l| -mixed.at(&[l, i, j, k], n) * omega.at(&[l], n)).sum();
                        worst = worst.max((commutator - curvature).abs());
                    }
                }
            }
        }
        worst
    });
    assert_fourth_order(&errors, 1e-5);
}

#[test]
fn chart_change_moves_only_the_christoffel_terms() {
    // the other integrands are scalars, so their chart gap is resampling
    // error and shrinks with h; the Γ terms are not and keep an O(1) gap
    let data = random(2);
    let config = FlowConfig { a: 0.5, b: 0.3, ..FlowConfig::default() };
    let gaps = |n: usize| {
        let terms = |chart| {
            let s = data.state(Grid::new(2, n, TAU).unwrap(), chart).unwrap();
            i_n_expression(&s, &config, 5).unwrap()
        };
        let plain = terms(Chart::Identity);
        let sheared = terms(Chart::Shear { alpha: 0.3 });
        plain
            .terms
            .iter()
            .map(|(label, v)| (*label, (v - sheared.get(label).unwrap()).abs() / v.abs()))
            .collect::<Vec<_>>()
    };
    let (coarse, fine) = (gaps(32), gaps(64));
    for ((label, c), (_, f)) in coarse.iter().zip(&fine) {
        if *label == "gamma_terms" {
            assert!(*f > 1e-2 && *c > 1e-2, "{label}: {c} -> {f}");
        } else {
            assert!(*f < 1e-3 && c / f > 10.0, "{label}: {c} -> {f}");
        }
    }
}

#[test]
fn rk4_error_shrinks_sixteenfold_per_halving() {
    let data = random(2);
    let s = data.state(Grid::new(2, 24, TAU).unwrap(), Chart::Identity).unwrap();
    let config = FlowConfig { a: 0.5, b: 0.3, ..FlowConfig::default() };
    let dt = 2.0 * stable_dt(&s, &config);
    let end = |k: usize| {
        let traj = integrate_fixed(&s, &config, dt / k as f64, 4 * k).unwrap();
        traj.last().unwrap().g.tensor().data().to_vec()
    };
    let (a, b, c) = (end(1), end(2), end(4));
    let gap = |x: &[f64], y: &[f64]| max_abs(&x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>());
    let ratio = gap(&a, &b) / gap(&b, &c);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}

#[test]
fn heat_flow_obeys_the_maximum_principle() {
    let grid = Grid::new(2, 32, TAU).unwrap();
    let phi = random_scalar(grid, 9, 3, 1.0);
    let mut s = FlowState::new(0.0, ricci_lab_core::MetricField::flat(grid), phi, ScalarField::constant(grid, 1.0)).unwrap();
    let config = FlowConfig { frozen_geometry: true, ..FlowConfig::default() };
    for _ in 0..50 {
        let next = step_rk4(&s, &config).unwrap();
        assert!(next.phi.max() <= s.phi.max() + 1e-12);
        assert!(next.phi.min() >= s.phi.min() - 1e-12);
        assert_eq!(next.g.tensor().data(), s.g.tensor().data());
        s = next;
    }
}
