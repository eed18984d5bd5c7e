//! Structural invariants checked over randomly drawn smooth data.

use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use ricci_lab_core::grid::max_abs;
use ricci_lab_core::init::{random_direction, random_scalar};
use ricci_lab_core::tensor_calc::{christoffel, hessian, trace};
use ricci_lab_core::variation::{analytic_variation, d_ricci, d_scalar, QuantityTag};
use ricci_lab_core::{
    integrate, Chart, CurvaturePack, FlowState, Grid, InitialData, MetricField, Preset, ScalarField, VariationPair,
};

fn grid2() -> Grid {
    Grid::new(2, 16, TAU).unwrap()
}

fn curved(seed: u64, dim: usize, n: usize) -> FlowState {
    let data = InitialData::new(&Preset::RandomSmooth { seed, cutoff: 2, amp: 0.1, phi_amp: 0.3, u_amp: 0.2 }, dim)
        .unwrap();
    data.state(Grid::new(dim, n, TAU).unwrap(), Chart::Identity).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = max_abs(a).max(max_abs(b)).max(1.0);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn partial_is_linear(s1 in 0u64..1000, s2 in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64, axis in 0usize..2) {
        let grid = grid2();
        let f = random_scalar(grid, s1, 3, 1.0);
        let g = random_scalar(grid, s2, 3, 1.0);
        let combo = f.zip_map(&g, |x, y| a * x + b * y);
        let lhs = combo.partial(axis);
        let rhs = f.partial(axis).zip_map(&g.partial(axis), |x, y| a * x + b * y);
        prop_assert!(close(lhs.values(), rhs.values(), 1e-13));
    }

    #[test]
    fn partial_annihilates_constants(c in -1e3..1e3f64, axis in 0usize..2) {
        let f = ScalarField::constant(grid2(), c);
        prop_assert_eq!(f.partial(axis).linf(), 0.0);
    }

    #[test]
    fn partial_is_skew_adjoint(s1 in 0u64..1000, s2 in 0u64..1000, axis in 0usize..2) {
        // ∫ f ∂g = -∫ g ∂f on the flat torus, exactly for a centred stencil
        let grid = grid2();
        let flat = MetricField::flat(grid);
        let f = random_scalar(grid, s1, 4, 1.0);
        let g = random_scalar(grid, s2, 4, 1.0);
        let lhs = integrate(&f.zip_map(&g.partial(axis), |x, y| x * y), &flat).unwrap();
        let rhs = integrate(&g.zip_map(&f.partial(axis), |x, y| x * y), &flat).unwrap();
        assert_abs_diff_eq!(lhs, -rhs, epsilon = 1e-12 * (lhs.abs() + 1.0));
    }

    #[test]
    fn variations_are_linear_in_the_direction(seed in 0u64..500, a in -2.0..2.0f64) {
        let s = curved(seed, 2, 16);
        let grid = *s.g.grid();
        let v1 = random_direction(grid, seed + 1, 2, 1.0);
        let v2 = random_direction(grid, seed + 2, 2, 1.0);
        let sum = v1.zip_map(&v2, |x, y| a * x + y);
        for tag in [QuantityTag::Christoffel, QuantityTag::Riemann, QuantityTag::Ricci, QuantityTag::Scalar, QuantityTag::Volume] {
            let d1 = analytic_variation(tag, &VariationPair::new(s.g.clone(), v1.clone()).unwrap()).unwrap();
            let d2 = analytic_variation(tag, &VariationPair::new(s.g.clone(), v2.clone()).unwrap()).unwrap();
            let ds = analytic_variation(tag, &VariationPair::new(s.g.clone(), sum.clone()).unwrap()).unwrap();
            let combined: Vec<f64> = d1.iter().zip(&d2).map(|(x, y)| a * x + y).collect();
            prop_assert!(close(&ds, &combined, 1e-11), "{}", tag.name());
        }
    }

    #[test]
    fn curvature_has_its_symmetries(seed in 0u64..500) {
        let s = curved(seed, 3, 8);
        let pack = CurvaturePack::new(&s.g).unwrap();
        prop_assert!(pack.riemann.symmetry_residual() < 1e-10);
        let h = hessian(&s.phi, &christoffel(&s.g));
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(h.comp(i, j), h.comp(j, i));
            }
        }
    }

    #[test]
    fn preset_states_are_deterministic(seed in 0u64..10_000) {
        let a = curved(seed, 2, 16);
        let b = curved(seed, 2, 16);
        prop_assert_eq!(a.g.tensor().data(), b.g.tensor().data());
        prop_assert_eq!(a.phi.values(), b.phi.values());
        prop_assert_eq!(a.u.values(), b.u.values());
    }
}

/// `max |δR - (g^{ij} δRic_ij - ⟨v, Ric⟩)|` on an `n × n` grid.
fn trace_defect(seed: u64, n: usize) -> f64 {
    let s = curved(seed, 2, n);
    let grid = *s.g.grid();
    let v = random_direction(grid, seed + 7, 2, 1.0);
    let pair = VariationPair::new(s.g.clone(), v.clone()).unwrap();
    let pack = CurvaturePack::new(&s.g).unwrap();
    let tr = trace(&d_ricci(&pair).unwrap(), &s.g);
    let ds = d_scalar(&pair).unwrap();
    let d = s.g.dim();
    let gaps: Vec<f64> = (0..grid.nodes())
        .map(|n| {
            let mut contraction = 0.0;
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        for l in 0..d {
                            contraction += s.g.ginv(i, k, n) * s.g.ginv(j, l, n) * v.at(k, l, n) * pack.ricci.at(i, j, n);
                        }
                    }
                }
            }
            ds.values()[n] - (tr.values()[n] - contraction)
        })
        .collect();
    max_abs(&gaps)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    // the two sides apply covariant derivatives in different orders, which
    // commute only up to the stencil error
    #[test]
    fn scalar_variation_is_trace_of_ricci_variation(seed in 0u64..500) {
        let coarse = trace_defect(seed, 24);
        let fine = trace_defect(seed, 48);
        prop_assert!(fine < 1e-3 && coarse / fine > 10.0, "{coarse} -> {fine}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    // -n ∫ F^{n-1} |∇F|² dμ; F^{n-1} ≥ 0 needs n odd
    #[test]
    fn dirichlet_term_is_never_positive(seed in 0u64..1000, half in 1u32..5, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let s = curved(seed, 2, 16);
        let config = ricci_lab_core::FlowConfig { a, b, ..ricci_lab_core::FlowConfig::default() };
        let terms = ricci_lab_core::functionals::i_n_expression(&s, &config, 2 * half + 1).unwrap();
        prop_assert!(terms.get("dirichlet").unwrap() <= 0.0);
    }
}
