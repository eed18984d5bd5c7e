//! The coupling tensor `S`, the quantity `F`, their time derivatives along
//! the plain flow, and the integrals `I_n = ∫ F^n ∂F/∂t dμ` in direct and
//! integrated-by-parts form.

use std::fmt;

use crate::error::{LabError, Result};
use crate::field::{ScalarField, SymTensorField, TensorField};
use crate::flow::{list_rhs, FVariant, FlowConfig, FlowState};
use crate::metric::{integrate, MetricField};
use crate::tensor_calc::{
    christoffel, covariant_d, gradient, grad_norm2, hessian, inner1, inner2, laplacian_scalar, raise, trace,
    CurvaturePack,
};
use crate::variation::{d_christoffel, VariationPair};

/// `S_ij = Ric_ij - ∇_iΦ ∇_jΦ` and its trace.
#[derive(Debug, Clone)]
pub struct STensorField {
    pub tensor: SymTensorField,
    pub scalar: ScalarField,
}

pub fn s_tensor(state: &FlowState) -> Result<STensorField> {
    let pack = CurvaturePack::new(&state.g)?;
    Ok(s_tensor_with(state, &pack))
}

fn s_tensor_with(state: &FlowState, pack: &CurvaturePack) -> STensorField {
    let dphi = gradient(&state.phi);
    let tensor = SymTensorField::from_fn(*state.g.grid(), |i, j, n| {
        pack.ricci.at(i, j, n) - dphi.at(&[i], n) * dphi.at(&[j], n)
    });
    let scalar = trace(&tensor, &state.g);
    STensorField { tensor, scalar }
}

/// `F` in the configured variant; fails if `u` is at or below the floor.
pub fn f_quantity(state: &FlowState, config: &FlowConfig) -> Result<ScalarField> {
    let pack = CurvaturePack::new(&state.g)?;
    f_quantity_with(state, config, &pack, &s_tensor_with(state, &pack))
}

pub(crate) fn f_quantity_from_pack(
    state: &FlowState,
    config: &FlowConfig,
    pack: &CurvaturePack,
) -> Result<ScalarField> {
    f_quantity_with(state, config, pack, &s_tensor_with(state, pack))
}

fn f_quantity_with(
    state: &FlowState,
    config: &FlowConfig,
    pack: &CurvaturePack,
    s: &STensorField,
) -> Result<ScalarField> {
    state.check_u(config.u_floor)?;
    let (a, b) = (config.a, config.b);
    let lead = match config.f_variant {
        FVariant::Laplacian => -&laplacian_scalar(&state.u, &state.g, &pack.christoffel),
        FVariant::Linear => state.u.clone(),
    };
    let grid = *state.g.grid();
    Ok(ScalarField::from_node_fn(grid, |n| {
        let u = state.u.values()[n];
        lead.values()[n] + a * u * u.ln() + b * s.scalar.values()[n] * u
    }))
}

/// Addends of the stated `∂S/∂t` along the plain flow.
pub fn ds_dt_terms(state: &FlowState) -> Result<Vec<(&'static str, ScalarField)>> {
    let pack = CurvaturePack::new(&state.g)?;
    Ok(ds_dt_terms_with(state, &pack))
}

fn ds_dt_terms_with(state: &FlowState, pack: &CurvaturePack) -> Vec<(&'static str, ScalarField)> {
    let g = &state.g;
    let gamma = &pack.christoffel;
    let hess = hessian(&state.phi, gamma);
    let lap_phi = laplacian_scalar(&state.phi, g, gamma);
    let grad2 = grad_norm2(&state.phi, g);
    let cross = inner1(&gradient(&lap_phi), &gradient(&state.phi), g);
    vec![
        ("laplacian_r", laplacian_scalar(&pack.scalar, g, gamma)),
        ("ricci_norm", inner2(&pack.ricci, &pack.ricci, g) * 2.0),
        ("hessphi_norm", inner2(&hess, &hess, g) * -2.0),
        ("laplacian_phi_squared", lap_phi.powi(2) * 2.0),
        ("gradphi_laplacian", cross * -2.0),
        ("gradphi_quartic", grad2.powi(2) * -4.0),
    ]
}

/// Term the fit offers besides the stated ones: `Ric(∇Φ, ∇Φ)`.
pub fn ds_dt_candidate_terms(state: &FlowState) -> Result<Vec<(&'static str, ScalarField)>> {
    let pack = CurvaturePack::new(&state.g)?;
    let g = &state.g;
    let up = raise(&gradient(&state.phi), 0, g);
    let d = g.dim();
    let ric_phi = ScalarField::from_node_fn(*g.grid(), |n| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += pack.ricci.at(i, j, n) * up.at(&[i], n) * up.at(&[j], n);
            }
        }
        s
    });
    Ok(vec![("ricci_gradphi", ric_phi)])
}

pub fn ds_dt(state: &FlowState) -> Result<ScalarField> {
    Ok(sum(ds_dt_terms(state)?))
}

/// `∂S/∂t` along the plain flow by central differences of `S` at
/// `(g ± ε ∂g/∂t, Φ ± ε ∂Φ/∂t)`, Richardson-extrapolated over two steps.
/// Independent of the stated `∂S/∂t` and of any time stepping.
pub fn s_rate_oracle(state: &FlowState) -> Result<ScalarField> {
    let (dg, dphi) = list_rhs(state)?;
    let scale = state.g.tensor().linf() / dg.linf().max(dphi.linf()).max(f64::MIN_POSITIVE);
    let grid = *state.g.grid();
    let diff = |eps: f64| -> Result<Vec<f64>> {
        let at = |e: f64| -> Result<ScalarField> {
            let g = MetricField::new(state.g.tensor().zip_map(&dg, |a, b| a + e * b))?;
            let phi = state.phi.zip_map(&dphi, |a, b| a + e * b);
            Ok(s_tensor(&FlowState::new(state.t, g, phi, state.u.clone())?)?.scalar)
        };
        let (p, m) = (at(eps)?, at(-eps)?);
        Ok(p.values().iter().zip(m.values()).map(|(a, b)| (a - b) / (2.0 * eps)).collect())
    };
    let r: f64 = 10.0;
    let d1 = diff(1e-3 * scale)?;
    let d2 = diff(1e-4 * scale)?;
    let limit = d1.iter().zip(&d2).map(|(a, b)| b + (b - a) / (r * r - 1.0)).collect();
    ScalarField::new(grid, limit)
}

fn sum(terms: Vec<(&'static str, ScalarField)>) -> ScalarField {
    terms.into_iter().map(|(_, t)| t).reduce(|a, b| a + b).expect("terms")
}

/// Addends of the stated `∂F/∂t` along the plain flow with
/// `∂u/∂t = -F`. `s_rate` replaces the stated `∂S/∂t` when given.
/// The two chart terms `g^{ij} ∂Γ^k_ij ∇_k u` and `-g^{ij} Γ^k_ij ∇_k F` are
/// evaluated in grid coordinates and are not tensorial.
pub fn df_dt_terms(
    state: &FlowState,
    config: &FlowConfig,
    s_rate: Option<&ScalarField>,
) -> Result<Vec<(&'static str, ScalarField)>> {
    if config.f_variant == FVariant::Linear {
        return df_dt_linear_terms(state, config, s_rate);
    }
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let s = s_tensor_with(state, &pack);
    let f = f_quantity_with(state, config, &pack, &s)?;
    let s_dot = match s_rate {
        Some(r) => r.clone(),
        None => sum(ds_dt_terms_with(state, &pack)),
    };
    let hess_u = hessian(&state.u, gamma);
    let s_up = raise(&raise(&s.tensor.to_full(), 0, g), 1, g);
    let s_hess = ScalarField::from_node_fn(grid, |n| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += s_up.at(&[i, j], n) * hess_u.at(i, j, n);
            }
        }
        -2.0 * acc
    });
    let (a, b) = (config.a, config.b);
    let entropy = ScalarField::from_node_fn(grid, |n| {
        -a * f.values()[n] * (state.u.values()[n].ln() + 1.0)
    });
    let s_coupling = ScalarField::from_node_fn(grid, |n| {
        b * (s_dot.values()[n] * state.u.values()[n] - s.scalar.values()[n] * f.values()[n])
    });
    let (dg, _) = list_rhs(state)?;
    let dgamma = d_christoffel(&VariationPair::new(g.clone(), dg)?);
    let du = gradient(&state.u);
    let df = gradient(&f);
    let gamma_variation = ScalarField::from_node_fn(grid, |n| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let gij = g.ginv(i, j, n);
                for k in 0..d {
                    acc += gij * dgamma.at(k, i, j, n) * du.at(&[k], n);
                }
            }
        }
        acc
    });
    let gamma_chart = ScalarField::from_node_fn(grid, |n| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                let gij = g.ginv(i, j, n);
                for k in 0..d {
                    acc -= gij * gamma.at(k, i, j, n) * df.at(&[k], n);
                }
            }
        }
        acc
    });
    Ok(vec![
        ("laplacian_f", laplacian_scalar(&f, g, gamma)),
        ("s_hessian_u", s_hess),
        ("entropy", entropy),
        ("s_coupling", s_coupling),
        ("gamma_variation", gamma_variation),
        ("gamma_chart", gamma_chart),
    ])
}

/// `∂F/∂t` for `F = u + a u log u + B S u` with `∂u/∂t = -F`.
fn df_dt_linear_terms(
    state: &FlowState,
    config: &FlowConfig,
    s_rate: Option<&ScalarField>,
) -> Result<Vec<(&'static str, ScalarField)>> {
    let pack = CurvaturePack::new(&state.g)?;
    let s = s_tensor_with(state, &pack);
    let f = f_quantity_with(state, config, &pack, &s)?;
    let s_dot = match s_rate {
        Some(r) => r.clone(),
        None => sum(ds_dt_terms_with(state, &pack)),
    };
    let grid = *state.g.grid();
    let (a, b) = (config.a, config.b);
    let u = state.u.values();
    Ok(vec![
        ("linear", -&f),
        ("entropy", ScalarField::from_node_fn(grid, |n| -a * f.values()[n] * (u[n].ln() + 1.0))),
        (
            "s_coupling",
            ScalarField::from_node_fn(grid, |n| {
                b * (s_dot.values()[n] * u[n] - s.scalar.values()[n] * f.values()[n])
            }),
        ),
    ])
}

pub fn df_dt(state: &FlowState, config: &FlowConfig) -> Result<ScalarField> {
    Ok(sum(df_dt_terms(state, config, None)?))
}

/// `∫ F^n ∂F/∂t dμ`, with an optional replacement for `∂S/∂t`.
pub fn i_n_direct_with(
    state: &FlowState,
    config: &FlowConfig,
    n: u32,
    s_rate: Option<&ScalarField>,
) -> Result<f64> {
    check_exponent(n)?;
    let f = f_quantity(state, config)?;
    let fd = sum(df_dt_terms(state, config, s_rate)?);
    integrate(&(f.powi(n as i32) * fd), &state.g)
}

pub fn i_n_direct(state: &FlowState, config: &FlowConfig, n: u32) -> Result<f64> {
    i_n_direct_with(state, config, n, None)
}

fn check_exponent(n: u32) -> Result<()> {
    if n == 0 || n > 64 {
        return Err(LabError::Config(format!("exponent n must be in 1..=64, got {n}")));
    }
    Ok(())
}

/// Coefficient of one addend of the `I_n` expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermCoefficient {
    Integer(i64),
    /// `sign * a`.
    A(i8),
    /// `sign * B`.
    B(i8),
}

impl TermCoefficient {
    pub fn value(self, a: f64, b: f64) -> f64 {
        match self {
            TermCoefficient::Integer(k) => k as f64,
            TermCoefficient::A(s) => s as f64 * a,
            TermCoefficient::B(s) => s as f64 * b,
        }
    }
}

impl fmt::Display for TermCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |s: i8| if s < 0 { "-" } else { "+" };
        match *self {
            TermCoefficient::Integer(k) => write!(f, "{k}"),
            TermCoefficient::A(s) => write!(f, "{}a", sign(s)),
            TermCoefficient::B(s) => write!(f, "{}B", sign(s)),
        }
    }
}

/// One row of the term table.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub label: &'static str,
    pub coefficient: TermCoefficient,
    pub integrand: String,
}

/// Labels of the `I_n` expression, in display order.
pub const TERM_LABELS: [&str; 7] = [
    "dirichlet",
    "s_coupling_gradient",
    "s_divergence",
    "entropy",
    "s_potential",
    "ds_coupling",
    "gamma_terms",
];

/// The integrated-by-parts expansion of `I_n` as a table of labelled
/// coefficients and integrands.
pub fn term_table(n: u32) -> Vec<TermSpec> {
    let n_i = n as i64;
    let pw = |k: i64| match k {
        0 => String::new(),
        1 => "F ".to_string(),
        _ => format!("F^{k} "),
    };
    vec![
        TermSpec {
            label: TERM_LABELS[0],
            coefficient: TermCoefficient::Integer(-n_i),
            integrand: format!("{}(grad_i F)(grad^i F)", pw(n_i - 1)),
        },
        TermSpec {
            label: TERM_LABELS[1],
            coefficient: TermCoefficient::Integer(2 * n_i),
            integrand: format!("{}(grad_i F) S^ij grad_j u", pw(n_i - 1)),
        },
        TermSpec {
            label: TERM_LABELS[2],
            coefficient: TermCoefficient::Integer(2),
            integrand: format!("{}(grad_i S^ij) grad_j u", pw(n_i)),
        },
        TermSpec {
            label: TERM_LABELS[3],
            coefficient: TermCoefficient::A(-1),
            integrand: format!("{}(log u + 1)", pw(n_i + 1)),
        },
        TermSpec {
            label: TERM_LABELS[4],
            coefficient: TermCoefficient::B(-1),
            integrand: format!("{}S", pw(n_i + 1)),
        },
        TermSpec {
            label: TERM_LABELS[5],
            coefficient: TermCoefficient::B(1),
            integrand: format!("{}(dS/dt) u", pw(n_i)),
        },
        TermSpec {
            label: TERM_LABELS[6],
            coefficient: TermCoefficient::Integer(1),
            integrand: format!("{}g^ij (dGamma^k_ij/dt grad_k u - Gamma^k_ij grad_k F)", pw(n_i)),
        },
    ]
}

/// Labelled values of the `I_n` expression and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTerms {
    pub terms: Vec<(&'static str, f64)>,
    pub total: f64,
}

impl FunctionalTerms {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|(l, _)| *l == label).map(|(_, v)| *v)
    }
}

/// Quantities shared by the expression and the defect computations.
struct Pieces {
    f: ScalarField,
    s: STensorField,
    s_dot: ScalarField,
    grad_f_sq: ScalarField,
    /// `∇_i F S^ij ∇_j u`
    s_grad_f_grad_u: ScalarField,
    /// `(∇_i S^ij) ∇_j u`
    div_s_grad_u: ScalarField,
    /// `S^ij`
    s_up: TensorField,
    df_terms: Vec<(&'static str, ScalarField)>,
}

fn pieces(state: &FlowState, config: &FlowConfig, s_rate: Option<&ScalarField>) -> Result<Pieces> {
    if config.f_variant == FVariant::Linear {
        return Err(LabError::Unsupported(
            "the integrated-by-parts expansion applies only to F = -Δu + a u log u + B S u".into(),
        ));
    }
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let pack = CurvaturePack::new(g)?;
    let gamma = &pack.christoffel;
    let s = s_tensor_with(state, &pack);
    let f = f_quantity_with(state, config, &pack, &s)?;
    let s_dot = match s_rate {
        Some(r) => r.clone(),
        None => sum(ds_dt_terms_with(state, &pack)),
    };
    let df = gradient(&f);
    let du = gradient(&state.u);
    let grad_f_sq = inner1(&df, &df, g);
    let s_up = raise(&raise(&s.tensor.to_full(), 0, g), 1, g);
    let s_grad_f_grad_u = ScalarField::from_node_fn(grid, |n| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += df.at(&[i], n) * s_up.at(&[i, j], n) * du.at(&[j], n);
            }
        }
        acc
    });
    let ds_up = covariant_d(&s_up, gamma)?; // (k, i, j) = ∇_k S^ij
    let div_s_grad_u = ScalarField::from_node_fn(grid, |n| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += ds_up.at(&[i, i, j], n) * du.at(&[j], n);
            }
        }
        acc
    });
    let df_terms = df_dt_terms(state, config, Some(&s_dot))?;
    Ok(Pieces { f, s, s_dot, grad_f_sq, s_grad_f_grad_u, div_s_grad_u, s_up, df_terms })
}

fn term<'a>(p: &'a Pieces, label: &str) -> &'a ScalarField {
    &p.df_terms.iter().find(|(l, _)| *l == label).expect("known label").1
}

fn expression_from(p: &Pieces, state: &FlowState, config: &FlowConfig, n: u32) -> Result<FunctionalTerms> {
    let g = &state.g;
    let table = term_table(n);
    let ni = n as i32;
    let fp = |k: i32| p.f.powi(k);
    let u = &state.u;
    let log_u1 = u.map(|x| x.ln() + 1.0);
    let gamma_sum = term(p, "gamma_variation") + term(p, "gamma_chart");
    let integrals = [
        integrate(&(fp(ni - 1) * &p.grad_f_sq), g)?,
        integrate(&(fp(ni - 1) * &p.s_grad_f_grad_u), g)?,
        integrate(&(fp(ni) * &p.div_s_grad_u), g)?,
        integrate(&(fp(ni + 1) * &log_u1), g)?,
        integrate(&(fp(ni + 1) * &p.s.scalar), g)?,
        integrate(&(fp(ni) * (&p.s_dot * u)), g)?,
        integrate(&(fp(ni) * gamma_sum), g)?,
    ];
    let terms: Vec<(&'static str, f64)> = table
        .iter()
        .zip(integrals)
        .map(|(spec, v)| (spec.label, spec.coefficient.value(config.a, config.b) * v))
        .collect();
    let mut total = 0.0;
    for (_, v) in &terms {
        total += v;
    }
    Ok(FunctionalTerms { terms, total })
}

/// The expanded form of `I_n`, term by term.
pub fn i_n_expression_with(
    state: &FlowState,
    config: &FlowConfig,
    n: u32,
    s_rate: Option<&ScalarField>,
) -> Result<FunctionalTerms> {
    check_exponent(n)?;
    let p = pieces(state, config, s_rate)?;
    expression_from(&p, state, config, n)
}

pub fn i_n_expression(state: &FlowState, config: &FlowConfig, n: u32) -> Result<FunctionalTerms> {
    i_n_expression_with(state, config, n, None)
}

/// Discrete defects behind the expanded form. The integration by parts
/// itself and the product rule `∇(F^n) = n F^{n-1} ∇F` that follows it
/// are measured separately: on a flat metric the first is exact up to
/// roundoff, the second only to O(h^4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpDefect {
    /// `|∫ F^n ΔF dμ + ∫ ⟨∇(F^n), ∇F⟩ dμ|`
    pub laplacian: f64,
    /// `|∫ F^n S^ij ∇_i∇_j u dμ + ∫ ∇_i(F^n S^ij) ∇_j u dμ|`, times 2.
    pub s_term: f64,
    /// Product-rule defects of both terms.
    pub chain_rule: f64,
    /// Size of the integrals involved, for relative tolerances.
    pub scale: f64,
}

impl IbpDefect {
    /// The integration-by-parts part alone.
    pub fn ibp(&self) -> f64 {
        self.laplacian + self.s_term
    }

    /// Everything separating the direct integral from the expansion.
    pub fn total(&self) -> f64 {
        self.laplacian + self.s_term + self.chain_rule
    }
}

fn defect_from(p: &Pieces, state: &FlowState, n: u32) -> Result<IbpDefect> {
    let g = &state.g;
    let grid = *g.grid();
    let d = g.dim();
    let ni = n as i32;
    let fp = |k: i32| p.f.powi(k);
    let fnn = fp(ni);
    let gamma = christoffel(g);
    let du = gradient(&state.u);

    let lhs_lap = integrate(&(&fnn * term(p, "laplacian_f")), g)?;
    let ibp_lap = -integrate(&inner1(&gradient(&fnn), &gradient(&p.f), g), g)?;
    let chain_lap = -(n as f64) * integrate(&(fp(ni - 1) * &p.grad_f_sq), g)?;

    // V^ij = F^n S^ij and its divergence ∇_i V^ij
    let v = TensorField::from_fn(grid, p.s_up.variance().to_vec(), |idx, node| fnn.values()[node] * p.s_up.at(idx, node));
    let dv = covariant_d(&v, &gamma)?;
    let div_v_du = ScalarField::from_node_fn(grid, |node| {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += dv.at(&[i, i, j], node) * du.at(&[j], node);
            }
        }
        acc
    });
    let lhs_s = integrate(&(&fnn * term(p, "s_hessian_u")), g)?;
    let ibp_s = 2.0 * integrate(&div_v_du, g)?;
    let chain_s = 2.0 * n as f64 * integrate(&(fp(ni - 1) * &p.s_grad_f_grad_u), g)?
        + 2.0 * integrate(&(&fnn * &p.div_s_grad_u), g)?;

    let scale = [lhs_lap, ibp_lap, chain_lap, lhs_s, ibp_s, chain_s].iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(IbpDefect {
        laplacian: (lhs_lap - ibp_lap).abs(),
        s_term: (lhs_s - ibp_s).abs(),
        chain_rule: (ibp_lap - chain_lap).abs() + (ibp_s - chain_s).abs(),
        scale,
    })
}

pub fn ibp_residual(state: &FlowState, config: &FlowConfig, n: u32) -> Result<IbpDefect> {
    check_exponent(n)?;
    let p = pieces(state, config, None)?;
    defect_from(&p, state, n)
}

/// Everything the expression-versus-direct comparison needs, from one
/// evaluation of the shared pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralCheck {
    pub direct: f64,
    pub expression: FunctionalTerms,
    pub defect: IbpDefect,
    /// `d/dt ∫ F^{n+1}/(n+1) dμ - I_n`, the volume-variation part.
    pub volume_gap: f64,
}

pub fn integral_check(
    state: &FlowState,
    config: &FlowConfig,
    n: u32,
    s_rate: Option<&ScalarField>,
) -> Result<IntegralCheck> {
    check_exponent(n)?;
    let p = pieces(state, config, s_rate)?;
    let g = &state.g;
    let fd = p.df_terms.iter().map(|(_, t)| t.clone()).reduce(|a, b| a + b).expect("terms");
    let direct = integrate(&(p.f.powi(n as i32) * fd), g)?;
    let expression = expression_from(&p, state, config, n)?;
    let defect = defect_from(&p, state, n)?;
    // ∂(dμ)/∂t = ½ tr_g(∂g/∂t) dμ = -S dμ along the plain flow
    let volume_gap = integrate(&(p.f.powi(n as i32 + 1) * (&p.s.scalar * (-1.0 / (n as f64 + 1.0)))), g)?;
    Ok(IntegralCheck { direct, expression, defect, volume_gap })
}

/// `∫ dμ`.
pub fn volume(state: &FlowState) -> Result<f64> {
    integrate(&ScalarField::constant(*state.g.grid(), 1.0), &state.g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::metric::MetricField;
    use std::f64::consts::{E, TAU};

    fn const_state(grid: Grid, u: f64) -> FlowState {
        FlowState::new(0.0, MetricField::flat(grid), ScalarField::constant(grid, 0.4), ScalarField::constant(grid, u))
            .unwrap()
    }

    #[test]
    fn term_table_coefficients() {
        let show = |n| term_table(n).iter().map(|t| t.coefficient.to_string()).collect::<Vec<_>>();
        assert_eq!(show(5), ["-5", "10", "2", "-a", "-B", "+B", "1"]);
        assert_eq!(show(7), ["-7", "14", "2", "-a", "-B", "+B", "1"]);
        assert_eq!(term_table(5)[0].integrand, "F^4 (grad_i F)(grad^i F)");
        assert_eq!(term_table(7)[0].integrand, "F^6 (grad_i F)(grad^i F)");
    }

    #[test]
    fn unit_u_gives_b_times_s() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let mut s = const_state(grid, 1.0);
        s.phi = ScalarField::from_fn(grid, |x| 0.1 * x[0].sin());
        let cfg = FlowConfig { a: 0.7, b: 1.3, ..FlowConfig::default() };
        let f = f_quantity(&s, &cfg).unwrap();
        let st = s_tensor(&s).unwrap();
        assert!((&f - &(&st.scalar * 1.3)).linf() < 1e-15);
    }

    #[test]
    fn closed_form_on_constant_state() {
        let grid = Grid::new(2, 16, TAU).unwrap();
        let s = const_state(grid, E);
        let cfg = FlowConfig { a: 1.0, b: 0.0, ..FlowConfig::default() };
        let want = -2.0 * E.powi(6) * TAU * TAU;
        let direct = i_n_direct(&s, &cfg, 5).unwrap();
        let expr = i_n_expression(&s, &cfg, 5).unwrap();
        assert!(((direct - want) / want).abs() < 1e-12);
        assert!(((expr.total - want) / want).abs() < 1e-12);
        assert_eq!(expr.get("dirichlet"), Some(0.0));
        let d = ibp_residual(&s, &cfg, 5).unwrap();
        assert_eq!(d.total(), 0.0);
    }

    #[test]
    fn u_floor_is_enforced() {
        let grid = Grid::new(2, 8, TAU).unwrap();
        let s = const_state(grid, 1e-9);
        assert!(matches!(f_quantity(&s, &FlowConfig::default()), Err(LabError::UBelowFloor { .. })));
    }

    #[test]
    fn linear_variant_has_no_expansion() {
        let grid = Grid::new(2, 8, TAU).unwrap();
        let s = const_state(grid, 2.0);
        let cfg = FlowConfig { f_variant: FVariant::Linear, a: 0.5, ..FlowConfig::default() };
        assert!(matches!(i_n_expression(&s, &cfg, 3), Err(LabError::Unsupported(_))));
        let f = f_quantity(&s, &cfg).unwrap();
        assert!((f.values()[0] - (2.0 + 0.5 * 2.0 * 2.0_f64.ln())).abs() < 1e-15);
        assert!(i_n_direct(&s, &cfg, 3).is_ok());
    }
}
