//! Analytic initial data. Every preset is a set of closed-form functions of
//! the chart coordinates, so the same data can be sampled on any grid and
//! pulled back through a chart change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::field::{ScalarField, SymTensorField};
use crate::flow::FlowState;
use crate::grid::Grid;
use crate::metric::MetricField;

/// Real trigonometric series `Σ c_k cos(k·x) + s_k sin(k·x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Fourier {
    modes: Vec<([f64; 3], f64, f64)>,
}

impl Fourier {
    pub fn zero() -> Self {
        Self { modes: Vec::new() }
    }

    /// Random modes with integer wave numbers `|k_a| <= cutoff`, weights
    /// decaying like `1 / (1 + |k|^2)`, rescaled so the series is bounded
    /// by `amp` in absolute value.
    pub fn random(rng: &mut ChaCha8Rng, dim: usize, cutoff: usize, amp: f64) -> Self {
        let c = cutoff as i64;
        let mut modes = Vec::new();
        let range: Vec<i64> = (-c..=c).collect();
        let zs: &[i64] = if dim == 3 { &range } else { &[0] };
        for &kx in &range {
            for &ky in &range {
                for &kz in zs {
                    // keep one of each ±k pair; the constant mode is skipped
                    let key = (kx, ky, kz);
                    if key <= (0, 0, 0) {
                        continue;
                    }
                    let k2 = (kx * kx + ky * ky + kz * kz) as f64;
                    let w = 1.0 / (1.0 + k2);
                    let a = w * rng.gen_range(-1.0..1.0);
                    let b = w * rng.gen_range(-1.0..1.0);
                    modes.push(([kx as f64, ky as f64, kz as f64], a, b));
                }
            }
        }
        let bound: f64 = modes.iter().map(|(_, a, b)| a.abs() + b.abs()).sum();
        if bound > 0.0 {
            for m in &mut modes {
                m.1 *= amp / bound;
                m.2 *= amp / bound;
            }
        }
        Self { modes }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let mut s = 0.0;
        for (k, a, b) in &self.modes {
            let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            s += a * ph.cos() + b * ph.sin();
        }
        s
    }

    /// Gradient of the series.
    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (k, a, b) in &self.modes {
            let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let d = -a * ph.sin() + b * ph.cos();
            for i in 0..3 {
                g[i] += d * k[i];
            }
        }
        g
    }
}

/// Named initial-data recipes.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Flat metric, constant `Φ` and `u`.
    FlatConst { phi: f64, u: f64 },
    /// `g = e^{2φ} δ` with `φ = amp Π sin(freq x_a)` over the first two axes,
    /// `Φ = phi_amp sin y`, `u = 1 + u_amp cos(x + y)`.
    ConformalBump { amp: f64, freq: f64, phi_amp: f64, u_amp: f64 },
    /// `g = δ + h` with a random symmetric trigonometric perturbation `h`,
    /// random `Φ` and `u = 1 + (random)`.
    RandomSmooth { seed: u64, cutoff: usize, amp: f64, phi_amp: f64, u_amp: f64 },
}

/// Coordinate change `x = ψ(x')` used to pull data back to a new chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    Identity,
    /// `x = x' + alpha sin y'`, `y = y'`; area preserving.
    Shear { alpha: f64 },
}

impl Chart {
    fn map(self, x: [f64; 3]) -> [f64; 3] {
        match self {
            Chart::Identity => x,
            Chart::Shear { alpha } => [x[0] + alpha * x[1].sin(), x[1], x[2]],
        }
    }

    /// `J[i][a] = ∂x^i / ∂x'^a`.
    fn jacobian(self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut j = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if let Chart::Shear { alpha } = self {
            j[0][1] = alpha * x[1].cos();
        }
        j
    }
}

/// Closed-form fields of a preset.
#[derive(Debug, Clone)]
pub struct InitialData {
    dim: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Flat { phi: f64, u: f64 },
    Conformal { amp: f64, freq: f64, phi_amp: f64, u_amp: f64 },
    Random { metric: Vec<Fourier>, phi: Fourier, u: Fourier },
}

impl InitialData {
    pub fn new(preset: &Preset, dim: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(LabError::UnsupportedDimension(dim));
        }
        let kind = match *preset {
            Preset::FlatConst { phi, u } => Kind::Flat { phi, u },
            Preset::ConformalBump { amp, freq, phi_amp, u_amp } => {
                if !(u_amp.abs() < 1.0) {
                    return Err(LabError::Config("conformal-bump needs |u_amp| < 1".into()));
                }
                Kind::Conformal { amp, freq, phi_amp, u_amp }
            }
            Preset::RandomSmooth { seed, cutoff, amp, phi_amp, u_amp } => {
                if !(amp >= 0.0 && amp * (dim as f64) < 0.9) {
                    return Err(LabError::Config(format!("random-smooth amplitude {amp} too large for dimension {dim}")));
                }
                if !(u_amp.abs() < 1.0) {
                    return Err(LabError::Config("random-smooth needs |u_amp| < 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let metric = (0..dim * (dim + 1) / 2).map(|_| Fourier::random(&mut rng, dim, cutoff, amp)).collect();
                let phi = Fourier::random(&mut rng, dim, cutoff, phi_amp);
                let u = Fourier::random(&mut rng, dim, cutoff, u_amp);
                Kind::Random { metric, phi, u }
            }
        };
        Ok(Self { dim, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self, i: usize, j: usize, x: [f64; 3]) -> f64 {
        let delta = if i == j { 1.0 } else { 0.0 };
        match &self.kind {
            Kind::Flat { .. } => delta,
            Kind::Conformal { .. } => delta * (2.0 * self.conformal_factor(x)).exp(),
            Kind::Random { metric, .. } => {
                let d = self.dim;
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                delta + metric[a * (2 * d + 1 - a) / 2 + (b - a)].eval(x)
            }
        }
    }

    /// `φ` of the conformal preset; zero otherwise.
    pub fn conformal_factor(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            Kind::Conformal { amp, freq, .. } => amp * (freq * x[0]).sin() * (freq * x[1]).sin(),
            _ => 0.0,
        }
    }

    /// Flat Laplacian of [`Self::conformal_factor`].
    pub fn conformal_factor_laplacian(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            Kind::Conformal { freq, .. } => -2.0 * freq * freq * self.conformal_factor(x),
            _ => 0.0,
        }
    }

    pub fn phi(&self, x: [f64; 3]) -> f64 {
        match &self.kind {
            Kind::Flat { phi, .. } => *phi,
            Kind::Conformal { phi_amp, .. } => phi_amp * x[1].sin(),
            Kind::Random { phi, .. } => phi.eval(x),
        }
    }

    pub fn u(&self, x: [f64; 3]) -> f64 {
        match &self.kind {
            Kind::Flat { u, .. } => *u,
            Kind::Conformal { u_amp, .. } => 1.0 + u_amp * (x[0] + x[1]).cos(),
            Kind::Random { u, .. } => 1.0 + u.eval(x),
        }
    }

    /// The data sampled on `grid` in the chart `chart`, as a state at `t = 0`.
    pub fn state(&self, grid: Grid, chart: Chart) -> Result<FlowState> {
        if grid.dim() != self.dim {
            return Err(LabError::GridMismatch);
        }
        let d = self.dim;
        let g = SymTensorField::from_coord_fn(grid, |a, b, xp| {
            let x = chart.map(xp);
            let j = chart.jacobian(xp);
            let mut s = 0.0;
            for i in 0..d {
                for k in 0..d {
                    s += j[i][a] * j[k][b] * self.metric(i, k, x);
                }
            }
            s
        });
        let g = MetricField::new(g)?;
        let phi = ScalarField::new(grid, grid.sample(|xp| self.phi(chart.map(xp))))?;
        let u = ScalarField::new(grid, grid.sample(|xp| self.u(chart.map(xp))))?;
        FlowState::new(0.0, g, phi, u)
    }
}

/// Random symmetric direction field with entries bounded by `amp`.
pub fn random_direction(grid: Grid, seed: u64, cutoff: usize, amp: f64) -> SymTensorField {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series: Vec<Fourier> = (0..d * (d + 1) / 2).map(|_| Fourier::random(&mut rng, d, cutoff, amp)).collect();
    SymTensorField::from_coord_fn(grid, |i, j, x| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        series[a * (2 * d + 1 - a) / 2 + (b - a)].eval(x)
    })
}

/// Random scalar field bounded by `amp`.
pub fn random_scalar(grid: Grid, seed: u64, cutoff: usize, amp: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Fourier::random(&mut rng, grid.dim(), cutoff, amp);
    ScalarField::from_fn(grid, |x| f.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn random_series_respects_bound_and_seed() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        let a = Fourier::random(&mut r1, 2, 2, 0.1);
        let b = Fourier::random(&mut r2, 2, 2, 0.1);
        assert_eq!(a, b);
        let grid = Grid::new(2, 16, TAU).unwrap();
        for node in 0..grid.nodes() {
            assert!(a.eval(grid.coords(node)).abs() <= 0.1 + 1e-15);
        }
    }

    #[test]
    fn fourier_gradient_matches_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Fourier::random(&mut rng, 3, 2, 1.0);
        let x = [0.3, 1.1, 2.0];
        let g = f.grad(x);
        let h = 1e-6;
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += h;
            xm[a] -= h;
            assert!(((f.eval(xp) - f.eval(xm)) / (2.0 * h) - g[a]).abs() < 1e-8);
        }
    }

    #[test]
    fn presets_build_valid_states() {
        let presets = [
            Preset::FlatConst { phi: 0.3, u: 1.0 },
            Preset::ConformalBump { amp: 0.1, freq: 1.0, phi_amp: 0.1, u_amp: 0.2 },
            Preset::RandomSmooth { seed: 7, cutoff: 2, amp: 0.05, phi_amp: 0.1, u_amp: 0.2 },
        ];
        for p in &presets {
            for d in 2..=3 {
                let data = InitialData::new(p, d).unwrap();
                let s = data.state(Grid::new(d, 8, TAU).unwrap(), Chart::Identity).unwrap();
                assert!(s.u.min() > 0.0);
            }
        }
    }

    #[test]
    fn shear_pullback_preserves_volume_element() {
        let data = InitialData::new(&Preset::FlatConst { phi: 0.0, u: 1.0 }, 2).unwrap();
        let s = data.state(Grid::new(2, 16, TAU).unwrap(), Chart::Shear { alpha: 0.3 }).unwrap();
        assert!(s.g.sqrt_det().values().iter().all(|&x| (x - 1.0).abs() < 1e-14));
        assert!(s.g.tensor().comp(0, 1).iter().any(|&x| x.abs() > 0.1));
    }
}
