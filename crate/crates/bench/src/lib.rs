//! Shared fixtures for the benchmarks.

use std::f64::consts::TAU;

use ricci_lab_core::{Chart, FlowState, Grid, InitialData, Preset};

/// A smooth curved state on an `n × n` torus.
pub fn curved_state(n: usize) -> FlowState {
    let preset = Preset::RandomSmooth { seed: 1, cutoff: 2, amp: 0.1, phi_amp: 0.3, u_amp: 0.2 };
    let data = InitialData::new(&preset, 2).expect("valid preset");
    data.state(Grid::new(2, n, TAU).expect("valid grid"), Chart::Identity).expect("valid state")
}
