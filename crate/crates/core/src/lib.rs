//! Numerical laboratory for the Ricci flow coupled to a scalar heat flow on
//! periodic charts.
//!
//! The crate provides grid fields and fourth-order stencils, curvature
//! operators, first-variation formulas with finite-difference oracles, an
//! explicit RK4 integrator for the plain and DeTurck-gauged flows, and the
//! integral functionals built on top of them.

pub mod convergence;
pub mod error;
pub mod field;
pub mod flow;
pub mod functionals;
pub mod grid;
pub mod init;
pub mod metric;
pub mod tensor_calc;
pub mod variation;

pub use error::{LabError, Result};
pub use flow::{FVariant, FlowConfig, FlowState, Gauge};
pub use functionals::{FunctionalTerms, STensorField};
pub use field::{OneFormField, ScalarField, SymTensorField, TensorField, Variance, VectorField};
pub use grid::Grid;
pub use init::{Chart, InitialData, Preset};
pub use metric::{integrate, MetricField};
pub use tensor_calc::{ChristoffelField, CurvaturePack, Riemann4Field};
pub use variation::{QuantityTag, VariationPair};
