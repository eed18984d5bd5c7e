use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("stencil underflow: {n} nodes per axis, at least 8 required")]
    StencilUnderflow { n: usize },

    #[error("unsupported dimension {0}, expected 2 or 3")]
    UnsupportedDimension(usize),

    #[error("axis length must be positive and finite, got {0}")]
    InvalidLength(f64),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("metric not positive definite at node {node}: min eigenvalue {min_eigenvalue:e}")]
    NotPositiveDefinite { node: usize, min_eigenvalue: f64 },

    #[error("metric inverse check failed at node {node}: |g g^-1 - I| = {defect:e}")]
    InverseDefect { node: usize, defect: f64 },

    #[error("curvature symmetry residual {residual:e} exceeds {tolerance:e} (under-resolved grid?)")]
    SymmetryResidual { residual: f64, tolerance: f64 },

    #[error("covariant derivative of rank {0} tensors is not supported (max 3)")]
    RankUnsupported(usize),

    #[error("epsilon too large: g + {eps:e} v loses positive definiteness at node {node}")]
    EpsilonTooLarge { eps: f64, node: usize },

    #[error("u fell to {value:e} (floor {floor:e}) at node {node}, t = {time}")]
    UBelowFloor { node: usize, time: f64, value: f64, floor: f64 },

    #[error("metric lost positive definiteness at node {node}, t = {time}")]
    MetricDegenerate { node: usize, time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}
