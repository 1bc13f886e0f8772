use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("target is at or beyond the cut locus (distance {distance}, limit {limit})")]
    AntipodalPoint { distance: f64, limit: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("vector field is not tangent at vertex {vertex} (normal component {normal_component:e})")]
    NonTangent { vertex: usize, normal_component: f64 },

    #[error("eigensolver stalled after {iterations} iterations (best residual {best_residual:e})")]
    SolverStall { iterations: usize, best_residual: f64 },

    #[error("function vanishes after removing its weighted mean")]
    ZeroFunction,

    #[error("linear system is singular or the solver diverged: {0}")]
    SingularSystem(String),

    #[error("mesh is missing boundary labels: {0}")]
    MissingLabels(String),

    #[error("hypothesis failed at vertex {vertex}: {reason}")]
    HypothesisFailed { vertex: usize, reason: String },

    #[error("cone opening angle {angle} exceeds pi; the cone is not convex")]
    NonConvexCone { angle: f64 },

    #[error("weighted mean curvature is not constant (relative spread {spread:e})")]
    NotCmc { spread: f64 },

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("submanifold leaves the admissible geodesic ball (r = {radius}, limit {limit})")]
    OutOfBall { radius: f64, limit: f64 },

    #[error("curvature sign not supported by this bound: delta = {delta}")]
    WrongCurvatureSign { delta: f64 },

    #[error("not near equality (relative gap {relative_gap:e}, tolerance {tolerance:e})")]
    NotNearEquality { relative_gap: f64, tolerance: f64 },

    #[error("no root in the admissible bracket: {0}")]
    NoRoot(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
