use thiserror::Error;

/// Errors raised by the geometry, discretization, flow and I/O layers.
#[derive(Debug, Error)]
pub enum CapflowError {
    /// A point left the upper half-space (x3 <= 0).
    #[error("point leaves hyperbolic space: x3 = {x3:e}")]
    NonpositiveHeight { x3: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// sin(theta) = 0, the contact angle is 0 or pi.
    #[error("degenerate contact angle: sin(theta) = {sin_theta:e}")]
    DegenerateAngle { sin_theta: f64 },

    #[error("ghost ring is stale; apply the capillary boundary condition first")]
    GhostNotApplied,

    /// Blow-up guard: a single step moved log-radius by more than the allowed amount.
    #[error("stability breach: max |u+ - u| = {max_change:e} exceeds {limit}")]
    StabilityBreach { max_change: f64, limit: f64 },

    #[error("cap fit did not reduce the residual within {iterations} iterations")]
    FitDiverged { iterations: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CapflowError>;
