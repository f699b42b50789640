use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The exponent pair falls outside the admissible region of the kernel.
    #[error("exponents not admissible: {0}")]
    NotAdmissible(String),

    /// The truncation growth exponent lies outside its feasibility window.
    #[error("infeasible truncation exponent: {0}")]
    Infeasible(String),

    /// A hypothesis of a study (growth bound, Lipschitz bound) is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("atom at t={t}, x={x:?} lies outside the field grid hull")]
    GuardBand { t: f64, x: Vec<f64> },

    #[error("quadrature did not converge at node t={t}, x={x:?}")]
    Quadrature { t: f64, x: Vec<f64> },

    /// Picard iteration stopped at `max_iter` without reaching the tolerance.
    #[error("Picard iteration did not converge after {} steps (increments {increments:?})", increments.len())]
    NotConverged { increments: Vec<f64>, tol: f64 },

    /// The largest glue level stops before the end of the window.
    #[error("truncation level {level} stops at t={stop}; a larger level is needed to cover t={needed}")]
    InsufficientLevel { level: u32, stop: f64, needed: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
