use thiserror::Error;

/// Errors raised by grids, functionals, solvers and integrators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected} values, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("fields live on incompatible grids ({0})")]
    GridMismatch(&'static str),

    #[error("{what}: value {value:e} outside the domain at cell (r={r}, v={v})")]
    Domain {
        what: String,
        r: usize,
        v: usize,
        value: f64,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        /// Best iterate reached, flattened in grid order.
        best_iterate: Vec<f64>,
        residual_history: Vec<f64>,
    },

    #[error("line search in {solver} hit the step floor {step:e}")]
    StepFloor { solver: &'static str, step: f64 },

    #[error("singular stationarity system (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("time step {dt:e} exceeds the stability bound {dt_max:e}")]
    Stability { dt: f64, dt_max: f64 },

    #[error("non-finite state at t = {time} (step {step})")]
    NonFinite {
        time: f64,
        step: usize,
        /// Last state that was entirely finite, flattened in grid order.
        last_good: Vec<f64>,
    },

    #[error("construction of `{name}` failed: {reason}")]
    Construction { name: String, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
