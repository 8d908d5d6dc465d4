use thiserror::Error;

/// Errors produced by the forecast, control and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid horizon: target time {target} precedes reveal time {reveal}")]
    InvalidHorizon { target: i64, reveal: i64 },

    #[error("epsilon array does not cover eps_{target}({reveal})")]
    IncompleteArray { target: i64, reveal: i64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("unstable dynamics: spectral radius {0} is not below 1")]
    Unstable(f64),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("discretization: {0}")]
    Discretization(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("malformed kernel: {0}")]
    MalformedKernel(String),

    #[error("simulation diverged: {0}")]
    Divergence(String),

    #[error("unknown {registry} '{name}' (known: {known})")]
    UnknownStrategy { registry: &'static str, name: String, known: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidHorizon { .. } => "invalid_horizon",
            Error::IncompleteArray { .. } => "incomplete_array",
            Error::Shape(_) => "shape",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Unstable(_) => "unstable",
            Error::UndefinedMetric(_) => "undefined_metric",
            Error::Discretization(_) => "discretization",
            Error::SizeGuard(_) => "size_guard",
            Error::MalformedKernel(_) => "malformed_kernel",
            Error::Divergence(_) => "divergence",
            Error::UnknownStrategy { .. } => "unknown_strategy",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
