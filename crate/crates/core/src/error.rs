use thiserror::Error;

use crate::nehari::Branch;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid problem data: {0}")]
    InvalidProblem(String),

    #[error("hypothesis violated: {clause} at {location:?} ({detail})")]
    HypothesisViolation {
        clause: String,
        location: Vec<f64>,
        detail: String,
    },

    #[error("{what} did not converge within {steps} steps")]
    NonConvergence { what: &'static str, steps: usize },

    #[error("interior vertex {vertex} has value {value:e} below floor {floor:e}")]
    BelowFloor { vertex: usize, value: f64, floor: f64 },

    #[error("fiber derivative has no sign change in [{t_min:e}, {t_max:e}]")]
    NoBracket { t_min: f64, t_max: f64 },

    #[error("no {branch} fiber root for this direction")]
    NoProjection { branch: Branch },

    #[error("every lambda in the scan grid fails the two-root test")]
    AllFail,

    #[error("degenerate exponents: {0}")]
    DegenerateExponents(String),

    #[error("no convergence after {iterations} iterations (best energy {best_energy:e})")]
    MaxIters {
        iterations: usize,
        best_energy: f64,
        best: Vec<f64>,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) => "InvalidMesh",
            Error::InvalidField(_) => "InvalidField",
            Error::InvalidProblem(_) => "InvalidProblem",
            Error::HypothesisViolation { .. } => "HypothesisViolation",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::BelowFloor { .. } => "BelowFloor",
            Error::NoBracket { .. } => "NoBracket",
            Error::NoProjection { .. } => "NoProjection",
            Error::AllFail => "AllFail",
            Error::DegenerateExponents(_) => "DegenerateExponents",
            Error::MaxIters { .. } => "MaxIters",
            Error::Config { .. } => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
