use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "sequences live on different grids (h={h_left}, N={n_left} vs h={h_right}, N={n_right})"
    )]
    GridMismatch {
        h_left: f64,
        n_left: usize,
        h_right: f64,
        n_right: usize,
    },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("blow-up: sup-norm {norm:e} exceeds threshold {threshold:e}")]
    BlowUp { norm: f64, threshold: f64 },

    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("convergence rate undefined: zero error at h = {h}")]
    DegenerateRate { h: f64 },

    #[error("invalid study: {0}")]
    InvalidStudy(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
