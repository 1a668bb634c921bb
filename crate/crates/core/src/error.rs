use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole of the gamma function at {0}")]
    Pole(f64),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("precision check failed: {0}")]
    Precision(String),
    #[error("root not bracketed on [{lo}, {hi}]: {what}")]
    NoBracket { what: String, lo: f64, hi: f64 },
    #[error("step size underflow at t = {0}")]
    StepUnderflow(f64),
    #[error("singular point: {0}")]
    Singular(String),
    #[error("symmetry violation: {0}")]
    Symmetry(String),
    #[error("numerically singular matrix (pivot {0:e})")]
    SingularMatrix(f64),
    #[error("no convergence after {iters} iterations; residuals {trace:?}")]
    NoConvergence { iters: usize, trace: Vec<f64> },
    #[error("parameters left the admissible ball: {0}")]
    OutOfBall(String),
    #[error("mode truncation: {0}")]
    Truncation(String),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
