use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid probability vector: {0}")]
    InvalidSimplex(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} did not converge after {sweeps} sweeps (span {span:e})")]
    NonConvergence {
        what: &'static str,
        sweeps: usize,
        span: f64,
    },

    #[error("infinite diameter: state {target} is unreachable from state {from}")]
    InfiniteDiameter { from: usize, target: usize },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("f has no root: value vector is constant on the support of p")]
    NoRoot,

    #[error("environment generation failed: {0}")]
    Generation(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
