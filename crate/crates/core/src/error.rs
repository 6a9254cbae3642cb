use thiserror::Error;

pub type Result<T, E = MdlError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdlError {
    /// A parameter vector fell outside the parameter space.
    #[error("parameter {theta:?} is outside the parameter space ({reason})")]
    Domain { theta: Vec<f64>, reason: String },

    #[error("symbol {symbol} is not in the alphabet of size {alphabet}")]
    Alphabet { symbol: usize, alphabet: usize },

    #[error("non-finite value at symbol {symbol}: {what}")]
    Numeric { symbol: usize, what: String },

    /// Fisher information is (numerically) singular.
    #[error("Fisher information is degenerate at {theta:?} (min eigenvalue {min_eigenvalue:e})")]
    Degenerate { theta: Vec<f64>, min_eigenvalue: f64 },

    #[error("optimizer did not converge after {iterations} iterations (best log-likelihood {best_loglik})")]
    Convergence {
        iterations: usize,
        best: Vec<f64>,
        best_loglik: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid construction failed: {0}")]
    Construction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("enumeration of {requested} sequences exceeds the cap of {cap}")]
    Capacity { requested: f64, cap: u64 },

    #[error("corrupt bitstream at byte {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    #[error("{0}")]
    Io(String),
}

impl MdlError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        MdlError::Precondition(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        MdlError::Config(msg.into())
    }
}

impl From<std::io::Error> for MdlError {
    fn from(e: std::io::Error) -> Self {
        MdlError::Io(e.to_string())
    }
}
