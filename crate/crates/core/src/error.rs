//! Error type shared by every module.

use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("box contains no grid points: {0}")]
    EmptyBox(String),

    #[error("singular Gram matrix (min eigenvalue {min_eigenvalue:.3e}); clustered frequency pairs: {pairs:?}")]
    SingularGram {
        min_eigenvalue: f64,
        pairs: Vec<(usize, usize)>,
    },

    #[error("no convergence after {iterations} iterations (best objective {best_objective:.6e})")]
    NotConverged {
        iterations: usize,
        best_objective: f64,
        history: Vec<f64>,
        best_coefficients: Vec<num_complex::Complex64>,
    },

    #[error("cardinality cap {cap} exceeded ({count} candidates)")]
    CapExceeded { cap: usize, count: usize },

    #[error("operator has no lattice symbol; use the power method")]
    NotSpectral,

    #[error("kernel wraparound: L*2^j = {value:.3} is below {floor}; need side length L >= {required_side:.3}")]
    Wraparound {
        value: f64,
        floor: f64,
        required_side: f64,
    },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("in {context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps the error with a description of where it happened.
    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
