use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum XftError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error("incompatible spectra: {0}")]
    IncompatibleSpectra(String),

    #[error("marginals are not thermal: {0}")]
    Marginal(String),

    #[error("invalid time-reversal symmetry: {0}")]
    InvalidSymmetry(String),

    #[error("operator is not unitary: deviation {0:e}")]
    NonUnitary(f64),

    #[error("could not generate dynamics: {0}")]
    Generation(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("correlation index undefined: {0}")]
    Undefined(String),

    #[error("initial state is not a product of Gibbs states: factorization deviation {0:e}")]
    NotProductState(f64),

    #[error("runs are not comparable: {0}")]
    MismatchedRuns(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, XftError>;
