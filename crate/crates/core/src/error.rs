use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter region: {0}")]
    InvalidRegion(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("trace is empty")]
    EmptyTrace,

    #[error("unknown functional `{0}`")]
    UnknownFunctional(String),

    #[error("unknown prior family `{0}`")]
    UnknownFamily(String),

    #[error("need at least {needed} complete tours, found {found}")]
    TooFewTours { needed: usize, found: usize },

    #[error("regenerations are not available for kernel `{0}`")]
    NoRegeneration(String),

    #[error("matrix is singular (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("trace format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
