use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An observation is incompatible with the family it claims to come from.
    #[error("data error: {0}")]
    Data(String),

    /// A structurally invalid input (empty sample vector, zero count, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A matrix or parameter configuration that makes the computation singular.
    #[error("singularity error: {0}")]
    Singular(String),

    /// Posterior moments requested where they do not exist.
    #[error("moment undefined: {0}")]
    MomentUndefined(String),

    /// Experiment configuration rejected during validation.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
