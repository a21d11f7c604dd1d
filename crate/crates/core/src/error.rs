use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid detector configuration: {0}")]
    Config(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("matrix is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
