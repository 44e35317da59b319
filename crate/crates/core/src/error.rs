use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two multi-path components fall on the same discrete tap.
    #[error("paths {first} and {second} share tap delay {tap}")]
    DelayCollision {
        first: usize,
        second: usize,
        tap: usize,
    },

    /// The zero-forcing or SCA constraints cannot be met.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// All channels vanish, so no beam direction is defined.
    #[error("degenerate: {0}")]
    Degenerate(String),

    /// The operation needs structure the channel does not have.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Inconsistent scenario or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
}
