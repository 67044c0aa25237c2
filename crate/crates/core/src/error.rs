use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Arguments outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A dense structure would exceed the configured size cap.
    #[error("capacity exceeded: {needed} interior sites requested, cap is {cap}")]
    Capacity { needed: usize, cap: usize },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
