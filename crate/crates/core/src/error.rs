use thiserror::Error;

/// Errors raised by the estimators, environments and learners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A scalar or structural parameter lies outside its admissible domain.
    #[error("parameter out of domain: {0}")]
    Domain(String),
    /// A vector or table has the wrong length.
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A factorization failed; only reachable through corrupted state.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            got,
        })
    }
}
