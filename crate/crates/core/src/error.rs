use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("state norm collapsed: {0}")]
    Collapse(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// True for errors caused by floating point breakdown rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateState(_) | Error::Collapse(_) | Error::Numeric(_) | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
