use alloc::string::String;

/// Errors raised by the core library.
///
/// The variants follow the failure classes the command line maps to exit
/// codes: configuration and domain problems are the caller's fault (exit 1),
/// numerical and resource failures are not (exit 2).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("resource error: {0}")]
    Resource(String),
}

impl Error {
    /// True for errors caused by invalid input rather than by the computation.
    pub fn is_user_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Domain(_) | Error::Usage(_))
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
