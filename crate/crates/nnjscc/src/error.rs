use std::io;

/// Errors of the command-line layer, mapped onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] nnjscc_core::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl AppError {
    /// 1 for anything the user can fix in the configuration, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if e.is_user_error() => 1,
            AppError::Config(_) => 1,
            _ => 2,
        }
    }
}

impl From<toml::de::Error> for AppError {
    fn from(e: toml::de::Error) -> Self {
        AppError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            AppError::Io(e.into())
        } else {
            AppError::Config(e.to_string())
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
