use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the CLI exit-code contract: `Input`, `Config`,
/// `Parse` and `Contract` are validation failures (exit 2), everything
/// else is a runtime failure (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    /// A value passed to an operation violates its precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A configuration value violates a model invariant.
    #[error("configuration error: {0}")]
    Config(String),

    /// A file could not be parsed; the message names the offending location.
    #[error("parse error: {0}")]
    Parse(String),

    /// An inter-module contract was violated (e.g. an unsorted stream).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Not enough data to compute the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A parameter estimate could not be formed from the given members.
    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad inputs or configuration rather than
    /// by the environment.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Input(_)
                | Error::Config(_)
                | Error::Parse(_)
                | Error::Contract(_)
                | Error::InsufficientData(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
