use thiserror::Error;

/// Errors produced anywhere in the engine.
///
/// Variants are grouped by the exit-code class the CLI maps them to:
/// configuration problems, data problems and pipeline/capability problems.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("lookup error: unknown row id {0:?}")]
    Lookup(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("pipeline error in transformer {transformer}: missing column {column:?}")]
    MissingColumn { transformer: String, column: String },

    #[error("transform error in {transformer}: {message}")]
    Transform { transformer: String, message: String },

    #[error("capability error: {0}")]
    Capability(String),

    #[error("pipeline validation failed: {0}")]
    Validation(String),

    #[error("equivalence check failed: {0}")]
    Equivalence(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn transform(transformer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Transform {
            transformer: transformer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn missing_column(transformer: impl Into<String>, column: impl Into<String>) -> Self {
        Error::MissingColumn {
            transformer: transformer.into(),
            column: column.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
