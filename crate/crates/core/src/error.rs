use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("negative balance percentage {0}")]
    NegativeAlpha(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("initial solution is infeasible for mode {mode}: {reason}")]
    InfeasibleStart { mode: String, reason: String },

    #[error("no feasible solution exists: {0}")]
    Infeasible(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("model too large: {variables} variables exceed the cap of {cap}")]
    ModelTooLarge { variables: usize, cap: usize },

    #[error("solution import failed: {0}")]
    Import(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<std::path::Path>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.as_ref().display().to_string(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
