use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("no valid samples: {0}")]
    EmptyTable(String),

    #[error("feature `{feature}` has zero variance")]
    ZeroVariance { feature: String },

    #[error("singular design matrix: column `{column}` is linearly dependent on earlier columns")]
    SingularDesign { column: String },

    #[error("model document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
