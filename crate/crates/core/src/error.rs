use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    /// The input data violates a dataset invariant.
    #[error("invalid data: {0}")]
    Data(String),

    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid value for `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },

    /// Numerical or structural failure while fitting or estimating.
    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input or configuration rather than a
    /// failure during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Data(_) | Error::InvalidArgument { .. } | Error::Json(_) | Error::Csv(_) => true,
            Error::Io { .. } | Error::Estimation(_) => false,
            Error::Context { source, .. } => source.is_validation(),
        }
    }
}
