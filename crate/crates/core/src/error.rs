use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: manifest parse error: {source}")]
    ManifestParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("manifest field `{field}`: {message}")]
    Manifest { field: String, message: String },

    #[error("{path}:{line}: {message}")]
    LogitRow { path: PathBuf, line: u64, message: String },

    #[error("{path}: {message}")]
    LogitFile { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no correctly classified clean samples; cannot calibrate")]
    EmptyCalibration,

    #[error("{0}")]
    EmptyInput(&'static str),

    #[error("mixed known/unknown outcomes in one confusion count")]
    MixedOutcomes,

    #[error("incompatible reports: {0}")]
    ReportMismatch(String),

    #[error("report parse error: {0}")]
    ReportParse(String),

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn manifest(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Manifest {
            field: field.into(),
            message: message.into(),
        }
    }
}
