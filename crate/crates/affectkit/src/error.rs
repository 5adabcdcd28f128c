use std::path::PathBuf;

/// Errors from file handling, configuration, and the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Structurally invalid input file.
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    /// A value that does not parse, with its 1-based data row or line.
    #[error("{path}: row {row}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        msg: String,
    },
    /// Config keys nobody reads.
    #[error("unknown config key(s): {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] affectkit_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn format_err(path: impl Into<PathBuf>, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.into(),
        msg: msg.into(),
    }
}
