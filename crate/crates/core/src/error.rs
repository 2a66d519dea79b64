use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("singular Gram matrix (condition estimate {cond:.3e})")]
    SingularGram { cond: f64 },
    #[error("SVD did not converge on a {rows}x{cols} matrix (max |entry| {max_abs:.3e})")]
    SvdFailed { rows: usize, cols: usize, max_abs: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
    #[error("{path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
