//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A config file failed to parse or violated its schema.
    #[error("schema error in {path}: {detail}")]
    Schema { path: String, detail: String },

    /// Config parsed but the pieces do not fit together (bad cross
    /// references, infeasible placement targets, out-of-range parameters).
    #[error("setup error: {0}")]
    Setup(String),

    /// Warm-backup planning could not proceed (solver budget exceeded with
    /// the heuristic fallback disabled).
    #[error("capacity planning error: {0}")]
    Planning(String),

    /// A component was driven outside its contract (e.g. a heartbeat from a
    /// server the detector was never told about).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn schema(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            detail: detail.into(),
        }
    }
}
