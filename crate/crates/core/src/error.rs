use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants split along the boundary the CLI cares about: `Schema`, `Config`
/// and the I/O wrappers are input problems (exit code 2), `Engine`,
/// `DegenerateCrimeField` and `Metric` are runtime problems (exit code 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A malformed input file. `line` is 1-based; 0 means the whole file.
    #[error("{path}:{line}: {msg}")]
    Schema { path: String, line: u64, msg: String },

    /// Invalid configuration or parameter values.
    #[error("config error: {0}")]
    Config(String),

    /// A simulation that cannot proceed (bad population setup, no walkable
    /// cells for police, inconsistent state).
    #[error("engine error: {0}")]
    Engine(String),

    /// The crime field cannot be normalized: the city-wide mean of predicted
    /// attractiveness is not meaningfully positive.
    #[error("degenerate crime field: mean predicted attractiveness {0:e} is not positive")]
    DegenerateCrimeField(f64),

    /// A metric is undefined on the given inputs (empty selection, zero
    /// totals, constant ranks).
    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn schema(path: impl Into<String>, line: u64, msg: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), line, msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema { .. } | Error::Config(_) | Error::Io { .. } | Error::Json(_) => 2,
            Error::Engine(_) | Error::DegenerateCrimeField(_) | Error::Metric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
