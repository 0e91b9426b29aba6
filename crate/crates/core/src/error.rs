use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the pipeline.
///
/// [`Error::category`] groups them into the buckets the command line tool
/// turns into exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("data size mismatch: {0}")]
    SizeMismatch(String),
    #[error("non-finite value at pixel {pixel}, band {band}")]
    NonFinite { pixel: usize, band: usize },
    #[error("class id {0} is not declared in the class map")]
    UnknownClass(i32),
    #[error("invalid class pair: {0}")]
    InvalidPair(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular Gram matrix for measurement matrix with seed {seed}")]
    SingularGram { seed: u64 },
    #[error("line search failed at iteration {iteration}: {reason}")]
    LineSearch { iteration: usize, reason: String },
    #[error("invalid configuration:\n{0}")]
    Config(String),
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Data,
    Convergence,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> Category {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => Category::Usage,
            Error::LineSearch { .. } => Category::Convergence,
            _ => Category::Data,
        }
    }
}
