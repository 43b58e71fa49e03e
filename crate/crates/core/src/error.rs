use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, EcoError>;

/// Every failure the library reports. Each variant maps to a stable
/// machine-readable code (see [`EcoError::code`]) used by the binary.
#[derive(Debug, Error)]
pub enum EcoError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid label {0}: labels must be -1 or +1")]
    InvalidLabel(f64),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("no steady state after {steps} steps (residual {residual:e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error(
        "multiplier {index} grew past {cap:e}; the data look non-separable in this kernel, use a slack bound"
    )]
    Unbounded { index: usize, cap: f64 },

    #[error("no active support vector: every multiplier is saturated at 0 or C")]
    NoActiveSupport,

    #[error("batch of {n} points exceeds the configured limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("{}: bad magic number {found:#010x}, expected {expected:#010x}", path.display())]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("{}: truncated file ({detail})", path.display())]
    Truncated { path: PathBuf, detail: String },

    #[error("IDX count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("{}:{line}: {message}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl EcoError {
    pub fn code(&self) -> &'static str {
        match self {
            EcoError::DimensionMismatch { .. } => "E_DIMENSION",
            EcoError::Empty(_) => "E_EMPTY",
            EcoError::InvalidKernel(_) => "E_KERNEL",
            EcoError::InvalidLabel(_) => "E_LABEL",
            EcoError::Degenerate(_) => "E_DEGENERATE",
            EcoError::InvalidState(_) => "E_STATE",
            EcoError::NotConverged { .. } => "E_NOT_CONVERGED",
            EcoError::Unbounded { .. } => "E_UNBOUNDED",
            EcoError::NoActiveSupport => "E_NO_ACTIVE_SV",
            EcoError::TooLarge { .. } => "E_TOO_LARGE",
            EcoError::BadMagic { .. } => "E_IDX_MAGIC",
            EcoError::Truncated { .. } => "E_IDX_TRUNCATED",
            EcoError::CountMismatch { .. } => "E_IDX_COUNT",
            EcoError::Csv { .. } => "E_CSV",
            EcoError::Config(_) => "E_CONFIG",
            EcoError::Io(_) => "E_IO",
            EcoError::Json(_) => "E_JSON",
        }
    }

    /// Process exit status: 2 for configuration, 3 for data, 4 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            EcoError::Config(_) | EcoError::InvalidKernel(_) => 2,
            EcoError::DimensionMismatch { .. }
            | EcoError::Empty(_)
            | EcoError::InvalidLabel(_)
            | EcoError::BadMagic { .. }
            | EcoError::Truncated { .. }
            | EcoError::CountMismatch { .. }
            | EcoError::Csv { .. }
            | EcoError::Io(_)
            | EcoError::Json(_) => 3,
            EcoError::Degenerate(_)
            | EcoError::InvalidState(_)
            | EcoError::NotConverged { .. }
            | EcoError::Unbounded { .. }
            | EcoError::NoActiveSupport
            | EcoError::TooLarge { .. } => 4,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(EcoError::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_labels(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&t| t != 1.0 && t != -1.0) {
        Some(&bad) => Err(EcoError::InvalidLabel(bad)),
        None => Ok(()),
    }
}
