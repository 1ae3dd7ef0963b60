use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum CmcError {
    #[error("invalid Delaunay parameter {0}: must be finite, nonzero and at most 1")]
    InvalidTau(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("cross-check failed for {what}: {primary:e} vs {check:e}")]
    CrossCheck {
        what: String,
        primary: f64,
        check: f64,
    },
    #[error("s = {s} outside the sampled window [{lo}, {hi}]")]
    OutOfWindow { s: f64, lo: f64, hi: f64 },
    #[error("immersion lost at node (i = {i}, j = {j})")]
    ImmersionLost { i: usize, j: usize },
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("grid too coarse: {0}")]
    CoarseGrid(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("no sign change on [{a}, {b}]")]
    NoBracket { a: f64, b: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CmcError {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            CmcError::InvalidTau(_) => "invalid_tau",
            CmcError::InvalidArgument(_) => "invalid_argument",
            CmcError::Degenerate(_) => "degenerate",
            CmcError::CrossCheck { .. } => "cross_check",
            CmcError::OutOfWindow { .. } => "out_of_window",
            CmcError::ImmersionLost { .. } => "immersion_lost",
            CmcError::Integration(_) => "integration",
            CmcError::CoarseGrid(_) => "coarse_grid",
            CmcError::ModelMismatch(_) => "model_mismatch",
            CmcError::NoBracket { .. } => "no_bracket",
            CmcError::Io(_) => "io",
            CmcError::Json(_) => "json",
            CmcError::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, CmcError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CmcError {
    CmcError::InvalidArgument(msg.into())
}
