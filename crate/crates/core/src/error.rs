use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GeoError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("grid mismatch: {left:?} vs {right:?}")]
    GridMismatch { left: [usize; 3], right: [usize; 3] },

    #[error("mask has no boundary (it is all foreground or all background)")]
    NoBoundary,

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("corrupt volume file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("invalid loss spec: {0}")]
    InvalidSpec(String),

    #[error("operator metadata mismatch: {0}")]
    MetadataMismatch(String),

    #[error("non-finite value in {context} at voxel {voxel}")]
    NonFinite { context: String, voxel: usize },

    #[error("non-finite loss at step {step} in term `{term}` (worst voxel {voxel})")]
    Diverged { step: usize, term: String, voxel: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GeoError {
    /// Stable snake_case name of the variant, for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            GeoError::InvalidGrid(_) => "invalid_grid",
            GeoError::Parameter(_) => "parameter",
            GeoError::GridMismatch { .. } => "grid_mismatch",
            GeoError::NoBoundary => "no_boundary",
            GeoError::InvariantViolation(_) => "invariant_violation",
            GeoError::Corrupt { .. } => "corrupt",
            GeoError::InvalidSpec(_) => "invalid_spec",
            GeoError::MetadataMismatch(_) => "metadata_mismatch",
            GeoError::NonFinite { .. } => "non_finite",
            GeoError::Diverged { .. } => "diverged",
            GeoError::Io(_) => "io",
            GeoError::Json(_) => "json",
        }
    }
}
