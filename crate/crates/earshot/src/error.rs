//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, feature extraction, training, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Scene geometry or physical parameters are invalid (positions outside
    /// the room, non-positive dimensions, out-of-range coefficients, ...).
    #[error("invalid scene: {0}")]
    InvalidScene(String),

    /// A configuration value is missing, malformed, or out of range.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Two objects that must agree in shape or sample rate do not.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Input data contains NaN or infinity where finite values are required.
    #[error("non-finite data: {0}")]
    NonFinite(String),

    /// An estimator cannot produce a trustworthy result from the given input
    /// (e.g. a decay curve with too little usable range).
    #[error("estimation unreliable: {0}")]
    Unreliable(String),

    /// Model fitting failed (degenerate inputs, too few samples, ...).
    #[error("training failed: {0}")]
    Training(String),

    /// A file has the wrong magic number, version, or internal structure.
    #[error("bad file format: {0}")]
    Format(String),

    /// A named resource (material, preset, direction) was not found.
    #[error("not found: {0}")]
    NotFound(String),

    /// Refusing to overwrite existing output without --force.
    #[error("output exists: {0} (pass --force to overwrite)")]
    OutputExists(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("WAV error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
