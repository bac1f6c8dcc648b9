//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by dataset construction, configuration, and the
/// detection pipeline.
#[derive(Debug, Error)]
pub enum McCatchError {
    /// The input could not be parsed or violates a data contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The dataset is structurally valid but cannot be processed
    /// (fewer than two elements, zero diameter, or no inliers left).
    #[error("degenerate dataset: {0}")]
    Degenerate(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, McCatchError>;
