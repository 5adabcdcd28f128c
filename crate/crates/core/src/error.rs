use alloc::boxed::Box;
use alloc::string::String;

use crate::origami::CreasePattern;

/// Errors raised by the core algorithms.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// Input data does not satisfy a structural invariant.
    #[error("format error: {0}")]
    Format(String),
    /// A required EEG channel is absent.
    #[error("missing channel `{0}`")]
    MissingChannel(String),
    /// Numerically degenerate input (constant series, collinear template, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Lengths or dimensions that must agree do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// The shrinking simulation exceeded its tick budget. Carries the
    /// pattern built so far for diagnosis.
    #[error("shrinking did not terminate within {max_ticks} ticks")]
    NonTermination {
        max_ticks: u64,
        partial: Box<CreasePattern>,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
