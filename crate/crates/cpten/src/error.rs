//! Crate-wide error type and result alias.

use std::io;
use thiserror::Error;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by tensor construction, kernels, the ALS driver, and the
/// benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of two arguments disagree (coordinate table vs. values, tensor
    /// vs. model dimensions, matrix products, ...).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A coordinate lies outside the declared mode length.
    #[error("nonzero {nonzero}: index {index} out of range for mode {mode} of length {extent}")]
    CoordinateOutOfRange {
        nonzero: usize,
        mode: usize,
        index: usize,
        extent: usize,
    },

    /// A repeated coordinate was seen while duplicates are configured to be
    /// rejected.
    #[error("duplicate coordinate at nonzero {0}")]
    DuplicateCoordinate(usize),

    /// A text tensor file could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A tensor file contained no nonzero entries.
    #[error("tensor file contains no nonzero entries")]
    EmptyFile,

    /// More distinct nonzeros were requested than the tensor can hold.
    #[error("requested {requested} distinct nonzeros but the tensor holds at most {capacity}")]
    CapacityExceeded { requested: usize, capacity: u128 },

    /// A mode argument does not name a mode of the tensor.
    #[error("mode {mode} out of range for a {ndims}-way tensor")]
    ModeOutOfRange { mode: usize, ndims: usize },

    /// The permutation-traversal kernel was invoked without permutations.
    #[error("the permuted variant requires a precomputed permutation set")]
    MissingPermutations,

    /// Densification would exceed the configured element cap.
    #[error("dense tensor would hold {cells} elements, over the cap of {cap}")]
    DenseCapExceeded { cells: u128, cap: usize },

    /// A rank of zero was requested.
    #[error("rank must be at least 1")]
    ZeroRank,

    /// The normal equations were singular and no regularization was applied.
    #[error("singular normal equations in mode {mode} at iteration {iteration}; consider nonzero regularization")]
    SingularSolve { mode: usize, iteration: usize },

    /// A linear solve failed even after the pivoted fallback.
    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    /// Fit is undefined for a tensor whose Frobenius norm is zero.
    #[error("input tensor has zero Frobenius norm; fit is undefined")]
    ZeroNormTensor,

    /// A configuration value is out of its legal range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A buffer allocation was refused by the allocator.
    #[error("allocation of {bytes} bytes failed")]
    AllocationFailed { bytes: usize },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] io::Error),

    /// Failure while serializing or deserializing a benchmark report.
    #[error("report serialization: {0}")]
    Report(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Report(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Report(e.to_string())
    }
}
