//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by format, pruning, SpMM and metric operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rows {rows} not divisible by v={v}")]
    NonDivisibleRows { rows: usize, v: usize },
    #[error("cols {cols} not divisible by {divisor}")]
    NonDivisibleCols { cols: usize, divisor: usize },
    #[error("unsupported pattern v={v} n={n} m={m}: requires n=2, m>=4, v>=1")]
    UnsupportedPattern { v: usize, n: usize, m: usize },
    #[error("matrix data length {got} does not match {rows}x{cols}")]
    BadDataLength { rows: usize, cols: usize, got: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    #[error("mask violates V:N:M validity in block ({block_row}, {block_col})")]
    InvalidMask { block_row: usize, block_col: usize },
    #[error("corrupt metadata: {context}")]
    CorruptMetadata { context: String },
    #[error("gradient length {got} does not match estimator width {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fisher estimator has no accumulated samples")]
    NoSamples,
    #[error("saliency submatrix is not positive definite")]
    SingularSubmatrix,
    #[error("fisher shape mismatch: {context}")]
    FisherShapeMismatch { context: String },
    #[error("previous mask leaves too few candidates: {context}")]
    InfeasibleNesting { context: String },
    #[error("invalid decay schedule: {context}")]
    InvalidSchedule { context: String },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
    #[error("illegal tile metadata: {context}")]
    IllegalMetadata { context: String },
    #[error("energy denominator is zero (all-zero matrix)")]
    ZeroDenominator,
    #[error("sparsity {sparsity} not realizable for policy {policy}")]
    UnrealizableSparsity { policy: String, sparsity: f64 },
    #[error("invalid container: {context}")]
    InvalidContainer { context: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
