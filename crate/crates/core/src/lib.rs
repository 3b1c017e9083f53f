//! Reference toolkit for the V:N:M structured-sparse format.
//!
//! The V:N:M pattern partitions a matrix into V x M blocks, selects 4
//! columns per block (vector-wise), then keeps N values per row inside the
//! selected columns, so arbitrary N:M ratios execute as the hardware's
//! native 2:4 pattern. This crate covers the full desk-scale pipeline:
//!
//! * [`prune`] - magnitude and second-order (empirical-Fisher) mask
//!   generation, baselines, and the structure-decay scheduler;
//! * [`format`](compress) - lossless conversion between masked dense
//!   matrices and the compressed three-structure layout;
//! * [`spmm`] - a reference SpMM that runs directly on the compressed
//!   operand, a tile-level model of the sparse MMA instruction, and an
//!   analytical cost model;
//! * [`energy`] - the kept-mass metric comparing selection policies;
//! * [`io`] - the `DMX1`, `VNM1` and `MSK1` binary containers.
//!
//! Everything is a pure function of its inputs with lower-index-wins tie
//! breaking, so outputs are byte-identical across runs and across the
//! `parallel` feature (rayon) and its sequential fallback.

mod config;
mod dense;
mod error;
pub(crate) mod exec;
mod format;
mod mask;

pub mod cost;
pub mod energy;
pub mod io;
pub mod prune;
pub mod spmm;
pub mod tile;

pub use config::{validate_config, VnmConfig, SELECTED_COLUMNS};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use exec::{configure_threads, execution_mode};
pub use format::{compress, decompress, mask_of, Dtype, VnmMatrix};
pub use mask::SparsityMask;
