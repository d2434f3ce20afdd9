//! Locality analysis of convolution kernels.
//!
//! The crate bundles a handful of loosely coupled pieces:
//!
//! * [`cohesion`]: a gravity-like mass model on small grids, including the
//!   exhaustive check that a center cell dominates its neighbors.
//! * [`localization`]: greedy feature placement on 2D maps.
//! * [`noise`]: one-dimensional windowed detection under additive noise.
//! * [`regularizer`]: position-dependent weight decay for 3x3 kernels.
//! * [`stats`]: per-layer locality profiles with one-sided t-tests, plus the
//!   derivation of per-layer regularizer factors.
//! * [`tinycnn`]: a small CPU network used to compare regularizers.
//! * [`io`]: kernelset JSON, PGM and CSV.

pub mod cohesion;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod kernel;
pub mod localization;
pub mod noise;
pub mod regularizer;
pub mod stats;
pub mod tinycnn;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelLayer, KernelSet};
