//! Computable geometry and symbolic dynamics for attractors of contracting
//! similitude systems with overlaps: rigorous outer covers and rasters,
//! Lebesgue-measure and overlap estimation, digit-coding trees and their
//! cardinality statistics, block-avoiding and universal-coding searches,
//! expansions in non-integer bases with arbitrary digit sets, and gap
//! spectra of 0/1 polynomial values.

pub mod error;
pub mod scalar;
pub mod geometry;
pub mod ifs;
pub mod cover;
pub mod raster;
pub mod measure;
pub mod boxdim;
pub mod coding;
pub mod experiments;

pub use error::{Error, Result};
pub use scalar::{Scalar, Trichotomy};

/// Central defaults, printed into every report header.
pub mod defaults {
    /// Membership/tree tolerance.
    pub const TOLERANCE: f64 = 1e-9;
    /// Coding tree depth.
    pub const DEPTH: usize = 30;
    /// Grid resolution for rasters and measure estimates.
    pub const RESOLUTION: f64 = 1e-3;
    /// Hard cap on cover cells (expansions count against it).
    pub const CELL_BUDGET: usize = 10_000_000;
    /// Hard cap on coding-tree nodes.
    pub const NODE_CAP: usize = 1_000_000;
    /// RNG seed.
    pub const SEED: u64 = 0;
}
