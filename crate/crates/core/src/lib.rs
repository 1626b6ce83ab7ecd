//! Monte Carlo laboratory for directed last-passage percolation near the
//! axis, Brownian directed percolation, and the Tracy-Widom GUE law.

pub mod airy;
pub mod brownian;
pub mod coupling;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod quadrature;
pub mod stats;
pub mod tracy_widom;
pub mod weights;

pub use error::{LppError, Result};
