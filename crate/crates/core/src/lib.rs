//! Divisible sandpile laboratory on the discrete torus `Z_n^d`.
//!
//! The crate simulates the divisible sandpile, computes its odometer both by
//! toppling and in closed spectral form, samples the discrete bilaplacian
//! Gaussian field, and evaluates the quantities that describe its scaling
//! limit: rescaled pairings with test functions, their moments, Sobolev
//! norms, and the continuum bilaplacian kernel.

pub mod error;
pub mod field;
pub mod green;
pub mod kernel;
pub mod limit;
pub mod rng;
pub mod sandpile;
pub mod snapshot;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
