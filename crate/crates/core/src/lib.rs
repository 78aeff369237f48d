//! Synthesis and reconstruction of complex-valued fractional Brownian fields
//! from sparse samples.
//!
//! The crate covers field synthesis, PSF ellipticity maps, sampling operators,
//! baseline interpolators, compressed-sensing solvers, error metrics and an
//! experiment harness.

pub mod baselines;
pub mod cs;
pub mod error;
pub mod fbm;
pub mod grid;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod psf;
pub mod sampling;

pub use error::{Error, Result};
pub use grid::{ComplexField, GridIndex, C64};
