//! Limiting spectral distributions of symmetric random matrices whose
//! entries come from a stationary random field.
//!
//! * [`field`]: filters, covariances and the scaled spectral density `b`.
//! * [`solver`]: the resolvent fixed point and its Stieltjes transform.
//! * [`stieltjes`]: inversion to distribution functions and their distances.
//! * [`sim`]: field synthesis, matrix assembly and empirical spectra.
//! * [`config`]: `key = value` configuration files.

pub mod config;
pub mod error;
pub mod field;
pub mod sim;
pub mod solver;
pub mod stieltjes;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
