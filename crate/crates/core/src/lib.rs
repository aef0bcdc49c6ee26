//! Entropy estimation on large alphabets via best polynomial approximation.
//!
//! The crate is organised by concern:
//!
//! - [`domain`]: distributions, histograms, fingerprints and `phi(x) = x log(1/x)`.
//! - [`polyapprox`]: Remez exchange for best uniform polynomial approximation.
//! - [`sampling`]: synthetic distributions and seeded multinomial/Poisson samplers.
//! - [`estimators`]: plug-in, Miller-Madow and the polynomial-approximation estimator.
//! - [`lowerbound`]: moment-matched priors and the quantities used in lower bounds.
//! - [`bench`]: Monte Carlo RMSE harness.
//! - [`io`]: text formats for histograms, distributions and coefficient tables.

pub mod bench;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod io;
pub mod lowerbound;
pub mod polyapprox;
pub mod sampling;

pub use domain::{
    entropy, falling_factorial, fingerprint, phi, Distribution, Fingerprint, Histogram,
};
pub use error::{Error, Result};
