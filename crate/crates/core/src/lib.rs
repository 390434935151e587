//! High-dimensional U-statistics of order two and bootstrap approximations of
//! the distribution of their maxima.
//!
//! The usual pipeline is [`DataMatrix`] -> [`KernelSpec`] ->
//! [`ustat::compute_hajek`] -> [`bootstrap::multiplier_bootstrap`] ->
//! [`bootstrap::quantile`]. The [`applications`] module builds covariance
//! thresholding and simultaneous tests on top of it, and [`sim`] holds the
//! simulation designs.

pub mod applications;
pub mod bootstrap;
pub mod data;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod sim;
pub mod ustat;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use kernels::{KernelKind, KernelSpec, TriIndex};

/// Closed-form or restructured computations that replace a literal sum.
/// Each name must be paired with a brute-force oracle in the test suite.
pub const FAST_PATHS: &[&str] = &[
    "ustat.mean",
    "ustat.covariance",
    "ustat.kendall",
    "hajek.mean",
    "hajek.covariance",
    "hajek.kendall",
    "cov.multiplier",
    "cov.jackknife",
    "cov.empirical.covariance",
    "cov.empirical.generic",
    "bootstrap.empirical",
    "bootstrap.reweighted.mean",
    "bootstrap.reweighted.covariance",
    "bootstrap.reweighted.generic",
    "bootstrap.multiplier.blocked",
];
