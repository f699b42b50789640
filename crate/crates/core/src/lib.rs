//! Mild solutions of the stochastic heat equation, and of Volterra equations with
//! generalized Gaussian kernels, driven by heavy-tailed pure-jump Lévy noise.
//!
//! The crate is organized bottom-up:
//!
//! - [`kernels`]: closed-form kernel quantities, exponent admissibility and the
//!   Picard decay bound;
//! - [`noise`]: Poisson atom clouds, truncations and stopping times;
//! - [`solver`]: initial field, stochastic convolution, Picard iteration and gluing
//!   across truncation levels;
//! - [`estimators`]: ensemble studies of norms, truncation gaps, Picard decay,
//!   moments and stopping times.

pub mod error;
pub mod estimators;
pub mod kernels;
pub mod noise;
pub mod quadrature;
pub mod seeds;
pub mod solver;
pub mod special;
pub mod summation;

pub use error::{Error, Result};
