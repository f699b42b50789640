//! Thin wrappers over the gamma family used throughout the crate.

use statrs::function::gamma;

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    gamma::gamma(x)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma::gamma_ur(a, x)
}
