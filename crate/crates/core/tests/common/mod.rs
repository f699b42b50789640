//! Independent numerical oracles shared by the integration tests.
//!
//! Tanh-sinh (double exponential) quadrature handles the endpoint singularities of
//! the kernel and time integrals without any knowledge of the closed forms the
//! library uses.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use spde_heavy::kernels::{ExponentPair, KernelSpec};
use spde_heavy::noise::{LevyMarkSpec, StoppingConfig};
use spde_heavy::solver::{GridSpec, InitialCondition, ProblemSpec, QuadratureSpec, SigmaSpec};

const MAX_LEVEL: u32 = 12;
const T_MAX: f64 = 6.5;

/// `∫_a^b f` by tanh-sinh with interval halving until two levels agree to `rel`.
/// `f` receives the abscissa and its distance to `a`, computed without cancellation.
/// Non-finite samples are dropped.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    let half = 0.5 * (b - a);
    let term = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let c = u.cosh();
        let w = FRAC_PI_2 * t.cosh() / (c * c);
        if !(w > 0.0) {
            return 0.0;
        }
        // distance to the nearer endpoint
        let e = (b - a) / (1.0 + (2.0 * u.abs()).exp());
        if !(e > 0.0) {
            return 0.0;
        }
        let (x, from_a) = if u < 0.0 { (a + e, e) } else { (b - e, b - a - e) };
        // the extreme abscissae can produce 0 · ∞; their weight is negligible
        let v = f(x, from_a);
        if v.is_finite() {
            half * w * v
        } else {
            0.0
        }
    };
    let mut h = 1.0;
    let mut sum = term(0.0);
    let mut k = 1.0;
    while k * h <= T_MAX {
        sum += term(k * h) + term(-k * h);
        k += 1.0;
    }
    let mut estimate = h * sum;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        while t <= T_MAX {
            sum += term(t) + term(-t);
            t += 2.0 * h;
        }
        let next = h * sum;
        if level >= 3 && (next - estimate).abs() <= rel * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫_0^∞ f` as `∫_0^1 f(x) dx + ∫_0^1 f(1/s) s^{-2} ds`; both pieces have their
/// singular end at an exactly represented zero.
pub fn half_line<F: Fn(f64) -> f64>(f: F, rel: f64) -> f64 {
    let inner = tanh_sinh(|_, x| f(x), 0.0, 1.0, rel);
    let outer = tanh_sinh(|_, s| f(1.0 / s) / (s * s), 0.0, 1.0, rel);
    inner + outer
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension {dim}"),
    }
}

/// `∫_{R^d} f(|x|) dx` for a radial integrand.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, dim: usize, rel: f64) -> f64 {
    sphere_area(dim) * half_line(|r| r.powi(dim as i32 - 1) * f(r), rel)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The desk configuration: heat kernel in one dimension, stable marks with
/// `α = 1.2`, exponents `(1.3, 1.1, 1.5)`.
pub fn desk_problem(sigma: SigmaSpec, time_steps: usize, spacing: f64) -> ProblemSpec {
    ProblemSpec {
        kernel: KernelSpec::heat(1).unwrap(),
        sigma,
        psi: InitialCondition::Constant { value: 1.0 },
        noise: LevyMarkSpec::stable(1.2, 1.0, 0.1, 1.3, 1.1).unwrap(),
        horizon: 0.5,
        noise_radius: 6.0,
        eval_radius: 2.0,
        exponents: ExponentPair::new(1.3, 1.1, 1.5).unwrap(),
        grid: GridSpec { time_steps, spacing },
        quadrature: QuadratureSpec::default(),
        guard_tolerance: 1e-4,
    }
}

pub fn desk_stopping(level: u32) -> StoppingConfig {
    StoppingConfig::new(level, 1.5).unwrap()
}
