//! Generalized Gaussian kernels and the closed-form quantities built on them.
//!
//! The family is
//!
//! ```text
//! g(t, x) = K · t^(-τd/ρ) · exp(-Λ |x|^ρ / t^τ),   t > 0,
//! ```
//!
//! with `K` fixed so that `g(t, ·)` is a probability density. The heat kernel
//! is `(ρ, τ, Λ) = (2, 1, 1/4)`, and the dominating kernels of parabolic
//! operators of order `2m` use `ρ = 2m/(2m-1)`, `τ = 1/(2m-1)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::special::{gamma_q, ln_gamma};

/// Largest spatial dimension supported.
pub const MAX_DIM: usize = 3;

/// Parameters of a generalized Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelParams", into = "KernelParams")]
pub struct KernelSpec {
    rho: f64,
    tau: f64,
    lambda_cap: f64,
    dim: usize,
    norm_const: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct KernelParams {
    rho: f64,
    tau: f64,
    lambda_cap: f64,
    dim: usize,
}

impl TryFrom<KernelParams> for KernelSpec {
    type Error = Error;

    fn try_from(p: KernelParams) -> Result<Self> {
        KernelSpec::new(p.rho, p.tau, p.lambda_cap, p.dim)
    }
}

impl From<KernelSpec> for KernelParams {
    fn from(k: KernelSpec) -> Self {
        KernelParams {
            rho: k.rho,
            tau: k.tau,
            lambda_cap: k.lambda_cap,
            dim: k.dim,
        }
    }
}

impl KernelSpec {
    pub fn new(rho: f64, tau: f64, lambda_cap: f64, dim: usize) -> Result<Self> {
        let norm_const = normalization_constant(rho, tau, lambda_cap, dim)?;
        Ok(Self {
            rho,
            tau,
            lambda_cap,
            dim,
            norm_const,
        })
    }

    /// The heat kernel `(4πt)^(-d/2) exp(-|x|²/(4t))`.
    pub fn heat(dim: usize) -> Result<Self> {
        Self::new(2.0, 1.0, 0.25, dim)
    }

    /// Dominating kernel of a uniformly parabolic operator of order `2m`.
    /// With `m = 1` and `lambda_cap = 1/4` this is the heat kernel.
    pub fn parabolic(m: u32, lambda_cap: f64, dim: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("m", "parabolic order must be at least 1"));
        }
        let denom = (2 * m - 1) as f64;
        Self::new(2.0 * m as f64 / denom, 1.0 / denom, lambda_cap, dim)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn lambda_cap(&self) -> f64 {
        self.lambda_cap
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    /// Exponent `τd/ρ` of the on-diagonal singularity `t^(-τd/ρ)`.
    pub fn singularity_exponent(&self) -> f64 {
        self.tau * self.dim as f64 / self.rho
    }

    /// `1 + ρ/(τd)`: the supremum of exponents `p` with `g^p` integrable near `t = 0`.
    pub fn critical_exponent(&self) -> f64 {
        1.0 + self.rho / (self.tau * self.dim as f64)
    }

    /// Spatial length scale `t^(τ/ρ)`; `g(t, x) = t^(-τd/ρ) g(1, x / t^(τ/ρ))`.
    pub fn length_scale(&self, t: f64) -> f64 {
        t.powf(self.tau / self.rho)
    }

    /// Density at time `t` and point `x` (`x.len()` must equal the dimension).
    pub fn density(&self, t: f64, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.density_sq(t, r2)
    }

    /// Density as a function of the squared distance `|x|²`.
    #[inline]
    pub fn density_sq(&self, t: f64, r2: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let r_rho = if self.rho == 2.0 {
            r2
        } else {
            r2.powf(0.5 * self.rho)
        };
        let decay = if self.tau == 1.0 { r_rho / t } else { r_rho / t.powf(self.tau) };
        self.norm_const * t.powf(-self.singularity_exponent()) * (-self.lambda_cap * decay).exp()
    }

    /// Probability mass of `g(t, ·)` outside the Euclidean ball of radius `r`.
    pub fn tail_mass(&self, t: f64, r: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let a = self.dim as f64 / self.rho;
        gamma_q(a, self.lambda_cap * r.powf(self.rho) / t.powf(self.tau))
    }

    /// Radius beyond which `g(t, ·)` carries less than `mass` of its probability.
    pub fn tail_radius(&self, t: f64, mass: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let mut hi = self.length_scale(t).max(1e-300);
        while self.tail_mass(t, hi) > mass {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail_mass(t, mid) > mass {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        hi
    }
}

/// `K(ρ, τ, Λ) = ρ Λ^(d/ρ) Γ(d/2) / (2 π^(d/2) Γ(d/ρ))`, independent of `τ` and `t`.
pub fn normalization_constant(rho: f64, tau: f64, lambda_cap: f64, dim: usize) -> Result<f64> {
    for (name, v) in [("rho", rho), ("tau", tau), ("lambda_cap", lambda_cap)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(name, format!("must be positive and finite, got {v}")));
        }
    }
    if dim == 0 || dim > MAX_DIM {
        return Err(invalid("dim", format!("must lie in 1..={MAX_DIM}, got {dim}")));
    }
    let d = dim as f64;
    let log_k = rho.ln() + (d / rho) * lambda_cap.ln() + ln_gamma(d / 2.0)
        - (2.0f64).ln()
        - (d / 2.0) * PI.ln()
        - ln_gamma(d / rho);
    Ok(log_k.exp())
}

/// `g^p(t, x) = prefactor(t) · g'(t, x)` where `g'` has decay constant `pΛ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRescaling {
    /// `K^p / K'`.
    pub coefficient: f64,
    /// Exponent `-(p-1)τd/ρ` of `t` in the prefactor.
    pub time_exponent: f64,
    pub rescaled: KernelSpec,
}

impl PowerRescaling {
    pub fn prefactor(&self, t: f64) -> f64 {
        self.coefficient * t.powf(self.time_exponent)
    }
}

pub fn power_rescaling(spec: &KernelSpec, p: f64) -> Result<PowerRescaling> {
    if !(p.is_finite() && p > 0.0) {
        return Err(invalid("p", format!("must be positive, got {p}")));
    }
    let rescaled = KernelSpec::new(spec.rho, spec.tau, p * spec.lambda_cap, spec.dim)?;
    let coefficient = (p * spec.norm_const.ln() - rescaled.norm_const.ln()).exp();
    Ok(PowerRescaling {
        coefficient,
        time_exponent: -(p - 1.0) * spec.singularity_exponent(),
        rescaled,
    })
}

/// `∫₀^T ∫ g^p(t, x) dx dt`, or `+∞` when `p ≥ 1 + ρ/(τd)`.
pub fn kernel_lp_norm(spec: &KernelSpec, p: f64, horizon: f64) -> Result<f64> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid("horizon", format!("must be positive, got {horizon}")));
    }
    let resc = power_rescaling(spec, p)?;
    if p >= spec.critical_exponent() {
        return Ok(f64::INFINITY);
    }
    let e = 1.0 + resc.time_exponent;
    Ok(resc.coefficient * horizon.powf(e) / e)
}

/// `E|X|^p` for `X ~ N(0, σ²)`: `(2σ²)^(p/2) π^(-1/2) Γ((1+p)/2)`.
pub fn gaussian_abs_moment(variance: f64, p: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(invalid("variance", format!("must be positive, got {variance}")));
    }
    if !(p > -1.0) {
        return Err(invalid("p", format!("must exceed -1, got {p}")));
    }
    let log = 0.5 * p * (2.0 * variance).ln() - 0.5 * PI.ln() + ln_gamma(0.5 * (1.0 + p));
    Ok(log.exp())
}

/// `∫_{0<t_n<…<t_1<t} Π (t_{j-1} - t_j)^a = Γ(1+a)^n / Γ(1+(1+a)n) · t^(n(1+a))`.
pub fn iterated_time_integral(t: f64, a: f64, n: u32) -> Result<f64> {
    if !(a > -1.0) {
        return Err(invalid("a", format!("must exceed -1, got {a}")));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if t < 0.0 {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let log = nf * ln_gamma(1.0 + a) - ln_gamma(1.0 + (1.0 + a) * nf) + nf * (1.0 + a) * t.ln();
    Ok(log.exp())
}

/// Outcome of the admissibility check for an exponent pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub p: f64,
    pub q: f64,
    /// `1 + ρ/(τd)`; `p` must lie strictly below.
    pub p_upper: f64,
    /// `p / (1 + τ(1 + ρ/(τd) - p))`; `q` must lie strictly above.
    pub q_lower: f64,
    pub admissible: bool,
}

impl Admissibility {
    /// Human-readable description of the first violated condition.
    pub fn violation(&self) -> Option<String> {
        if self.admissible {
            return None;
        }
        Some(if !(self.p > 0.0 && self.p < self.p_upper) {
            format!("need 0 < p < {} but p = {}", self.p_upper, self.p)
        } else if self.q > self.p {
            format!("need q <= p but q = {} > p = {}", self.q, self.p)
        } else {
            format!("need q > {} (threshold at p = {}) but q = {}", self.q_lower, self.p, self.q)
        })
    }
}

/// Lower threshold for `q` at the given `p`; only meaningful for `p < 1 + ρ/(τd)`.
pub fn q_threshold(p: f64, spec: &KernelSpec) -> f64 {
    p / (1.0 + spec.tau * (spec.critical_exponent() - p))
}

pub fn admissible(p: f64, q: f64, spec: &KernelSpec) -> Admissibility {
    let p_upper = spec.critical_exponent();
    let q_lower = q_threshold(p, spec);
    let ok = p > 0.0 && q > 0.0 && p < p_upper && q_lower < q && q <= p;
    Admissibility {
        p,
        q,
        p_upper,
        q_lower,
        admissible: ok,
    }
}

/// Small-jump exponent `p`, big-jump exponent `q` and the growth exponent `η`
/// of the adaptive truncation level `N(1 + |x|^η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPair {
    pub p: f64,
    pub q: f64,
    pub eta: f64,
}

impl ExponentPair {
    pub fn new(p: f64, q: f64, eta: f64) -> Result<Self> {
        if !(p > 0.0 && p < 2.0) {
            return Err(invalid("p", format!("must lie in (0, 2), got {p}")));
        }
        if !(q > 0.0 && q <= p) {
            return Err(invalid("q", format!("must lie in (0, p], got {q}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be positive, got {eta}")));
        }
        Ok(Self { p, q, eta })
    }

    /// Open window `(d/q, ρ(1 - (p-1)τd/ρ)/(p - q))` of feasible `η`; the upper end is
    /// infinite when `q = p`.
    pub fn eta_window(&self, spec: &KernelSpec) -> (f64, f64) {
        let lower = spec.dim as f64 / self.q;
        let slack = 1.0 - (self.p - 1.0) * spec.singularity_exponent();
        let upper = if self.p > self.q {
            spec.rho * slack / (self.p - self.q)
        } else if slack > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (lower, upper)
    }

    pub fn eta_feasible(&self, spec: &KernelSpec) -> bool {
        let (lo, hi) = self.eta_window(spec);
        self.eta > lo && self.eta < hi
    }

    /// Admissibility for `spec` plus the feasibility window for `η`.
    pub fn validate_for(&self, spec: &KernelSpec) -> Result<()> {
        let adm = admissible(self.p, self.q, spec);
        if let Some(msg) = adm.violation() {
            return Err(Error::NotAdmissible(msg));
        }
        if !self.eta_feasible(spec) {
            let (lo, hi) = self.eta_window(spec);
            return Err(Error::Infeasible(format!(
                "eta = {} must lie in ({lo}, {hi})",
                self.eta
            )));
        }
        Ok(())
    }
}

/// The bound on the `n`-th Picard increment,
/// `Cⁿ Γ((d + nη(p-q))/ρ) Γ(1-a)ⁿ / Γ(1 + (1-a)n)` with `a = (p-1)τd/ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    pub log_value: f64,
    pub value: f64,
    /// Whether the exponents lie in the window where the bound tends to zero.
    pub feasible: bool,
}

pub fn picard_decay_bound(
    n: u32,
    rate: f64,
    exps: &ExponentPair,
    spec: &KernelSpec,
) -> Result<DecayBound> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(invalid("rate", format!("must be positive, got {rate}")));
    }
    if n == 0 {
        return Err(invalid("n", "iteration index starts at 1"));
    }
    let feasible = exps.eta_feasible(spec);
    let a = (exps.p - 1.0) * spec.singularity_exponent();
    let slack = 1.0 - a;
    if slack <= 0.0 {
        return Ok(DecayBound {
            log_value: f64::INFINITY,
            value: f64::INFINITY,
            feasible: false,
        });
    }
    let nf = n as f64;
    let d = spec.dim as f64;
    let log_value = nf * rate.ln() + ln_gamma((d + nf * exps.eta * (exps.p - exps.q)) / spec.rho)
        + nf * ln_gamma(slack)
        - ln_gamma(1.0 + slack * nf);
    Ok(DecayBound {
        log_value,
        value: log_value.exp(),
        feasible,
    })
}
