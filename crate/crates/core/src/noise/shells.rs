//! Intensity bounds for the stopping times `τ(N)`.

use std::f64::consts::PI;

use super::marks::LevyMarkSpec;
use super::realization::{SimulationBox, StoppingConfig};
use crate::quadrature::{integrate_box, GaussLegendre};
use crate::special::ln_gamma;

/// Radius of the ball of unit-volume multiple `n`: `π^(-1/2) Γ(1+d/2)^(1/d) n^(1/d)`.
/// Consecutive radii bound shells of Lebesgue measure one.
pub fn shell_radius(n: u64, dim: usize) -> f64 {
    let d = dim as f64;
    (ln_gamma(1.0 + d / 2.0) / d - 0.5 * PI.ln()).exp() * (n as f64).powf(1.0 / d)
}

/// `T ∫_{[-R,R]^d} λ({|z| > N h(x)}) dx`: the mean number of atoms in the window
/// that trigger `τ(N)`. `P[τ(N) ≤ T] = 1 - exp(-intensity) ≤ intensity`.
pub fn exceedance_intensity(spec: &LevyMarkSpec, cfg: &StoppingConfig, window: &SimulationBox) -> f64 {
    if window.horizon == 0.0 || window.radius == 0.0 {
        return 0.0;
    }
    let d = window.dim;
    let (nodes, panels) = match d {
        1 => (16, 64),
        2 => (12, 16),
        _ => (8, 8),
    };
    let rule = GaussLegendre::new(nodes);
    let lo = vec![0.0; d];
    let hi = vec![window.radius; d];
    // the integrand is radial, so integrate one orthant
    let orthant = integrate_box(&rule, &lo, &hi, panels, |x| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        spec.exceedance_mass(cfg.threshold(r))
    });
    window.horizon * orthant * (1u64 << d) as f64
}

/// Shell-sum bound `T Σ_n λ({|z| > a_n})` with `a_n = N(1 + r(n-1)^η)` and `r` the
/// shell radius, summed over the shells that meet the window. Since `h ≥ 1 + r(n-1)^η`
/// on shell `n`, this dominates [`exceedance_intensity`].
pub fn shell_bound(spec: &LevyMarkSpec, cfg: &StoppingConfig, window: &SimulationBox) -> f64 {
    if window.horizon == 0.0 || window.radius == 0.0 {
        return 0.0;
    }
    let d = window.dim;
    let reach = window.radius * (d as f64).sqrt();
    let mut total = 0.0;
    let mut n = 1u64;
    loop {
        let inner = shell_radius(n - 1, d);
        if inner > reach {
            break;
        }
        total += spec.exceedance_mass(cfg.threshold(inner));
        n += 1;
    }
    window.horizon * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shell_radius_examples() {
        assert!((shell_radius(4, 1) - 2.0).abs() < 1e-14);
        assert!((shell_radius(7, 2) - (7.0 / PI).sqrt()).abs() < 1e-14);
        assert_eq!(shell_radius(0, 3), 0.0);
    }

    #[test]
    fn intensity_is_below_shell_bound_and_decreasing() {
        let spec = LevyMarkSpec::stable(1.2, 1.0, 0.1, 1.3, 1.1).unwrap();
        let w = SimulationBox::new(1.0, 2.0, 1).unwrap();
        let mut last = f64::INFINITY;
        for level in [1, 2, 4, 8] {
            let cfg = StoppingConfig::new(level, 1.5).unwrap();
            let i = exceedance_intensity(&spec, &cfg, &w);
            assert!(i < shell_bound(&spec, &cfg, &w));
            assert!(i < last);
            last = i;
        }
    }

    #[test]
    fn intensity_with_constant_threshold_region() {
        // d = 1, η large: h(x) ≈ 1 on |x| < 1, so the intensity is close to
        // T · 2 · λ(|z| > N) on the unit interval
        let spec = LevyMarkSpec::stable(1.0, 1.0, 0.1, 1.3, 0.9).unwrap();
        let w = SimulationBox::new(2.0, 0.5, 1).unwrap();
        let cfg = StoppingConfig::new(3, 60.0).unwrap();
        let expect = 2.0 * 1.0 * spec.exceedance_mass(3.0);
        assert!((exceedance_intensity(&spec, &cfg, &w) - expect).abs() < 1e-9 * expect);
    }
}
