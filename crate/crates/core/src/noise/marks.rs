//! Mark (jump-size) measures of a homogeneous pure-jump Lévy basis.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Jump-size intensity `λ(dz)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarkFamily {
    /// `λ(dz) = c |z|^(-1-α) dz` on both half-lines.
    SymmetricStable { alpha: f64, scale: f64 },
    /// Finitely many jump sizes `z_k` occurring at rates `λ_k`.
    Discrete { atoms: Vec<f64>, rates: Vec<f64> },
}

/// Which part of the mark space a moment integral runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpRegion {
    /// `|z| ≤ 1`
    Small,
    /// `|z| > 1`
    Big,
}

/// How the retained small jumps are centred in a simulated realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compensation {
    /// `true` when the band `ε ≤ |z| ≤ 1` is compensated (`p ≥ 1`).
    pub compensated: bool,
    /// `∫_{ε≤|z|≤1} z λ(dz)`.
    pub band_mean: f64,
    /// Deterministic drift density driving the convolution's drift term.
    pub drift_density: f64,
    /// `∫_{|z|<ε} |z|^p λ(dz)`: the size of the discarded jumps in the `p`-th moment.
    pub discarded_moment: f64,
}

/// The mark measure together with the drift and the declared exponents `(p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyMarkSpec {
    pub family: MarkFamily,
    /// Jumps with `|z| < small_cutoff` are not simulated.
    pub small_cutoff: f64,
    pub drift: f64,
    pub declared_p: f64,
    pub declared_q: f64,
}

impl LevyMarkSpec {
    pub fn new(
        family: MarkFamily,
        small_cutoff: f64,
        drift: f64,
        declared_p: f64,
        declared_q: f64,
    ) -> Result<Self> {
        let spec = Self {
            family,
            small_cutoff,
            drift,
            declared_p,
            declared_q,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Symmetric stable marks with zero drift.
    pub fn stable(alpha: f64, scale: f64, small_cutoff: f64, p: f64, q: f64) -> Result<Self> {
        Self::new(
            MarkFamily::SymmetricStable { alpha, scale },
            small_cutoff,
            0.0,
            p,
            q,
        )
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            MarkFamily::SymmetricStable { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(invalid("alpha", format!("must lie in (0, 2), got {alpha}")));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid("scale", format!("must be positive, got {scale}")));
                }
            }
            MarkFamily::Discrete { atoms, rates } => {
                if atoms.len() != rates.len() {
                    return Err(invalid(
                        "rates",
                        format!("{} atoms but {} rates", atoms.len(), rates.len()),
                    ));
                }
                if atoms.iter().any(|z| !z.is_finite() || *z == 0.0) {
                    return Err(invalid("atoms", "jump sizes must be finite and nonzero"));
                }
                if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                    return Err(invalid("rates", "rates must be finite and nonnegative"));
                }
            }
        }
        if !(self.small_cutoff > 0.0 && self.small_cutoff <= 1.0) {
            return Err(invalid(
                "small_cutoff",
                format!("must lie in (0, 1], got {}", self.small_cutoff),
            ));
        }
        if !self.drift.is_finite() {
            return Err(invalid("drift", "must be finite"));
        }
        let (p, q) = (self.declared_p, self.declared_q);
        if !(p > 0.0 && p < 2.0) {
            return Err(invalid("declared_p", format!("must lie in (0, 2), got {p}")));
        }
        if !(q > 0.0 && q <= p) {
            return Err(invalid("declared_q", format!("must lie in (0, p], got {q}")));
        }
        let small = self.moment_integral(p, JumpRegion::Small);
        let big = self.moment_integral(q, JumpRegion::Big);
        if !(small + big).is_finite() {
            return Err(invalid(
                "declared_p",
                format!(
                    "∫_{{|z|≤1}} |z|^p λ(dz) + ∫_{{|z|>1}} |z|^q λ(dz) diverges for p = {p}, q = {q}"
                ),
            ));
        }
        if p < 1.0 {
            let b0 = self.drift - self.small_mean();
            if b0.abs() > 1e-12 {
                return Err(invalid(
                    "drift",
                    format!("p < 1 requires the uncompensated drift to vanish, got {b0}"),
                ));
            }
        }
        Ok(())
    }

    /// `∫_region |z|^exponent λ(dz)`, possibly `+∞`.
    pub fn moment_integral(&self, exponent: f64, region: JumpRegion) -> f64 {
        match &self.family {
            MarkFamily::SymmetricStable { alpha, scale } => match region {
                JumpRegion::Small if exponent > *alpha => 2.0 * scale / (exponent - alpha),
                JumpRegion::Big if exponent < *alpha => 2.0 * scale / (alpha - exponent),
                _ => f64::INFINITY,
            },
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| match region {
                    JumpRegion::Small => z.abs() <= 1.0,
                    JumpRegion::Big => z.abs() > 1.0,
                })
                .map(|(z, r)| r * z.abs().powf(exponent))
                .sum(),
        }
    }

    /// `λ({|z| ≥ level})` for `level > 0`.
    pub fn tail_mass(&self, level: f64) -> f64 {
        match &self.family {
            MarkFamily::SymmetricStable { alpha, scale } => {
                2.0 * scale / alpha * level.powf(-alpha)
            }
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| z.abs() >= level)
                .map(|(_, r)| r)
                .sum(),
        }
    }

    /// `λ({|z| > level})` for `level > 0`.
    pub fn exceedance_mass(&self, level: f64) -> f64 {
        match &self.family {
            MarkFamily::SymmetricStable { .. } => self.tail_mass(level),
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| z.abs() > level)
                .map(|(_, r)| r)
                .sum(),
        }
    }

    /// Total rate of simulated jumps, `λ({|z| ≥ ε})`.
    pub fn retained_mass(&self) -> f64 {
        self.tail_mass(self.small_cutoff)
    }

    /// `∫_{|z|≤1} z λ(dz)`; zero for symmetric families.
    fn small_mean(&self) -> f64 {
        match &self.family {
            MarkFamily::SymmetricStable { .. } => 0.0,
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| z.abs() <= 1.0)
                .map(|(z, r)| z * r)
                .sum(),
        }
    }

    /// `∫_{ε≤|z|≤1} z λ(dz)`.
    pub fn band_mean(&self) -> f64 {
        match &self.family {
            MarkFamily::SymmetricStable { .. } => 0.0,
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| z.abs() <= 1.0 && z.abs() >= self.small_cutoff)
                .map(|(z, r)| z * r)
                .sum(),
        }
    }

    /// `∫_{|z|<ε} |z|^p λ(dz)` with `p` the declared small-jump exponent.
    pub fn discarded_moment(&self) -> f64 {
        let eps = self.small_cutoff;
        let p = self.declared_p;
        match &self.family {
            MarkFamily::SymmetricStable { alpha, scale } => {
                if p > *alpha {
                    2.0 * scale * eps.powf(p - alpha) / (p - alpha)
                } else {
                    f64::INFINITY
                }
            }
            MarkFamily::Discrete { atoms, rates } => atoms
                .iter()
                .zip(rates)
                .filter(|(z, _)| z.abs() < eps)
                .map(|(z, r)| r * z.abs().powf(p))
                .sum(),
        }
    }

    /// For `p ≥ 1` the retained band `ε ≤ |z| ≤ 1` is compensated by subtracting its
    /// mean from the drift; for `p < 1` the drift-free uncompensated convention applies.
    pub fn compensation(&self) -> Compensation {
        let band_mean = self.band_mean();
        let compensated = self.declared_p >= 1.0;
        let drift_density = if compensated {
            self.drift - band_mean
        } else {
            0.0
        };
        Compensation {
            compensated,
            band_mean,
            drift_density,
            discarded_moment: self.discarded_moment(),
        }
    }

    /// Draws one mark from `λ` restricted to `{|z| ≥ ε}` and normalized.
    ///
    /// Stable marks use the inverse CDF `|z| = ε u^(-1/α)` of the Pareto tail
    /// with an independent fair sign; exactly two uniforms are consumed.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let eps = self.small_cutoff;
        match &self.family {
            MarkFamily::SymmetricStable { alpha, .. } => {
                let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
                let u = 1.0 - rng.random::<f64>();
                sign * eps * u.powf(-1.0 / alpha)
            }
            MarkFamily::Discrete { atoms, rates } => {
                let total = self.retained_mass();
                let target = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut last = atoms[0];
                for (z, r) in atoms.iter().zip(rates) {
                    if z.abs() < eps || *r == 0.0 {
                        continue;
                    }
                    acc += r;
                    last = *z;
                    if target < acc {
                        return *z;
                    }
                }
                last
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stable(alpha: f64) -> LevyMarkSpec {
        LevyMarkSpec::stable(alpha, 1.0, 0.1, 1.9, alpha * 0.9).unwrap()
    }

    #[test]
    fn stable_moment_examples() {
        let s = stable(1.5);
        assert!((s.moment_integral(1.6, JumpRegion::Small) - 20.0).abs() < 1e-12);
        assert!((s.moment_integral(1.4, JumpRegion::Big) - 20.0).abs() < 1e-12);
        assert_eq!(s.moment_integral(1.5, JumpRegion::Small), f64::INFINITY);
        assert_eq!(s.moment_integral(1.5, JumpRegion::Big), f64::INFINITY);
        assert_eq!(s.moment_integral(0.0, JumpRegion::Small), f64::INFINITY);
    }

    #[test]
    fn stable_tail_mass_matches_big_moment_at_zero() {
        let s = stable(1.2);
        assert!((s.tail_mass(1.0) - s.moment_integral(0.0, JumpRegion::Big)).abs() < 1e-14);
        let mean = 1.0 * 2.0 * LevyMarkSpec::stable(1.5, 1.0, 0.1, 1.9, 1.4).unwrap().retained_mass();
        assert!((mean - 84.327).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn declared_exponents_must_bracket_alpha() {
        // p must exceed alpha, q must stay below it
        assert!(LevyMarkSpec::stable(1.2, 1.0, 0.1, 1.1, 1.0).is_err());
        assert!(LevyMarkSpec::stable(1.2, 1.0, 0.1, 1.3, 1.25).is_err());
        assert!(LevyMarkSpec::stable(1.2, 1.0, 0.1, 1.3, 1.1).is_ok());
        assert!(LevyMarkSpec::stable(2.0, 1.0, 0.1, 1.3, 1.1).is_err());
        assert!(LevyMarkSpec::stable(1.2, 1.0, 0.0, 1.3, 1.1).is_err());
    }

    #[test]
    fn p_below_one_requires_zero_uncompensated_drift() {
        let fam = MarkFamily::SymmetricStable { alpha: 0.5, scale: 1.0 };
        assert!(LevyMarkSpec::new(fam.clone(), 0.1, 0.0, 0.8, 0.4).is_ok());
        assert!(LevyMarkSpec::new(fam, 0.1, 0.3, 0.8, 0.4).is_err());

        let disc = MarkFamily::Discrete { atoms: vec![0.5, -2.0], rates: vec![2.0, 1.0] };
        // b0 = b - 0.5·2 must vanish
        assert!(LevyMarkSpec::new(disc.clone(), 0.1, 1.0, 0.8, 0.5).is_ok());
        assert!(LevyMarkSpec::new(disc, 0.1, 0.0, 0.8, 0.5).is_err());
    }

    #[test]
    fn discrete_compensation_for_p_at_least_one() {
        let disc = MarkFamily::Discrete {
            atoms: vec![0.05, 0.5, -0.25, 3.0],
            rates: vec![10.0, 2.0, 1.0, 0.5],
        };
        let s = LevyMarkSpec::new(disc, 0.1, 0.2, 1.5, 1.0).unwrap();
        let c = s.compensation();
        assert!(c.compensated);
        assert!((c.band_mean - (1.0 - 0.25)).abs() < 1e-15);
        assert!((c.drift_density - (0.2 - 0.75)).abs() < 1e-15);
        assert!((c.discarded_moment - 10.0 * 0.05f64.powf(1.5)).abs() < 1e-15);
        assert!((s.retained_mass() - 3.5).abs() < 1e-15);
        assert!((s.exceedance_mass(3.0) - 0.0).abs() < 1e-15);
        assert!((s.tail_mass(3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn stable_discarded_moment_closed_form() {
        let s = LevyMarkSpec::stable(1.2, 0.7, 0.05, 1.5, 1.0).unwrap();
        let expect = 2.0 * 0.7 * 0.05f64.powf(0.3) / 0.3;
        assert!((s.discarded_moment() - expect).abs() < 1e-14);
        assert_eq!(s.compensation().drift_density, 0.0);
    }
}
