use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::marks::{Compensation, LevyMarkSpec};
use crate::error::{invalid, Result};
use crate::kernels::MAX_DIM;
use crate::seeds::rng_from_seed;

/// The simulation window `[0, T] × [-R, R]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationBox {
    pub horizon: f64,
    pub radius: f64,
    pub dim: usize,
}

impl SimulationBox {
    pub fn new(horizon: f64, radius: f64, dim: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(invalid("horizon", format!("must be nonnegative, got {horizon}")));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid("radius", format!("must be nonnegative, got {radius}")));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid("dim", format!("must lie in 1..={MAX_DIM}, got {dim}")));
        }
        Ok(Self { horizon, radius, dim })
    }

    /// Lebesgue measure of the window.
    pub fn volume(&self) -> f64 {
        self.horizon * (2.0 * self.radius).powi(self.dim as i32)
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        (0.0..=self.horizon).contains(&atom.t)
            && atom.position(self.dim).iter().all(|c| c.abs() <= self.radius)
    }
}

/// A point `(t, x, z)` of the Poisson random measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    /// Coordinates beyond the window dimension are zero.
    pub x: [f64; MAX_DIM],
    pub z: f64,
}

impl Atom {
    pub fn position(&self, dim: usize) -> &[f64] {
        &self.x[..dim]
    }

    pub fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_big(&self) -> bool {
        self.z.abs() > 1.0
    }
}

/// Growth exponent and level of the adaptive truncation `|z| ≤ N h(x)`,
/// `h(x) = 1 + |x|^η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub level: u32,
    pub eta: f64,
}

impl StoppingConfig {
    pub fn new(level: u32, eta: f64) -> Result<Self> {
        if level == 0 {
            return Err(invalid("level", "truncation level must be a positive integer"));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(invalid("eta", format!("must be positive, got {eta}")));
        }
        Ok(Self { level, eta })
    }

    /// Checks `η > d/q`, under which `τ(N) ↑ ∞`.
    pub fn check(&self, dim: usize, q: f64) -> Result<()> {
        let lower = dim as f64 / q;
        if self.eta > lower {
            Ok(())
        } else {
            Err(invalid("eta", format!("need eta > d/q = {lower}, got {}", self.eta)))
        }
    }

    pub fn with_level(&self, level: u32) -> Self {
        Self { level, eta: self.eta }
    }

    pub fn growth(&self, r: f64) -> f64 {
        1.0 + r.powf(self.eta)
    }

    /// `N h(x)` at distance `r = |x|`.
    pub fn threshold(&self, r: f64) -> f64 {
        self.level as f64 * self.growth(r)
    }
}

/// First time an atom exceeds the adaptive threshold, or the tagged sentinel when
/// no atom in the window does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Option<f64>", from = "Option<f64>")]
pub enum StoppingTime {
    At(f64),
    BeyondWindow,
}

impl StoppingTime {
    pub fn time(&self) -> Option<f64> {
        match self {
            StoppingTime::At(t) => Some(*t),
            StoppingTime::BeyondWindow => None,
        }
    }

    /// Whether `t` lies in `[0, τ]`.
    pub fn covers(&self, t: f64) -> bool {
        match self {
            StoppingTime::At(s) => t <= *s,
            StoppingTime::BeyondWindow => true,
        }
    }

    pub fn le(&self, other: &StoppingTime) -> bool {
        match (self, other) {
            (_, StoppingTime::BeyondWindow) => true,
            (StoppingTime::BeyondWindow, StoppingTime::At(_)) => false,
            (StoppingTime::At(a), StoppingTime::At(b)) => a <= b,
        }
    }
}

impl From<StoppingTime> for Option<f64> {
    fn from(s: StoppingTime) -> Self {
        s.time()
    }
}

impl From<Option<f64>> for StoppingTime {
    fn from(v: Option<f64>) -> Self {
        v.map_or(StoppingTime::BeyondWindow, StoppingTime::At)
    }
}

/// A finite atom cloud sampled on a window, with the seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    /// Atoms in generation order.
    pub atoms: Vec<Atom>,
    pub window: SimulationBox,
    pub cutoff: f64,
    pub seed: u64,
    pub compensation: Compensation,
}

/// Samples the atoms of the Poisson measure with intensity `dt dx λ(dz)`
/// restricted to `{|z| ≥ ε}` on the window.
///
/// Draw order from the ChaCha8 stream: the atom count, then per atom
/// `t`, the `d` coordinates and the mark.
pub fn sample_noise(spec: &LevyMarkSpec, window: SimulationBox, seed: u64) -> Result<NoiseRealization> {
    spec.validate()?;
    let rate = spec.retained_mass();
    if !rate.is_finite() {
        return Err(invalid("small_cutoff", "retained jump intensity is unbounded"));
    }
    let mean = window.volume() * rate;
    let mut rng = rng_from_seed(seed);
    let count = if mean > 0.0 {
        let dist = Poisson::new(mean)
            .map_err(|e| invalid("small_cutoff", format!("bad Poisson mean {mean}: {e}")))?;
        dist.sample(&mut rng) as usize
    } else {
        0
    };
    let mut atoms = Vec::with_capacity(count);
    for _ in 0..count {
        let t = window.horizon * rng.random::<f64>();
        let mut x = [0.0; MAX_DIM];
        for c in x.iter_mut().take(window.dim) {
            *c = window.radius * (2.0 * rng.random::<f64>() - 1.0);
        }
        let z = spec.sample_mark(&mut rng);
        atoms.push(Atom { t, x, z });
    }
    Ok(NoiseRealization {
        atoms,
        window,
        cutoff: spec.small_cutoff,
        seed,
        compensation: spec.compensation(),
    })
}

impl NoiseRealization {
    pub fn dim(&self) -> usize {
        self.window.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn retain<F: Fn(&Atom) -> bool>(&self, keep: F) -> Self {
        Self {
            atoms: self.atoms.iter().copied().filter(|a| keep(a)).collect(),
            ..self.clone()
        }
    }

    /// Drops big jumps with `|z| > level`; jumps with `|z| ≤ 1` are kept.
    pub fn truncate_jump_size(&self, level: f64) -> Self {
        self.retain(|a| !(a.is_big() && a.z.abs() > level))
    }

    /// Drops big jumps located outside `[-half_width, half_width]^d`.
    pub fn restrict_support(&self, half_width: f64) -> Self {
        let d = self.dim();
        self.retain(|a| !a.is_big() || a.position(d).iter().all(|c| c.abs() <= half_width))
    }

    /// Keeps only atoms with `|z| ≤ N h(x)`.
    pub fn truncate_adaptive(&self, cfg: &StoppingConfig) -> Self {
        self.retain(|a| a.z.abs() <= cfg.threshold(a.norm()))
    }

    /// `τ(N)`: the earliest atom time with `|z| > N h(x)`.
    pub fn stopping_time(&self, cfg: &StoppingConfig) -> StoppingTime {
        self.atoms
            .iter()
            .filter(|a| a.z.abs() > cfg.threshold(a.norm()))
            .map(|a| a.t)
            .min_by(f64::total_cmp)
            .map_or(StoppingTime::BeyondWindow, StoppingTime::At)
    }

    /// Largest big-jump magnitude, zero when there is none.
    pub fn max_big_jump(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.is_big())
            .map(|a| a.z.abs())
            .fold(0.0, f64::max)
    }

    /// `max |z| / h(x)` over all atoms; every level at or above it yields the sentinel.
    pub fn max_threshold_ratio(&self, eta: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.z.abs() / (1.0 + a.norm().powf(eta)))
            .fold(0.0, f64::max)
    }

    /// Atoms sorted by `(t, x, z)`: the fixed summation order of the solver.
    pub fn sorted_atoms(&self) -> Vec<Atom> {
        let mut atoms = self.atoms.clone();
        atoms.sort_by(|a, b| {
            a.t.total_cmp(&b.t)
                .then_with(|| {
                    a.x.iter()
                        .zip(&b.x)
                        .map(|(u, v)| u.total_cmp(v))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .then_with(|| a.z.total_cmp(&b.z))
        });
        atoms
    }
}
