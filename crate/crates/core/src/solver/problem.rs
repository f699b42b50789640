use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{ExponentPair, KernelSpec};
use crate::noise::{LevyMarkSpec, SimulationBox};

/// Closed-form Lipschitz nonlinearities `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaFn {
    /// `σ ≡ value`; `value = 1` is additive noise.
    Constant { value: f64 },
    /// `σ(x) = slope · x + intercept`.
    Linear { slope: f64, intercept: f64 },
    /// `σ(x) = min(|x|, cap)`.
    CappedAbs { cap: f64 },
    /// `σ(x) = scale · (1 + x²)^(γ/2)` with `γ ∈ [0, 1]`; grows like `|x|^γ`.
    PowerGrowth { scale: f64, exponent: f64 },
}

impl SigmaFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SigmaFn::Constant { value } => value,
            SigmaFn::Linear { slope, intercept } => slope * x + intercept,
            SigmaFn::CappedAbs { cap } => x.abs().min(cap),
            SigmaFn::PowerGrowth { scale, exponent } => scale * (1.0 + x * x).powf(0.5 * exponent),
        }
    }

    /// A valid Lipschitz constant for the family.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SigmaFn::Constant { .. } => 0.0,
            SigmaFn::Linear { slope, .. } => slope.abs(),
            SigmaFn::CappedAbs { .. } => 1.0,
            // |x| (1+x²)^(γ/2-1) ≤ 1 for γ ≤ 1
            SigmaFn::PowerGrowth { scale, exponent } => scale.abs() * exponent,
        }
    }

    /// `(C, γ)` with `|σ(x)| ≤ C (1 + |x|^γ)`.
    pub fn growth(&self) -> (f64, f64) {
        match *self {
            SigmaFn::Constant { value } => (value.abs(), 0.0),
            SigmaFn::Linear { slope, intercept } => {
                if slope == 0.0 {
                    (intercept.abs(), 0.0)
                } else {
                    (slope.abs().max(intercept.abs()), 1.0)
                }
            }
            SigmaFn::CappedAbs { cap } => (cap, 0.0),
            // (1+x²)^(γ/2) ≤ (1+|x|)^γ ≤ 1 + |x|^γ
            SigmaFn::PowerGrowth { scale, exponent } => (scale.abs(), exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaFn::Constant { value } => value.is_finite(),
            SigmaFn::Linear { slope, intercept } => slope.is_finite() && intercept.is_finite(),
            SigmaFn::CappedAbs { cap } => cap.is_finite() && cap >= 0.0,
            SigmaFn::PowerGrowth { scale, exponent } => {
                scale.is_finite() && (0.0..=1.0).contains(&exponent)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("sigma", format!("bad parameters in {self:?}")))
        }
    }
}

/// Declared growth hypothesis `|σ(x)| ≤ constant · (1 + |x|^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthBound {
    pub constant: f64,
    pub exponent: f64,
}

/// The nonlinearity with its declared constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub function: SigmaFn,
    /// Declared Lipschitz constant; defaults to the family's own.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    #[serde(default)]
    pub growth: Option<GrowthBound>,
}

impl SigmaSpec {
    pub fn new(function: SigmaFn) -> Self {
        Self {
            function,
            lipschitz: None,
            growth: None,
        }
    }

    pub fn additive() -> Self {
        Self::new(SigmaFn::Constant { value: 1.0 })
    }

    pub fn with_growth(mut self, constant: f64, exponent: f64) -> Self {
        self.growth = Some(GrowthBound { constant, exponent });
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.function.eval(x)
    }

    /// Deterministic sample points for spot checks of the declared constants.
    fn sample_points() -> Vec<f64> {
        let mut pts: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).collect();
        pts.extend([-1e3, -55.5, -20.0, 17.0, 42.0, 1e3, 1e6, -1e6]);
        pts
    }

    /// Spot-checks the Lipschitz bound and, when declared, the growth bound.
    pub fn validate(&self) -> Result<()> {
        self.function.validate()?;
        let lip = self.lipschitz.unwrap_or_else(|| self.function.lipschitz());
        if !(lip.is_finite() && lip >= 0.0) {
            return Err(invalid("sigma.lipschitz", format!("must be finite, got {lip}")));
        }
        let pts = Self::sample_points();
        let pairs = (0..pts.len()).flat_map(|i| (i + 1..pts.len()).step_by(37).map(move |j| (i, j)));
        for (i, j) in pairs {
            let (x, y) = (pts[i], pts[j]);
            let lhs = (self.eval(x) - self.eval(y)).abs();
            if lhs > lip * (x - y).abs() * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Hypothesis(format!(
                    "|σ({x}) - σ({y})| = {lhs} exceeds the declared Lipschitz constant {lip}"
                )));
            }
        }
        if let Some(g) = self.growth {
            for &x in &pts {
                let bound = g.constant * (1.0 + x.abs().powf(g.exponent));
                if self.eval(x).abs() > bound * (1.0 + 1e-12) {
                    return Err(Error::Hypothesis(format!(
                        "|σ({x})| = {} exceeds the declared growth bound {} (1 + |x|^{})",
                        self.eval(x).abs(),
                        g.constant,
                        g.exponent
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Initial condition `ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Constant { value: f64 },
    /// `ψ(y) = amplitude · g(offset, y)` with the problem's kernel.
    KernelBump { offset: f64, amplitude: f64 },
    /// Radial profile `ψ(y) = f(|y|)` linearly interpolated between
    /// `(radii[i], values[i])` and held constant outside.
    Radial { radii: Vec<f64>, values: Vec<f64> },
}

impl InitialCondition {
    pub fn eval(&self, kernel: &KernelSpec, y: &[f64]) -> f64 {
        match self {
            InitialCondition::Constant { value } => *value,
            InitialCondition::KernelBump { offset, amplitude } => amplitude * kernel.density(*offset, y),
            InitialCondition::Radial { radii, values } => {
                let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                if r <= radii[0] {
                    return values[0];
                }
                for i in 1..radii.len() {
                    if r <= radii[i] {
                        let w = (r - radii[i - 1]) / (radii[i] - radii[i - 1]);
                        return values[i - 1] * (1.0 - w) + values[i] * w;
                    }
                }
                values[values.len() - 1]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            InitialCondition::Constant { value } => *value == 0.0,
            InitialCondition::KernelBump { amplitude, .. } => *amplitude == 0.0,
            InitialCondition::Radial { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Constant { value } if !value.is_finite() => {
                Err(invalid("psi", "constant must be finite"))
            }
            InitialCondition::KernelBump { offset, amplitude } if !(*offset > 0.0 && amplitude.is_finite()) => {
                Err(invalid("psi", "kernel bump needs a positive offset and finite amplitude"))
            }
            InitialCondition::Radial { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(invalid("psi", "radial profile needs matching nonempty radii and values"));
                }
                if radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] < 0.0 {
                    return Err(invalid("psi", "radii must be nonnegative and strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("psi", "profile values must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Time steps and lattice spacing of the solution grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub time_steps: usize,
    pub spacing: f64,
}

/// Quadrature resolution of the deterministic integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Panels per axis across the kernel window.
    pub panels: usize,
    /// Nodes per time step for the drift integral.
    pub time_nodes: usize,
    /// Relative disagreement between the base rule and its refinement that counts
    /// as non-convergence.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: 16,
            panels: 4,
            time_nodes: 4,
            tolerance: 1e-7,
        }
    }
}

/// Everything that defines an equation instance apart from the noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kernel: KernelSpec,
    pub sigma: SigmaSpec,
    pub psi: InitialCondition,
    pub noise: LevyMarkSpec,
    pub horizon: f64,
    /// Half-width of the noise box; the solution grid spans it.
    pub noise_radius: f64,
    /// Half-width of the reported evaluation box.
    pub eval_radius: f64,
    pub exponents: ExponentPair,
    pub grid: GridSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    /// Largest admissible kernel mass reaching the evaluation box from outside the
    /// noise box over the horizon.
    #[serde(default = "default_guard_tolerance")]
    pub guard_tolerance: f64,
}

fn default_guard_tolerance() -> f64 {
    1e-4
}

impl ProblemSpec {
    pub fn noise_window(&self) -> SimulationBox {
        SimulationBox {
            horizon: self.horizon,
            radius: self.noise_radius,
            dim: self.kernel.dim(),
        }
    }

    /// Upper bound on the mass of `g(t, ·)`, `t ≤ T`, beyond the guard band
    /// `noise_radius - eval_radius`.
    pub fn guard_mass_bound(&self) -> f64 {
        self.kernel
            .tail_mass(self.horizon, (self.noise_radius - self.eval_radius).max(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.exponents.validate_for(&self.kernel)?;
        self.noise.validate()?;
        if self.noise.declared_p != self.exponents.p || self.noise.declared_q != self.exponents.q {
            return Err(invalid(
                "noise",
                format!(
                    "declared noise exponents ({}, {}) differ from the problem exponents ({}, {})",
                    self.noise.declared_p, self.noise.declared_q, self.exponents.p, self.exponents.q
                ),
            ));
        }
        self.sigma.validate()?;
        self.psi.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.noise_radius.is_finite() && self.noise_radius > 0.0) {
            return Err(invalid("noise_radius", "must be positive"));
        }
        if !(self.eval_radius >= 0.0 && self.eval_radius <= self.noise_radius) {
            return Err(invalid(
                "eval_radius",
                format!("must lie in [0, noise_radius = {}]", self.noise_radius),
            ));
        }
        let guard = self.guard_mass_bound();
        if guard > self.guard_tolerance {
            return Err(invalid(
                "eval_radius",
                format!(
                    "kernel mass {guard:.3e} crosses the guard band (tolerance {:.1e}); widen noise_radius or shrink eval_radius",
                    self.guard_tolerance
                ),
            ));
        }
        if self.grid.time_steps == 0 {
            return Err(invalid("grid.time_steps", "must be positive"));
        }
        if !(self.grid.spacing.is_finite() && self.grid.spacing > 0.0) {
            return Err(invalid("grid.spacing", "must be positive"));
        }
        let q = self.quadrature;
        if q.nodes == 0 || q.panels == 0 || q.time_nodes == 0 || !(q.tolerance > 0.0) {
            return Err(invalid("quadrature", "node counts and tolerance must be positive"));
        }
        Ok(())
    }

    /// Rejects a declared growth exponent above `q/p`, the hypothesis under which
    /// the solution keeps bounded `q`-th moments.
    pub fn check_moment_hypothesis(&self) -> Result<GrowthBound> {
        let g = self.sigma.growth.ok_or_else(|| {
            Error::Hypothesis("the moment check needs a declared growth bound for sigma".into())
        })?;
        let limit = self.exponents.q / self.exponents.p;
        if g.exponent > limit {
            return Err(Error::Hypothesis(format!(
                "growth exponent gamma = {} exceeds q/p = {limit}; bounded q-th moments need |sigma(x)| <= C(1 + |x|^gamma) with gamma in [0, q/p]",
                g.exponent
            )));
        }
        self.sigma.validate()?;
        Ok(g)
    }
}
