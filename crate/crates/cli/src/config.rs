//! Run configuration: TOML with dotted sections (`noise.alpha = 1.2`).

use serde::{Deserialize, Serialize};
use spde_heavy::estimators::{EnsembleConfig, StoppingStudy, TruncationMode, DEFAULT_MOMENT_SLACK};
use spde_heavy::kernels::{ExponentPair, KernelSpec};
use spde_heavy::noise::{LevyMarkSpec, MarkFamily, SimulationBox, StoppingConfig};
use spde_heavy::solver::{
    GridSpec, GrowthBound, InitialCondition, ProblemSpec, QuadratureSpec, SigmaFn, SigmaSpec, SolveOptions,
};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelSection>,
    pub noise: Option<NoiseSection>,
    pub exponents: Option<ExponentSection>,
    #[serde(rename = "box")]
    pub window: Option<BoxSection>,
    pub eval: Option<EvalSection>,
    pub grid: Option<GridSpec>,
    pub quadrature: Option<QuadratureSpec>,
    pub sigma: Option<SigmaSection>,
    pub psi: Option<InitialCondition>,
    pub stopping: Option<StoppingSection>,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Heat,
    Parabolic,
    Generalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub family: KernelFamily,
    pub dim: usize,
    pub m: Option<u32>,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Stable,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub family: NoiseFamily,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub atoms: Option<Vec<f64>>,
    pub rates: Option<Vec<f64>>,
    pub cutoff: f64,
    #[serde(default)]
    pub drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    pub p: f64,
    pub q: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    pub horizon: f64,
    pub radius: f64,
    pub guard_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSection {
    #[serde(flatten)]
    pub function: SigmaFn,
    pub lipschitz: Option<f64>,
    pub growth: Option<GrowthBound>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    /// Glue levels; a plain solve at `stopping.level` when absent.
    pub levels: Option<Vec<u32>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self { levels: None, tol: d.tol, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub size: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self { size: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub mode: TruncationMode,
    pub l_grid: Option<Vec<f64>>,
    pub n_max: usize,
    pub ladder: Option<Vec<f64>>,
    pub slack: f64,
    pub levels: Option<Vec<u32>>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            mode: TruncationMode::JumpSize,
            l_grid: None,
            n_max: 25,
            ladder: None,
            slack: DEFAULT_MOMENT_SLACK,
            levels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    /// Number of equal steps of the `p` grid over `(0, 1 + ρ/(τd))`.
    pub points: usize,
    /// Horizon of the kernel norms.
    pub horizon: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self { points: 50, horizon: 1.0 }
    }
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing `{key}`"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let k = self.kernel.as_ref().ok_or_else(|| missing("kernel"))?;
        let spec = match k.family {
            KernelFamily::Heat => KernelSpec::heat(k.dim)?,
            KernelFamily::Parabolic => {
                let m = k.m.ok_or_else(|| missing("kernel.m"))?;
                KernelSpec::parabolic(m, k.lambda.unwrap_or(1.0), k.dim)?
            }
            KernelFamily::Generalized => KernelSpec::new(
                k.rho.ok_or_else(|| missing("kernel.rho"))?,
                k.tau.ok_or_else(|| missing("kernel.tau"))?,
                k.lambda.ok_or_else(|| missing("kernel.lambda"))?,
                k.dim,
            )?,
        };
        Ok(spec)
    }

    pub fn exponents(&self) -> Result<ExponentPair, CliError> {
        let e = self.exponents.ok_or_else(|| missing("exponents"))?;
        Ok(ExponentPair::new(e.p, e.q, e.eta)?)
    }

    pub fn noise(&self) -> Result<LevyMarkSpec, CliError> {
        let n = self.noise.as_ref().ok_or_else(|| missing("noise"))?;
        let e = self.exponents.ok_or_else(|| missing("exponents"))?;
        let family = match n.family {
            NoiseFamily::Stable => MarkFamily::SymmetricStable {
                alpha: n.alpha.ok_or_else(|| missing("noise.alpha"))?,
                scale: n.scale.unwrap_or(1.0),
            },
            NoiseFamily::Discrete => MarkFamily::Discrete {
                atoms: n.atoms.clone().ok_or_else(|| missing("noise.atoms"))?,
                rates: n.rates.clone().ok_or_else(|| missing("noise.rates"))?,
            },
        };
        Ok(LevyMarkSpec::new(family, n.cutoff, n.drift, e.p, e.q)?)
    }

    pub fn window(&self) -> Result<SimulationBox, CliError> {
        let b = self.window.ok_or_else(|| missing("box"))?;
        Ok(SimulationBox::new(b.horizon, b.radius, self.kernel()?.dim())?)
    }

    pub fn stopping(&self) -> Result<StoppingConfig, CliError> {
        let s = self.stopping.ok_or_else(|| missing("stopping.level"))?;
        Ok(StoppingConfig::new(s.level, self.exponents()?.eta)?)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.solve.tol, max_iter: self.solve.max_iter }
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let b = self.window.ok_or_else(|| missing("box"))?;
        let sigma = self.sigma.as_ref().ok_or_else(|| missing("sigma"))?;
        let problem = ProblemSpec {
            kernel: self.kernel()?,
            sigma: SigmaSpec {
                function: sigma.function,
                lipschitz: sigma.lipschitz,
                growth: sigma.growth,
            },
            psi: self.psi.clone().ok_or_else(|| missing("psi"))?,
            noise: self.noise()?,
            horizon: b.horizon,
            noise_radius: b.radius,
            eval_radius: self.eval.ok_or_else(|| missing("eval.radius"))?.radius,
            exponents: self.exponents()?,
            grid: self.grid.ok_or_else(|| missing("grid"))?,
            quadrature: self.quadrature.unwrap_or_default(),
            guard_tolerance: b.guard_tolerance.unwrap_or(1e-4),
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn ensemble(&self, master_seed: u64) -> Result<EnsembleConfig, CliError> {
        let cfg = EnsembleConfig {
            n_realizations: self.ensemble.size,
            master_seed,
            problem: self.problem()?,
            stopping: self.stopping()?,
            solve: self.solve_options(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn stopping_study(&self, master_seed: u64) -> Result<StoppingStudy, CliError> {
        Ok(StoppingStudy {
            noise: self.noise()?,
            window: self.window()?,
            eta: self.exponents()?.eta,
            levels: self.study.levels.clone().ok_or_else(|| missing("study.levels"))?,
            n_realizations: self.ensemble.size,
            master_seed,
        })
    }
}
