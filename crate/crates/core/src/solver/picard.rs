use log::debug;
use serde::{Deserialize, Serialize};

use super::convolution::{initial_field, Convolver};
use super::grid::{FieldGrid, GridGeometry};
use super::problem::ProblemSpec;
use crate::error::{Error, Result};
use crate::noise::{NoiseRealization, StoppingConfig, StoppingTime};

/// Stopping rule of the Picard iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once `max |Yⁿ - Yⁿ⁻¹|` over the grid falls below `tol`; `tol = 0` asks
    /// for the exact fixed point.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50,
        }
    }
}

impl SolveOptions {
    pub fn exact(max_iter: usize) -> Self {
        Self { tol: 0.0, max_iter }
    }

    fn reached(&self, increment: f64) -> bool {
        increment == 0.0 || increment < self.tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// `max |Yⁿ - Yⁿ⁻¹|` for `n = 1, 2, …`.
    pub increments: Vec<f64>,
    /// Picard steps before the increment fell below tolerance.
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// Truncation level of the noise, absent for untruncated solves.
    pub level: Option<u32>,
    pub stopping_time: Option<StoppingTime>,
    /// Kernel mass reaching the evaluation box from outside the noise box.
    pub guard_mass: f64,
    pub atoms: usize,
}

/// A converged field on the whole noise-box grid with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub field: FieldGrid,
    pub diagnostics: SolveDiagnostics,
}

impl Solution {
    /// The field restricted to the evaluation box.
    pub fn eval_field(&self, eval_radius: f64) -> FieldGrid {
        self.field.restrict(eval_radius)
    }
}

/// A validated problem with its grid and initial field, shared across realizations.
#[derive(Debug, Clone)]
pub struct Solver {
    problem: ProblemSpec,
    geometry: GridGeometry,
    y0: FieldGrid,
}

impl Solver {
    pub fn new(problem: ProblemSpec) -> Result<Self> {
        problem.validate()?;
        let geometry = GridGeometry::uniform(
            problem.horizon,
            problem.grid.time_steps,
            problem.noise_radius,
            problem.grid.spacing,
            problem.kernel.dim(),
        );
        let y0 = initial_field(
            &problem.psi,
            &problem.kernel,
            &geometry,
            &problem.quadrature,
            problem.exponents.p,
        )?;
        Ok(Self { problem, geometry, y0 })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// `Y₀` on the full grid.
    pub fn initial(&self) -> &FieldGrid {
        &self.y0
    }

    /// `Y₀ + J(prev)` on every node, driven by the atoms of `real` as given.
    pub fn picard_step(&self, real: &NoiseRealization, prev: &FieldGrid) -> Result<FieldGrid> {
        prev.check_same_grid(&self.y0)?;
        let conv = Convolver::new(&self.problem, real, &self.geometry)?;
        let mut next = self.y0.clone();
        let weights = conv.weights(prev);
        conv.apply(&self.y0, prev, &weights, 0, &mut next);
        Ok(next)
    }

    /// Picard iteration from `Y⁰ = Y₀` on the atoms of `real` as given. The observer
    /// sees `(n, Yⁿ⁻¹, Yⁿ)` after each step. Returns the last iterate whether or not
    /// the tolerance was reached.
    ///
    /// Level `k` of `Yⁿ` reads only levels `< k` of `Yⁿ⁻¹`, so levels on which the
    /// two previous iterates agree bitwise are carried over instead of recomputed.
    pub fn iterate<F>(&self, real: &NoiseRealization, opts: &SolveOptions, mut observer: F) -> Result<Solution>
    where
        F: FnMut(usize, &FieldGrid, &FieldGrid),
    {
        let conv = Convolver::new(&self.problem, real, &self.geometry)?;
        let levels = self.geometry.levels();
        let mut prev = self.y0.clone();
        let mut settled = 0usize;
        let mut increments = Vec::new();
        let mut converged = false;
        for n in 1..=opts.max_iter {
            let mut next = prev.clone();
            if settled < levels {
                let weights = conv.weights(&prev);
                conv.apply(&self.y0, &prev, &weights, settled, &mut next);
            }
            let increment = next.sup_distance(&prev)?;
            increments.push(increment);
            observer(n, &prev, &next);
            // levels ≤ first difference of (next, prev) are final for the next step
            settled = (next.first_differing_level(&prev) + 1).min(levels);
            prev = next;
            if !increment.is_finite() {
                break;
            }
            if opts.reached(increment) {
                converged = true;
                break;
            }
        }
        debug!("picard: {} steps, increments {:?}", increments.len(), increments);
        let iterations = if converged { increments.len() - 1 } else { increments.len() };
        Ok(Solution {
            field: prev,
            diagnostics: SolveDiagnostics {
                increments,
                iterations,
                converged,
                tol: opts.tol,
                level: None,
                stopping_time: None,
                guard_mass: self.problem.guard_mass_bound(),
                atoms: conv.atom_count(),
            },
        })
    }

    /// Solves on the atoms of `real` as given; fails when the tolerance is not reached.
    pub fn solve_untruncated(&self, real: &NoiseRealization, opts: &SolveOptions) -> Result<Solution> {
        let sol = self.iterate(real, opts, |_, _, _| {})?;
        if !sol.diagnostics.converged || !sol.field.all_finite() {
            return Err(Error::NotConverged {
                increments: sol.diagnostics.increments,
                tol: opts.tol,
            });
        }
        Ok(sol)
    }

    /// Solves driven by `M^N`: the atoms of `real` with `|z| ≤ N h(x)`.
    pub fn solve(&self, real: &NoiseRealization, cfg: &StoppingConfig, opts: &SolveOptions) -> Result<Solution> {
        cfg.check(self.problem.kernel.dim(), self.problem.exponents.q)?;
        let mut sol = self.solve_untruncated(&real.truncate_adaptive(cfg), opts)?;
        sol.diagnostics.level = Some(cfg.level);
        sol.diagnostics.stopping_time = Some(real.stopping_time(cfg));
        Ok(sol)
    }

    /// `Y^{(N₁)}` on `[0, τ(N₁)]` and `Y^{(Nⱼ)}` on `(τ(Nⱼ₋₁), τ(Nⱼ)]`, nodewise.
    pub fn glue(
        &self,
        real: &NoiseRealization,
        cfg: &StoppingConfig,
        levels: &[u32],
        opts: &SolveOptions,
    ) -> Result<Solution> {
        if levels.is_empty() {
            return Err(crate::error::invalid("levels", "need at least one truncation level"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(crate::error::invalid("levels", "must be strictly increasing"));
        }
        let stops: Vec<StoppingTime> = levels
            .iter()
            .map(|&n| real.stopping_time(&cfg.with_level(n)))
            .collect();
        let times = &self.geometry.times;
        let mut owner = Vec::with_capacity(times.len());
        for &t in times {
            match stops.iter().position(|s| s.covers(t)) {
                Some(j) => owner.push(j),
                None => {
                    let last = stops.len() - 1;
                    return Err(Error::InsufficientLevel {
                        level: levels[last],
                        stop: stops[last].time().unwrap_or(f64::INFINITY),
                        needed: t,
                    });
                }
            }
        }
        let mut out = self.y0.clone();
        let mut diagnostics = None;
        for (j, &n) in levels.iter().enumerate() {
            if !owner.contains(&j) && j + 1 != levels.len() {
                continue;
            }
            let sol = self.solve(real, &cfg.with_level(n), opts)?;
            for (k, _) in owner.iter().enumerate().filter(|(_, &o)| o == j) {
                out.level_mut(k).copy_from_slice(sol.field.level(k));
            }
            diagnostics = Some(sol.diagnostics);
        }
        // diagnostics of the top level, which owns the final stretch
        let mut diagnostics = diagnostics.expect("at least one level solved");
        diagnostics.stopping_time = stops.last().copied();
        Ok(Solution { field: out, diagnostics })
    }
}

/// One Picard step `Y₀ + J(prev)` for `problem` on the atoms of `real`.
pub fn picard_step(problem: &ProblemSpec, real: &NoiseRealization, prev: &FieldGrid) -> Result<FieldGrid> {
    Solver::new(problem.clone())?.picard_step(real, prev)
}

pub fn solve(
    problem: &ProblemSpec,
    real: &NoiseRealization,
    cfg: &StoppingConfig,
    opts: &SolveOptions,
) -> Result<Solution> {
    Solver::new(problem.clone())?.solve(real, cfg, opts)
}

pub fn glue(
    problem: &ProblemSpec,
    real: &NoiseRealization,
    cfg: &StoppingConfig,
    levels: &[u32],
    opts: &SolveOptions,
) -> Result<Solution> {
    Solver::new(problem.clone())?.glue(real, cfg, levels, opts)
}
