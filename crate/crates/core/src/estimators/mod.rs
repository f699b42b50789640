//! Ensemble estimates over independent realizations.
//!
//! Realizations are solved in parallel and reduced sequentially in seed order, so
//! every number in a report depends only on the master seed and the configuration.

mod report;
mod studies;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::{sample_noise, NoiseRealization, StoppingConfig};
use crate::seeds::{realization_seed, rng_from_seed};
use crate::solver::{FieldGrid, ProblemSpec, SolveOptions};

pub use report::{Estimate, SeedValue, StudyPoint, StudyReport, REPORT_SCHEMA};
pub use studies::{
    eventually_decreasing, moment_growth_check, picard_decay_study, stopping_time_study,
    truncation_convergence_study, StoppingStudy, TruncationMode, DEFAULT_MOMENT_SLACK,
};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
const BOOTSTRAP_SEED: u64 = 0x5EED_B007_57A7_0001;
/// Ensemble size for moment studies. The estimator variance is large when `q` is
/// close to the tail index of the marks.
pub const DEFAULT_MOMENT_ENSEMBLE: usize = 256;

/// Ensemble of realizations of one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    pub problem: ProblemSpec,
    pub stopping: StoppingConfig,
    #[serde(default)]
    pub solve: SolveOptions,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations < 2 {
            return Err(invalid("n_realizations", "standard errors need at least two realizations"));
        }
        self.problem.validate()?;
        self.stopping
            .check(self.problem.kernel.dim(), self.problem.exponents.q)
    }

    pub fn seed(&self, index: usize) -> u64 {
        realization_seed(self.master_seed, index as u64)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_realizations).map(|i| self.seed(i)).collect()
    }

    pub fn realization(&self, index: usize) -> Result<NoiseRealization> {
        sample_noise(&self.problem.noise, self.problem.noise_window(), self.seed(index))
    }

    /// Runs `job` on every realization in parallel and returns the results in seed
    /// order; the first failing seed (in order) aborts the run.
    pub fn map_realizations<T, F>(&self, job: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize, NoiseRealization) -> Result<T> + Sync,
    {
        let results: Vec<Result<T>> = (0..self.n_realizations)
            .into_par_iter()
            .map(|i| {
                let real = self.realization(i)?;
                assert_eq!(real.seed, self.seed(i), "realization re-sampled under a different seed");
                job(i, real)
            })
            .collect();
        results.into_iter().collect()
    }
}

fn check_ensemble(fields: &[FieldGrid]) -> Result<()> {
    let first = fields
        .first()
        .ok_or_else(|| invalid("fields", "the ensemble is empty"))?;
    for f in &fields[1..] {
        first.check_same_grid(f)?;
    }
    Ok(())
}

/// Nodes of `[0, horizon] × [-radius, radius]^d`.
fn node_mask(field: &FieldGrid, horizon: f64, radius: f64) -> Vec<usize> {
    let g = &field.geometry;
    let tol = 1e-12 * (1.0 + horizon.abs() + radius.abs());
    let sites = g.sites();
    let mut out = Vec::new();
    for (k, &t) in g.times.iter().enumerate() {
        if t > horizon + tol {
            continue;
        }
        for site in 0..sites {
            let x = g.site(site);
            if x[..g.dim].iter().all(|c| c.abs() <= radius + tol) {
                out.push(k * sites + site);
            }
        }
    }
    out
}

fn sup_of_means(fields: &[FieldGrid], nodes: &[usize], exponent: f64, weights: &[usize]) -> f64 {
    let n: usize = weights.iter().sum();
    nodes
        .iter()
        .map(|&i| {
            let s: f64 = fields
                .iter()
                .zip(weights)
                .filter(|(_, &w)| w > 0)
                .map(|(f, &w)| w as f64 * f.values[i].abs().powf(exponent))
                .sum();
            s / n as f64
        })
        .fold(0.0, f64::max)
}

/// `sup` over nodes in `[0, T] × [-R, R]^d` of the ensemble mean of `|Y|^q`, with a
/// bootstrap standard error over realizations.
pub fn empirical_moment_sup(fields: &[FieldGrid], q: f64, horizon: f64, radius: f64) -> Result<Estimate> {
    moment_estimate(fields, q, horizon, radius, 1.0)
}

/// `‖Y‖_{p,T,R}`: `sup` over nodes of `(E|Y|^p)^{1/max(p,1)}` with a bootstrap
/// standard error.
pub fn empirical_bp_norm(fields: &[FieldGrid], p: f64, horizon: f64, radius: f64) -> Result<Estimate> {
    moment_estimate(fields, p, horizon, radius, 1.0 / p.max(1.0))
}

fn moment_estimate(fields: &[FieldGrid], q: f64, horizon: f64, radius: f64, outer: f64) -> Result<Estimate> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(invalid("p", format!("moment exponent must be positive, got {q}")));
    }
    check_ensemble(fields)?;
    let nodes = node_mask(&fields[0], horizon, radius);
    if nodes.is_empty() {
        return Err(Error::GridMismatch(format!(
            "no grid node in [0, {horizon}] x [-{radius}, {radius}]^d"
        )));
    }
    let n = fields.len();
    let stat = |w: &[usize]| sup_of_means(fields, &nodes, q, w).powf(outer);
    let value = stat(&vec![1; n]);
    let stderr = if n < 2 {
        f64::NAN
    } else {
        let mut rng = rng_from_seed(BOOTSTRAP_SEED);
        let mut draws = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
        let mut w = vec![0usize; n];
        for _ in 0..BOOTSTRAP_RESAMPLES {
            w.iter_mut().for_each(|c| *c = 0);
            for _ in 0..n {
                w[rng.random_range(0..n)] += 1;
            }
            draws.push(stat(&w));
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        var.sqrt()
    };
    Ok(Estimate { value, stderr, samples: n })
}

/// Common solve options of a study: exact fixed points so that coupled runs can be
/// compared for bitwise equality.
fn exact_options(problem: &ProblemSpec, opts: &SolveOptions) -> SolveOptions {
    SolveOptions::exact(opts.max_iter.max(problem.grid.time_steps + 2))
}
