use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{Estimate, SeedValue, StudyPoint, StudyReport};
use super::{empirical_bp_norm, empirical_moment_sup, exact_options, EnsembleConfig};
use crate::error::{invalid, Result};
use crate::kernels::picard_decay_bound;
use crate::noise::{
    exceedance_intensity, sample_noise, shell_bound, LevyMarkSpec, MarkFamily, NoiseRealization,
    SimulationBox, StoppingConfig, StoppingTime,
};
use crate::seeds::realization_seed;
use crate::solver::{FieldGrid, SolveOptions, Solver};

/// Largest relative increase of the moment ladder between its two largest boxes that
/// still counts as bounded.
pub const DEFAULT_MOMENT_SLACK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationMode {
    /// Big jumps with `|z| > L` removed.
    JumpSize,
    /// Big jumps outside `[-L, L]^d` removed.
    Support,
}

impl TruncationMode {
    fn apply(self, real: &NoiseRealization, level: f64) -> NoiseRealization {
        match self {
            TruncationMode::JumpSize => real.truncate_jump_size(level),
            TruncationMode::Support => real.restrict_support(level),
        }
    }

    /// Smallest `L` from which the truncation keeps every big atom in `atoms`.
    fn stabilization_level<'a, I: Iterator<Item = &'a crate::noise::Atom>>(self, atoms: I, dim: usize) -> f64 {
        atoms
            .filter(|a| a.is_big())
            .map(|a| match self {
                TruncationMode::JumpSize => a.z.abs(),
                TruncationMode::Support => a.position(dim).iter().fold(0.0, |m: f64, c| m.max(c.abs())),
            })
            .fold(0.0, f64::max)
    }

    pub fn name(self) -> &'static str {
        match self {
            TruncationMode::JumpSize => "jump-size",
            TruncationMode::Support => "support",
        }
    }
}

/// Zeroes the levels after `tau` and restricts to the box `|x|_∞ ≤ radius`.
fn stopped_restriction(field: &FieldGrid, tau: StoppingTime, radius: f64) -> FieldGrid {
    let mut out = field.restrict(radius);
    for k in 0..out.geometry.levels() {
        if !tau.covers(out.geometry.times[k]) {
            out.level_mut(k).iter_mut().for_each(|v| *v = 0.0);
        }
    }
    out
}

fn sup_abs(field: &FieldGrid) -> f64 {
    field.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check_increasing(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid(name, "must not be empty"));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(name, "must be positive, finite and strictly increasing"));
    }
    Ok(())
}

struct TruncationSeed {
    seed: u64,
    stabilization: f64,
    gaps: Vec<f64>,
    diffs: Vec<FieldGrid>,
}

/// Coupled comparison of `Y_L` (noise truncated at `L`) with the reference `Y` driven
/// by `M^N`, on `[0, τ(N)]` and the evaluation box.
///
/// Both solves of a seed share one realization and are run to their exact fixed
/// points, so a gap is exactly zero once the truncation keeps every atom that acts
/// before `τ(N)`.
pub fn truncation_convergence_study(
    cfg: &EnsembleConfig,
    mode: TruncationMode,
    l_grid: &[f64],
) -> Result<StudyReport> {
    cfg.validate()?;
    check_increasing("l_grid", l_grid)?;
    let problem = &cfg.problem;
    let solver = Solver::new(problem.clone())?;
    let opts = exact_options(problem, &cfg.solve);
    let dim = problem.kernel.dim();
    let r_eval = problem.eval_radius;
    info!("truncation study ({}) over {} seeds", mode.name(), cfg.n_realizations);

    let per_seed = cfg.map_realizations(|_, real| {
        let tau = real.stopping_time(&cfg.stopping);
        let reference = solver.solve_untruncated(&real.truncate_adaptive(&cfg.stopping), &opts)?;
        let reference = stopped_restriction(&reference.field, tau, r_eval);
        let acting = real.atoms.iter().filter(|a| tau.time().is_none_or(|s| a.t < s));
        let stabilization = mode.stabilization_level(acting, dim);
        let mut gaps = Vec::with_capacity(l_grid.len());
        let mut diffs = Vec::with_capacity(l_grid.len());
        for &level in l_grid {
            let sol = solver.solve_untruncated(&mode.apply(&real, level), &opts)?;
            let mut diff = stopped_restriction(&sol.field, tau, r_eval);
            diff.values
                .iter_mut()
                .zip(&reference.values)
                .for_each(|(a, b)| *a -= b);
            gaps.push(sup_abs(&diff));
            diffs.push(diff);
        }
        Ok(TruncationSeed { seed: real.seed, stabilization, gaps, diffs })
    })?;

    let mut report = StudyReport::new(
        format!("truncation-{}", mode.name()),
        "ensemble norm of (Y_L - Y) on [0, tau(N)] x eval box",
    );
    let p = problem.exponents.p;
    for (j, &level) in l_grid.iter().enumerate() {
        let diffs: Vec<FieldGrid> = per_seed.iter().map(|s| s.diffs[j].clone()).collect();
        let estimate = empirical_bp_norm(&diffs, p, problem.horizon, r_eval)?;
        report.points.push(StudyPoint { param: level, estimate });
    }
    let mut nonincreasing = 0usize;
    let mut stabilized = true;
    let mut final_zero = true;
    for s in &per_seed {
        if s.gaps.windows(2).all(|w| w[1] <= w[0]) {
            nonincreasing += 1;
        }
        for (&level, &gap) in l_grid.iter().zip(&s.gaps) {
            report.traces.push(SeedValue { seed: s.seed, param: level, value: Some(gap) });
            if level >= s.stabilization && gap != 0.0 {
                stabilized = false;
            }
        }
        final_zero &= *s.gaps.last().expect("non-empty grid") == 0.0;
    }
    let seeds = per_seed.len();
    report.verdicts.insert("pathwise_nonincreasing".into(), nonincreasing == seeds);
    report.verdicts.insert("final_gap_zero".into(), final_zero);
    report.verdicts.insert("exact_stabilization".into(), stabilized);
    report.verdicts.insert(
        "ensemble_nonincreasing".into(),
        report.points.windows(2).all(|w| w[1].estimate.value <= w[0].estimate.value),
    );
    report.metrics.insert("seeds".into(), seeds as f64);
    report.metrics.insert("nonincreasing_seeds".into(), nonincreasing as f64);
    report.metrics.insert(
        "max_stabilization_level".into(),
        per_seed.iter().map(|s| s.stabilization).fold(0.0, f64::max),
    );
    if nonincreasing < seeds {
        report.notes.push(format!(
            "{} of {seeds} seeds have a gap that grows somewhere along the L grid",
            seeds - nonincreasing
        ));
    }
    Ok(report)
}

/// Whether `seq` is non-increasing from some index in its first half on, strictly
/// decreasing while positive there, and ends below `tol`.
pub fn eventually_decreasing(seq: &[f64], tol: f64) -> bool {
    if seq.is_empty() || seq.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let last_rise = seq
        .windows(2)
        .rposition(|w| !(w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0)))
        .map_or(0, |i| i + 1);
    last_rise <= seq.len().div_ceil(2) && seq[seq.len() - 1] < tol
}

struct PicardSeed {
    seed: u64,
    increments: Vec<f64>,
    diverged: bool,
    fields: Vec<FieldGrid>,
}

/// Increments `uⁿ = Yⁿ - Yⁿ⁻¹` of the Picard scheme driven by `M^N` for
/// `n = 1..=n_max`, compared with the decay bound.
pub fn picard_decay_study(cfg: &EnsembleConfig, n_max: usize) -> Result<StudyReport> {
    cfg.validate()?;
    if n_max == 0 {
        return Err(invalid("n_max", "must be positive"));
    }
    let problem = &cfg.problem;
    let solver = Solver::new(problem.clone())?;
    let r_eval = problem.eval_radius;
    let opts = SolveOptions::exact(n_max);

    let per_seed = cfg.map_realizations(|_, real| {
        let mut fields = Vec::with_capacity(n_max);
        let mut increments = Vec::with_capacity(n_max);
        let sol = solver.iterate(&real.truncate_adaptive(&cfg.stopping), &opts, |_, prev, next| {
            let mut u = next.restrict(r_eval);
            let prev = prev.restrict(r_eval);
            u.values.iter_mut().zip(&prev.values).for_each(|(a, b)| *a -= b);
            increments.push(sup_abs(&u));
            fields.push(u);
        })?;
        let diverged = increments.iter().any(|v| !v.is_finite()) || !sol.field.all_finite();
        if !diverged {
            // an exact fixed point repeats itself
            let zero = FieldGrid::zeros(fields[0].geometry.clone(), problem.exponents.p);
            while increments.len() < n_max {
                increments.push(0.0);
                fields.push(zero.clone());
            }
        }
        Ok(PicardSeed { seed: real.seed, increments, diverged, fields })
    })?;

    let mut report = StudyReport::new("picard", "ensemble norm of u^n = Y^n - Y^(n-1)");
    let p = problem.exponents.p;
    let diverged = per_seed.iter().filter(|s| s.diverged).count();
    if diverged > 0 {
        report.notes.push(format!(
            "{diverged} seeds produced non-finite increments: the hypotheses of the decay bound fail for this configuration"
        ));
    } else {
        for n in 0..n_max {
            let fields: Vec<FieldGrid> = per_seed.iter().map(|s| s.fields[n].clone()).collect();
            let estimate = empirical_bp_norm(&fields, p, problem.horizon, r_eval)?;
            report.points.push(StudyPoint { param: (n + 1) as f64, estimate });
        }
    }
    let tol = cfg.solve.tol;
    let mut decreasing = 0usize;
    let mut below = 0usize;
    for s in &per_seed {
        for (n, v) in s.increments.iter().enumerate() {
            report.traces.push(SeedValue {
                seed: s.seed,
                param: (n + 1) as f64,
                value: v.is_finite().then_some(*v),
            });
        }
        if !s.diverged && eventually_decreasing(&s.increments, tol) {
            decreasing += 1;
        }
        if !s.diverged && s.increments.len() == n_max && s.increments[n_max - 1] < tol {
            below += 1;
        }
    }
    let seeds = per_seed.len();
    report.metrics.insert("seeds".into(), seeds as f64);
    report.metrics.insert("eventually_decreasing_fraction".into(), decreasing as f64 / seeds as f64);
    report.metrics.insert("below_tol_fraction".into(), below as f64 / seeds as f64);
    report.verdicts.insert("eventually_decreasing".into(), decreasing == seeds);
    report.verdicts.insert("below_tol_by_n_max".into(), below == seeds);
    if let Some((c, intercept)) = fit_decay_rate(&report.points, cfg)? {
        report.metrics.insert("fitted_rate".into(), c);
        report.metrics.insert("fitted_log_intercept".into(), intercept);
    }
    if !cfg.problem.exponents.eta_feasible(&cfg.problem.kernel) {
        report.notes.push("eta lies outside its feasibility window; the decay bound does not apply".into());
    }
    Ok(report)
}

/// Least-squares fit of `log ‖uⁿ‖ = c + log bound(n, C)` over the positive points;
/// returns `(C, c)`.
fn fit_decay_rate(points: &[StudyPoint], cfg: &EnsembleConfig) -> Result<Option<(f64, f64)>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for pt in points.iter().filter(|pt| pt.estimate.value > 0.0) {
        let n = pt.param as u32;
        let base = picard_decay_bound(n, 1.0, &cfg.problem.exponents, &cfg.problem.kernel)?;
        xs.push(n as f64);
        ys.push(pt.estimate.value.ln() - base.log_value);
    }
    if xs.len() < 2 {
        return Ok(None);
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(Some((slope.exp(), my - slope * mx)))
}

/// Sup over each nested box of the ensemble `q`-th moment of `Y 1_{[0, τ(N)]}`.
///
/// Refuses when the declared growth exponent of `σ` exceeds `q/p`.
pub fn moment_growth_check(cfg: &EnsembleConfig, ladder: &[f64], slack: f64) -> Result<StudyReport> {
    let problem = &cfg.problem;
    problem.check_moment_hypothesis()?;
    cfg.validate()?;
    check_increasing("ladder", ladder)?;
    if ladder.len() < 2 {
        return Err(invalid("ladder", "needs at least two boxes"));
    }
    if ladder[ladder.len() - 1] > problem.eval_radius * (1.0 + 1e-12) {
        return Err(invalid("ladder", format!("boxes must fit in the evaluation box of radius {}", problem.eval_radius)));
    }
    if !(slack.is_finite() && slack >= 0.0) {
        return Err(invalid("slack", "must be nonnegative"));
    }
    let solver = Solver::new(problem.clone())?;
    let q = problem.exponents.q;
    let r_eval = problem.eval_radius;

    let fields = cfg.map_realizations(|_, real| {
        let tau = real.stopping_time(&cfg.stopping);
        let sol = solver.solve(&real, &cfg.stopping, &cfg.solve)?;
        Ok((real.seed, stopped_restriction(&sol.field, tau, r_eval)))
    })?;
    let seeds: Vec<u64> = fields.iter().map(|f| f.0).collect();
    let fields: Vec<FieldGrid> = fields.into_iter().map(|f| f.1).collect();

    let mut report = StudyReport::new("moment", "sup over the box of E|Y|^q on [0, tau(N)]");
    for &r in ladder {
        let estimate = empirical_moment_sup(&fields, q, problem.horizon, r)?;
        report.points.push(StudyPoint { param: r, estimate });
        for (seed, f) in seeds.iter().zip(&fields) {
            let single = empirical_moment_sup(std::slice::from_ref(f), q, problem.horizon, r)?;
            report.traces.push(SeedValue { seed: *seed, param: r, value: Some(single.value) });
        }
    }
    let top = report.points[ladder.len() - 1].estimate.value;
    let prev = report.points[ladder.len() - 2].estimate.value;
    let increase = if prev > 0.0 { (top - prev) / prev } else if top == 0.0 { 0.0 } else { f64::INFINITY };
    report.metrics.insert("relative_increase".into(), increase);
    report.metrics.insert("slack".into(), slack);
    report.verdicts.insert("bounded".into(), increase <= slack);
    if let MarkFamily::SymmetricStable { alpha, .. } = problem.noise.family {
        if alpha - q < 0.25 {
            let msg = format!("q = {q} is close to the tail index {alpha}; the moment estimates have large variance");
            warn!("{msg}");
            report.notes.push(msg);
        }
    }
    Ok(report)
}

/// Inputs of the stopping-time study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingStudy {
    pub noise: LevyMarkSpec,
    pub window: SimulationBox,
    pub eta: f64,
    pub levels: Vec<u32>,
    pub n_realizations: usize,
    pub master_seed: u64,
}

/// Empirical law of `τ(N)` along a ladder of levels, with the exact exceedance
/// intensity and the shell bound as references.
pub fn stopping_time_study(study: &StoppingStudy) -> Result<StudyReport> {
    study.noise.validate()?;
    if study.levels.is_empty() || study.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("levels", "must be non-empty and strictly increasing"));
    }
    if study.n_realizations < 2 {
        return Err(invalid("n_realizations", "need at least two realizations"));
    }
    let cfgs: Vec<StoppingConfig> = study
        .levels
        .iter()
        .map(|&n| StoppingConfig::new(n, study.eta))
        .collect::<Result<_>>()?;
    cfgs[0].check(study.window.dim, study.noise.declared_q)?;

    let samples: Vec<(u64, Vec<StoppingTime>)> = (0..study.n_realizations)
        .into_par_iter()
        .map(|i| {
            let seed = realization_seed(study.master_seed, i as u64);
            let real = sample_noise(&study.noise, study.window, seed)?;
            Ok((seed, cfgs.iter().map(|c| real.stopping_time(c)).collect()))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = samples.len() as f64;
    let mut report = StudyReport::new("stopping", "P[tau(N) <= T]");
    let mut violations = 0usize;
    for (seed, taus) in &samples {
        if taus.windows(2).any(|w| !w[0].le(&w[1])) {
            violations += 1;
        }
        for (&level, tau) in study.levels.iter().zip(taus) {
            report.traces.push(SeedValue { seed: *seed, param: level as f64, value: tau.time() });
        }
    }
    let mut within_bound = true;
    let mut matches_exact = true;
    for (j, (&level, cfg)) in study.levels.iter().zip(&cfgs).enumerate() {
        let hits = samples.iter().filter(|(_, t)| t[j].time().is_some()).count() as f64;
        let p_hat = hits / n;
        let intensity = exceedance_intensity(&study.noise, cfg, &study.window);
        let exact = -(-intensity).exp_m1();
        let sigma = (exact * (1.0 - exact) / n).sqrt();
        within_bound &= p_hat <= intensity + 3.0 * sigma;
        matches_exact &= (p_hat - exact).abs() <= 3.0 * sigma;
        report.points.push(StudyPoint {
            param: level as f64,
            estimate: Estimate { value: p_hat, stderr: (p_hat * (1.0 - p_hat) / n).sqrt(), samples: samples.len() },
        });
        report.metrics.insert(format!("intensity_N{level}"), intensity);
        report.metrics.insert(format!("exact_probability_N{level}"), exact);
        report.metrics.insert(format!("shell_bound_N{level}"), shell_bound(&study.noise, cfg, &study.window));
    }
    report.metrics.insert("monotonicity_violations".into(), violations as f64);
    report.verdicts.insert("monotone_pathwise".into(), violations == 0);
    report.verdicts.insert(
        "probability_strictly_decreasing".into(),
        report.points.windows(2).all(|w| w[1].estimate.value < w[0].estimate.value),
    );
    report.verdicts.insert("within_intensity_bound".into(), within_bound);
    report.verdicts.insert("matches_exact_probability".into(), matches_exact);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eventual_decrease_verdicts() {
        assert!(eventually_decreasing(&[3.0, 5.0, 2.0, 1.0, 0.0, 0.0], 1e-6));
        assert!(eventually_decreasing(&[1.0, 0.0, 0.0, 0.0], 1e-6));
        assert!(!eventually_decreasing(&[1.0, 0.5, 0.6, 0.1], 1e-6));
        assert!(!eventually_decreasing(&[1.0, 2.0, 3.0, 4.0, 5.0, 0.0], 1e-6));
        assert!(!eventually_decreasing(&[f64::NAN, 0.0], 1e-6));
        assert!(!eventually_decreasing(&[1.0, 0.9, 0.8, 0.5, 0.5, 0.0], 1e-6));
    }
}
