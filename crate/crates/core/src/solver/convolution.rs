//! Deterministic and stochastic convolutions against the kernel.

use rayon::prelude::*;

use super::grid::{FieldGrid, GridGeometry};
use super::problem::{InitialCondition, ProblemSpec, QuadratureSpec, SigmaSpec};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, MAX_DIM};
use crate::noise::{Atom, NoiseRealization};
use crate::quadrature::{integrate_box, GaussLegendre};
use crate::summation::CompensatedSum;

/// Kernel mass ignored when cutting the integration window around `x`.
const WINDOW_MASS: f64 = 1e-15;

/// `g(dt, ·)` with its time-dependent factors evaluated once.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KernelSlice {
    prefactor: f64,
    coef: f64,
    half_rho: f64,
    quadratic: bool,
}

impl KernelSlice {
    pub(crate) fn new(kernel: &KernelSpec, dt: f64) -> Self {
        let rho = kernel.rho();
        if dt <= 0.0 {
            return Self { prefactor: 0.0, coef: 0.0, half_rho: 0.5 * rho, quadratic: rho == 2.0 };
        }
        let t_tau = if kernel.tau() == 1.0 { dt } else { dt.powf(kernel.tau()) };
        Self {
            prefactor: kernel.norm_const() * dt.powf(-kernel.singularity_exponent()),
            coef: kernel.lambda_cap() / t_tau,
            half_rho: 0.5 * rho,
            quadratic: rho == 2.0,
        }
    }

    #[inline]
    pub(crate) fn eval_sq(&self, r2: f64) -> f64 {
        if self.prefactor == 0.0 {
            return 0.0;
        }
        let r_rho = if self.quadratic { r2 } else { r2.powf(self.half_rho) };
        self.prefactor * (-self.coef * r_rho).exp()
    }
}

#[inline]
fn dist_sq(a: &[f64; MAX_DIM], b: &[f64; MAX_DIM], dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    s
}

/// Integrates `g(t, x - y) f(y)` over `y ∈ [-radius, radius]^d`, cut to the window where
/// the kernel carries mass. Returns the value and `max |f|` over the nodes used.
fn window_integral<F>(
    kernel: &KernelSpec,
    rule: &GaussLegendre,
    panels: usize,
    t: f64,
    x: &[f64],
    radius: f64,
    f: F,
) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let reach = kernel.tail_radius(1.0, WINDOW_MASS) * kernel.length_scale(t);
    let d = kernel.dim();
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for k in 0..d {
        lo[k] = (x[k] - reach).max(-radius);
        hi[k] = (x[k] + reach).min(radius);
        if lo[k] >= hi[k] {
            return (0.0, 0.0);
        }
    }
    let slice = KernelSlice::new(kernel, t);
    let peak = std::cell::Cell::new(0.0f64);
    let value = integrate_box(rule, &lo[..d], &hi[..d], panels, |y| {
        let fy = f(y);
        peak.set(peak.get().max(fy.abs()));
        let r2: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        slice.eval_sq(r2) * fy
    });
    (value, peak.get())
}

/// `Y₀(t, x) = ∫_{[-R,R]^d} g(t, x - y) ψ(y) dy` on every grid node, `Y₀(0, ·) = ψ`.
///
/// Each node is integrated twice, with `panels` and `2 · panels` panels per axis;
/// a disagreement beyond the quadrature tolerance is reported with the node.
pub fn initial_field(
    psi: &InitialCondition,
    kernel: &KernelSpec,
    geometry: &GridGeometry,
    quad: &QuadratureSpec,
    norm_p: f64,
) -> Result<FieldGrid> {
    let mut field = FieldGrid::zeros(geometry.clone(), norm_p);
    let radius = geometry.radius();
    let dim = geometry.dim;
    let sites = geometry.sites();
    for site in 0..sites {
        let x = geometry.site(site);
        field.level_mut(0)[site] = psi.eval(kernel, &x[..dim]);
    }
    if psi.is_zero() {
        return Ok(field);
    }
    let rule = GaussLegendre::new(quad.nodes);
    for k in 1..geometry.levels() {
        let t = geometry.times[k];
        let level: Vec<f64> = (0..sites)
            .into_par_iter()
            .map(|site| {
                let x = geometry.site(site);
                let f = |y: &[f64]| psi.eval(kernel, y);
                let (coarse, peak) = window_integral(kernel, &rule, quad.panels, t, &x[..dim], radius, f);
                let (fine, _) = window_integral(kernel, &rule, 2 * quad.panels, t, &x[..dim], radius, f);
                if (fine - coarse).abs() > quad.tolerance * fine.abs().max(peak) {
                    return Err(Error::Quadrature { t, x: x[..dim].to_vec() });
                }
                Ok(fine)
            })
            .collect::<Result<_>>()?;
        field.level_mut(k).copy_from_slice(&level);
    }
    Ok(field)
}

/// Drift contribution `b ∫₀^t ∫ g(t-s, x-y) σ(Ŷ(s, y)) dy ds` at a single point.
#[allow(clippy::too_many_arguments)]
fn drift_term(
    kernel: &KernelSpec,
    sigma: &SigmaSpec,
    field: &FieldGrid,
    drift: f64,
    quad: &QuadratureSpec,
    rule: &GaussLegendre,
    time_rule: &GaussLegendre,
    t: f64,
    x: &[f64],
) -> f64 {
    if drift == 0.0 {
        return 0.0;
    }
    let geometry = &field.geometry;
    let radius = geometry.radius();
    let mut acc = CompensatedSum::new();
    for j in 0..geometry.levels() {
        let a = geometry.times[j];
        if a >= t {
            break;
        }
        let b = geometry.times.get(j + 1).copied().unwrap_or(t).min(t);
        let level = field.level(j);
        for (s, ws) in time_rule.composite_nodes(a, b, 1) {
            let f = |y: &[f64]| {
                let v = geometry
                    .stencil(y)
                    .map(|st| st.iter().map(|&(i, w)| w * level[i]).sum())
                    .unwrap_or(0.0);
                sigma.eval(v)
            };
            let (v, _) = window_integral(kernel, rule, quad.panels, t - s, x, radius, f);
            acc.add(ws * v);
        }
    }
    drift * acc.value()
}

/// `Σ_{(s,y,z): s<t} g(t-s, x-y) σ(Ŷ(s,y)) z` plus the drift term, where `Ŷ` is
/// `field` interpolated at the atom (latest level `t_k ≤ s`, multilinear in space).
pub fn stochastic_convolution(
    kernel: &KernelSpec,
    sigma: &SigmaSpec,
    field: &FieldGrid,
    real: &NoiseRealization,
    t: f64,
    x: &[f64],
) -> Result<f64> {
    let dim = kernel.dim();
    let mut xp = [0.0; MAX_DIM];
    xp[..dim].copy_from_slice(&x[..dim]);
    let mut acc = CompensatedSum::new();
    for atom in real.sorted_atoms() {
        if atom.t >= t {
            break;
        }
        let y = field.interpolate(atom.t, atom.position(dim))?;
        let g = KernelSlice::new(kernel, t - atom.t).eval_sq(dist_sq(&xp, &atom.x, dim));
        acc.add(g * sigma.eval(y) * atom.z);
    }
    let quad = QuadratureSpec::default();
    let drift = drift_term(
        kernel,
        sigma,
        field,
        real.compensation.drift_density,
        &quad,
        &GaussLegendre::new(quad.nodes),
        &GaussLegendre::new(quad.time_nodes),
        t,
        &x[..dim],
    );
    Ok(acc.value() + drift)
}

/// The realization prepared for repeated application of the integral operator.
pub(crate) struct Convolver<'a> {
    problem: &'a ProblemSpec,
    atoms: Vec<Atom>,
    drift: f64,
    rule: GaussLegendre,
    time_rule: GaussLegendre,
}

impl<'a> Convolver<'a> {
    pub(crate) fn new(problem: &'a ProblemSpec, real: &NoiseRealization, geometry: &GridGeometry) -> Result<Self> {
        let dim = problem.kernel.dim();
        if real.dim() != dim {
            return Err(Error::GridMismatch(format!(
                "realization has dimension {} but the kernel {dim}",
                real.dim()
            )));
        }
        let atoms = real.sorted_atoms();
        for a in &atoms {
            if geometry.stencil(a.position(dim)).is_none() || a.t > problem.horizon {
                return Err(Error::GuardBand { t: a.t, x: a.position(dim).to_vec() });
            }
        }
        Ok(Self {
            problem,
            atoms,
            drift: real.compensation.drift_density,
            rule: GaussLegendre::new(problem.quadrature.nodes),
            time_rule: GaussLegendre::new(problem.quadrature.time_nodes),
        })
    }

    pub(crate) fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Jump weights `σ(Ŷ(s, y)) z` for every atom under `field`.
    pub(crate) fn weights(&self, field: &FieldGrid) -> Vec<f64> {
        let dim = self.problem.kernel.dim();
        self.atoms
            .iter()
            .map(|a| {
                // atoms were checked against the hull in `new`
                let y = field.interpolate(a.t, a.position(dim)).unwrap_or(0.0);
                self.problem.sigma.eval(y) * a.z
            })
            .collect()
    }

    /// Writes `J(prev)` into `out` on levels `from..`; levels below `from` are left
    /// as they are.
    pub(crate) fn apply(
        &self,
        y0: &FieldGrid,
        prev: &FieldGrid,
        weights: &[f64],
        from: usize,
        out: &mut FieldGrid,
    ) {
        let kernel = &self.problem.kernel;
        let geometry = &prev.geometry;
        let dim = geometry.dim;
        for k in from.max(1)..geometry.levels() {
            let t = geometry.times[k];
            let active = self.atoms.partition_point(|a| a.t < t);
            let slices: Vec<KernelSlice> = self.atoms[..active]
                .iter()
                .map(|a| KernelSlice::new(kernel, t - a.t))
                .collect();
            let base = y0.level(k);
            let level: Vec<f64> = (0..geometry.sites())
                .into_par_iter()
                .map(|site| {
                    let x = geometry.site(site);
                    let mut acc = CompensatedSum::new();
                    for ((a, s), w) in self.atoms[..active].iter().zip(&slices).zip(weights) {
                        acc.add(s.eval_sq(dist_sq(&x, &a.x, dim)) * w);
                    }
                    let drift = drift_term(
                        kernel,
                        &self.problem.sigma,
                        prev,
                        self.drift,
                        &self.problem.quadrature,
                        &self.rule,
                        &self.time_rule,
                        t,
                        &x[..dim],
                    );
                    base[site] + acc.value() + drift
                })
                .collect();
            out.level_mut(k).copy_from_slice(&level);
        }
        if from == 0 {
            out.level_mut(0).copy_from_slice(y0.level(0));
        }
    }
}
