use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::MAX_DIM;

/// Tensor lattice `t_0 = 0 < … < t_K = T` times a uniform axis in every dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub times: Vec<f64>,
    /// Coordinates along each spatial axis, increasing.
    pub axis: Vec<f64>,
    pub dim: usize,
}

/// Corner indices and weights of a multilinear interpolation stencil.
pub type Stencil = Vec<(usize, f64)>;

impl GridGeometry {
    /// `time_steps` equal steps on `[0, horizon]`; the axis covers `[-radius, radius]`
    /// with spacing at most `spacing`.
    pub fn uniform(horizon: f64, time_steps: usize, radius: f64, spacing: f64, dim: usize) -> Self {
        let times = (0..=time_steps)
            .map(|k| horizon * k as f64 / time_steps as f64)
            .collect();
        let axis = if radius == 0.0 {
            vec![0.0]
        } else {
            let cells = (2.0 * radius / spacing - 1e-9).ceil().max(1.0) as usize;
            (0..=cells)
                .map(|i| -radius + 2.0 * radius * i as f64 / cells as f64)
                .collect()
        };
        Self { times, axis, dim }
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn sites(&self) -> usize {
        self.axis.len().pow(self.dim as u32)
    }

    pub fn radius(&self) -> f64 {
        self.axis[self.axis.len() - 1]
    }

    /// Coordinates of site `idx`; the first axis varies slowest.
    pub fn site(&self, idx: usize) -> [f64; MAX_DIM] {
        let n = self.axis.len();
        let mut x = [0.0; MAX_DIM];
        let mut rem = idx;
        for k in (0..self.dim).rev() {
            x[k] = self.axis[rem % n];
            rem /= n;
        }
        x
    }

    /// Index of the latest time level `t_k ≤ s`.
    pub fn level_at(&self, s: f64) -> usize {
        match self.times.partition_point(|&t| t <= s) {
            0 => 0,
            k => k - 1,
        }
    }

    /// Multilinear interpolation stencil at `y`, or `None` outside the hull.
    pub fn stencil(&self, y: &[f64]) -> Option<Stencil> {
        let n = self.axis.len();
        let mut per_axis = Vec::with_capacity(self.dim);
        for &c in &y[..self.dim] {
            if n == 1 {
                if c.abs() > 1e-12 {
                    return None;
                }
                per_axis.push([(0usize, 1.0), (0usize, 0.0)]);
                continue;
            }
            let lo = self.axis[0];
            let hi = self.axis[n - 1];
            let tol = 1e-12 * (hi - lo);
            if c < lo - tol || c > hi + tol {
                return None;
            }
            let i = (self.axis.partition_point(|&a| a <= c)).clamp(1, n - 1) - 1;
            let w = ((c - self.axis[i]) / (self.axis[i + 1] - self.axis[i])).clamp(0.0, 1.0);
            per_axis.push([(i, 1.0 - w), (i + 1, w)]);
        }
        let mut out = vec![(0usize, 1.0)];
        for corners in per_axis {
            let mut next = Vec::with_capacity(out.len() * 2);
            for &(idx, w) in &out {
                for &(i, wi) in &corners {
                    if wi != 0.0 {
                        next.push((idx * n + i, w * wi));
                    }
                }
            }
            out = next;
        }
        Some(out)
    }

    /// The sub-geometry of axis points with `|x| ≤ radius` and the map from its
    /// sites to sites of `self`.
    pub fn restrict(&self, radius: f64) -> (GridGeometry, Vec<usize>) {
        let tol = 1e-12 * self.radius().max(1.0);
        let keep: Vec<usize> = (0..self.axis.len())
            .filter(|&i| self.axis[i].abs() <= radius + tol)
            .collect();
        let sub = GridGeometry {
            times: self.times.clone(),
            axis: keep.iter().map(|&i| self.axis[i]).collect(),
            dim: self.dim,
        };
        let n = self.axis.len();
        let m = keep.len();
        let map = (0..sub.sites())
            .map(|j| {
                let mut rem = j;
                let mut digits = [0usize; MAX_DIM];
                for k in (0..self.dim).rev() {
                    digits[k] = keep[rem % m];
                    rem /= m;
                }
                digits[..self.dim].iter().fold(0, |acc, &dg| acc * n + dg)
            })
            .collect();
        (sub, map)
    }
}

/// Solution values `Y[k][site]` on a [`GridGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub geometry: GridGeometry,
    /// Row-major `[level][site]`.
    pub values: Vec<f64>,
    /// Exponent used for diagnostic norms.
    pub norm_p: f64,
}

impl FieldGrid {
    pub fn zeros(geometry: GridGeometry, norm_p: f64) -> Self {
        let len = geometry.levels() * geometry.sites();
        Self {
            geometry,
            values: vec![0.0; len],
            norm_p,
        }
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let s = self.geometry.sites();
        &self.values[k * s..(k + 1) * s]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.geometry.sites();
        &mut self.values[k * s..(k + 1) * s]
    }

    pub fn get(&self, k: usize, site: usize) -> f64 {
        self.values[k * self.geometry.sites() + site]
    }

    /// Piecewise constant in time from the latest level `t_k ≤ s`, multilinear in space.
    pub fn interpolate(&self, s: f64, y: &[f64]) -> Result<f64> {
        let stencil = self.geometry.stencil(y).ok_or_else(|| Error::GuardBand {
            t: s,
            x: y[..self.geometry.dim].to_vec(),
        })?;
        let level = self.level(self.geometry.level_at(s));
        Ok(stencil.iter().map(|&(i, w)| w * level[i]).sum())
    }

    /// `max |self - other|` over all nodes.
    pub fn sup_distance(&self, other: &FieldGrid) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// First level at which the two fields differ (bitwise), or the level count.
    pub fn first_differing_level(&self, other: &FieldGrid) -> usize {
        let s = self.geometry.sites();
        (0..self.geometry.levels())
            .find(|&k| {
                self.values[k * s..(k + 1) * s]
                    .iter()
                    .zip(&other.values[k * s..(k + 1) * s])
                    .any(|(a, b)| a.to_bits() != b.to_bits())
            })
            .unwrap_or(self.geometry.levels())
    }

    pub fn check_same_grid(&self, other: &FieldGrid) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Restriction to the sub-box `|x|_∞ ≤ radius`.
    pub fn restrict(&self, radius: f64) -> FieldGrid {
        let (geometry, map) = self.geometry.restrict(radius);
        let mut out = FieldGrid::zeros(geometry, self.norm_p);
        for k in 0..self.geometry.levels() {
            let src = self.level(k);
            let dst = out.level_mut(k);
            for (j, &i) in map.iter().enumerate() {
                dst[j] = src[i];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
