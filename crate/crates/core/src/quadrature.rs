//! Composite Gauss–Legendre rules on intervals and axis-aligned boxes.

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]` split into `panels` equal pieces.
    pub fn composite_nodes(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.len());
        for j in 0..panels {
            let lo = a + h * j as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, panels: usize, f: F) -> f64 {
        self.composite_nodes(a, b, panels)
            .into_iter()
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Tensor-product composite rule over the box `[lo, hi]` (one interval per axis).
pub fn integrate_box<F>(rule: &GaussLegendre, lo: &[f64], hi: &[f64], panels: usize, f: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let axes: Vec<Vec<(f64, f64)>> = lo
        .iter()
        .zip(hi)
        .map(|(&a, &b)| rule.composite_nodes(a, b, panels))
        .collect();
    let dim = axes.len();
    if axes.iter().any(|a| a.is_empty()) {
        return 0.0;
    }
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            let (x, wk) = axes[k][idx[k]];
            point[k] = x;
            w *= wk;
        }
        total += w * f(&point);
        let mut k = 0;
        loop {
            if k == dim {
                return total;
            }
            idx[k] += 1;
            if idx[k] < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(5);
        // degree 9 is the limit for 5 nodes
        let v = rule.integrate(0.0, 2.0, 1, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-10);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [1, 2, 7, 20, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.composite_nodes(-3.0, 1.0, 3).iter().map(|p| p.1).sum();
            assert!((s - 4.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn box_rule_handles_two_dimensions() {
        let rule = GaussLegendre::new(8);
        let v = integrate_box(&rule, &[0.0, 0.0], &[1.0, 2.0], 1, |p| p[0] * p[1]);
        assert!((v - 1.0).abs() < 1e-13);
    }
}
