//! Gauss–Legendre rules and momentum grids.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

/// Quadrature nodes and weights for the spectator momentum K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
}

/// Points per panel used by the default log-panel grid.
pub const PANEL_ORDER: usize = 20;

impl MomentumGrid {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// `n` nodes in Gauss–Legendre panels of equal width in ln K over
    /// [k_min, k_max]. Panels carry 20 points, the remainder is spread one
    /// extra point per panel from the left.
    pub fn log_panels(n: usize, k_min: f64, k_max: f64) -> Self {
        assert!(n >= 1 && k_min > 0.0 && k_max > k_min);
        let panels = n.div_ceil(PANEL_ORDER).max(1);
        let la = k_min.ln();
        let lb = k_max.ln();
        let edges: Vec<f64> = (0..=panels)
            .map(|i| (la + (lb - la) * i as f64 / panels as f64).exp())
            .collect();
        let base = n / panels;
        let extra = n % panels;
        let orders: Vec<usize> = (0..panels).map(|i| base + usize::from(i < extra)).collect();
        Self::from_log_edges(&edges, &orders)
    }

    /// Log-mapped panels with prescribed edges and per-panel order.
    pub fn from_log_edges(edges: &[f64], orders: &[usize]) -> Self {
        assert_eq!(edges.len(), orders.len() + 1);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (i, &ord) in orders.iter().enumerate() {
            let (t, w) = gauss_legendre_on(ord, edges[i].ln(), edges[i + 1].ln());
            for (ti, wi) in t.into_iter().zip(w) {
                let k = ti.exp();
                nodes.push(k);
                weights.push(wi * k);
            }
        }
        Self {
            nodes,
            weights,
            k_min: edges[0],
            k_max: *edges.last().unwrap(),
        }
    }

    /// Log panels with `per_decade` panels per decade and `order` points each,
    /// forced to have panel edges at every breakpoint in `marks`.
    pub fn with_breakpoints(k_min: f64, k_max: f64, per_decade: f64, order: usize, marks: &[f64]) -> Self {
        let mut cuts: Vec<f64> = marks
            .iter()
            .copied()
            .filter(|&m| m > k_min && m < k_max)
            .collect();
        cuts.push(k_min);
        cuts.push(k_max);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a / *b - 1.0).abs() < 1e-12);
        let mut edges = vec![cuts[0]];
        for pair in cuts.windows(2) {
            let decades = (pair[1] / pair[0]).log10();
            let m = ((per_decade * decades).floor() as usize).max(1);
            for j in 1..=m {
                edges.push(pair[0] * (pair[1] / pair[0]).powf(j as f64 / m as f64));
            }
        }
        let orders = vec![order; edges.len() - 1];
        Self::from_log_edges(&edges, &orders)
    }

    /// Sum of w_i g(K_i).
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&k, &w)| w * g(k)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(12);
        for p in 0..24 {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let want = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
            assert!((got - want).abs() < 1e-14, "p={p}");
        }
    }

    #[test]
    fn high_order_rule_weights_sum() {
        for n in [1, 2, 3, 40, 64, 101] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            assert!(x.windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn grid_nodes_increasing_positive() {
        let g = MomentumGrid::log_panels(410, 1e-6, 12.0);
        assert_eq!(g.n(), 410);
        assert!(g.nodes.windows(2).all(|p| p[1] > p[0]));
        assert!(g.nodes[0] > 0.0 && g.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn grid_integrates_gaussian() {
        // int_0^12 exp(-K^2) dK = sqrt(pi)/2 erf(12)
        let g = MomentumGrid::log_panels(400, 1e-6, 12.0);
        let got = g.integrate(|k| (-k * k).exp());
        let want = 0.5 * PI.sqrt() * (1.0 - libm::erfc(12.0)) - 1e-6;
        assert!((got - want).abs() / want < 1e-10, "{got} {want}");
    }

    #[test]
    fn breakpoints_become_edges() {
        let kp = 0.37;
        let g = MomentumGrid::with_breakpoints(1e-6, 12.0, 3.0, 16, &[0.9 * kp, kp, 1.1 * kp]);
        assert!(g.nodes.iter().all(|&k| (k - kp).abs() > 1e-6));
        assert_eq!(g.n() % 16, 0);
        let got = g.integrate(|k| k * (-k).exp());
        let want = 1.0 - (-12.0f64).exp() * 13.0;
        assert!((got - want).abs() < 1e-11);
    }
}
