//! Quadrature building blocks: Gauss-Legendre rules, an adaptive
//! Gauss-Kronrod (7, 15) integrator, and panel grids with spectral
//! cumulative integration for long oscillatory ranges.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7/K15 panel: (Kronrod estimate, |Kronrod - Gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        resk += WGK[j] * fsum;
        if j % 2 == 1 {
            resg += WG[j / 2] * fsum;
        }
    }
    (resk * half, ((resk - resg) * half).abs())
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive G7/K15 integration of `f` over [a, b] to
/// `max(abs_tol, rel_tol * |I|)`.
pub fn adaptive_gk<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, panels: 0 };
    }
    const MAX_PANELS: usize = 20_000;
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    while err > abs_tol.max(rel_tol * total.abs()) && panels.len() < MAX_PANELS {
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    // resum to shed accumulated cancellation in the running total
    let value = panels.iter().map(|p| p.2).sum();
    let error = panels.iter().map(|p| p.3).sum();
    QuadResult { value, error, panels: panels.len() }
}

/// Gauss-Legendre rule on [-1, 1] together with its spectral cumulative
/// matrix `cum[i][j] = ∫_{-1}^{t_i} ℓ_j(t) dt` (ℓ_j the Lagrange basis).
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cum: Vec<Vec<f64>>,
}

impl PanelRule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        let lagrange = |j: usize, t: f64| -> f64 {
            let mut v = 1.0;
            for (m, &tm) in nodes.iter().enumerate() {
                if m != j {
                    v *= (t - tm) / (nodes[j] - tm);
                }
            }
            v
        };
        let mut cum = vec![vec![0.0; n]; n];
        for (i, row) in cum.iter_mut().enumerate() {
            let half = 0.5 * (nodes[i] + 1.0);
            let mid = 0.5 * (nodes[i] - 1.0);
            for (j, entry) in row.iter_mut().enumerate() {
                // degree n-1 integrand, exact under the n-point rule
                *entry = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&t, &w)| w * lagrange(j, mid + half * t))
                    .sum::<f64>()
                    * half;
            }
        }
        PanelRule { nodes, weights, cum }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Uniform panels covering [start, end] with Gauss-Legendre nodes inside
/// each panel; supports cumulative integrals of nodal samples.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    pub rule: PanelRule,
    pub edges: Vec<f64>,
    pub points: Vec<f64>,
}

impl PanelGrid {
    pub fn uniform(start: f64, end: f64, max_panel: f64, nodes: usize) -> Self {
        assert!(end > start && max_panel > 0.0);
        let count = ((end - start) / max_panel).ceil().max(1.0) as usize;
        let width = (end - start) / count as f64;
        let edges: Vec<f64> = (0..=count)
            .map(|k| if k == count { end } else { start + width * k as f64 })
            .collect();
        let rule = PanelRule::new(nodes);
        let mut points = Vec::with_capacity(count * nodes);
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for &t in &rule.nodes {
                points.push(0.5 * (lo + hi) + 0.5 * (hi - lo) * t);
            }
        }
        PanelGrid { rule, edges, points }
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    /// `(∫_{start}^{x_i} f` at every node, `∫_{start}^{end} f)`.
    pub fn cumulative(&self, values: &[f64]) -> (Vec<f64>, f64) {
        let n = self.rule.len();
        assert_eq!(values.len(), self.points.len());
        let mut out = vec![0.0; values.len()];
        let mut base = 0.0;
        for (k, w) in self.edges.windows(2).enumerate() {
            let half = 0.5 * (w[1] - w[0]);
            let f = &values[k * n..(k + 1) * n];
            for i in 0..n {
                let row = &self.rule.cum[i];
                let s: f64 = row.iter().zip(f).map(|(c, v)| c * v).sum();
                out[k * n + i] = base + half * s;
            }
            let full: f64 = self.rule.weights.iter().zip(f).map(|(w, v)| w * v).sum();
            base += half * full;
        }
        (out, base)
    }

    /// `∫_{x_i}^{end} f` at every node, accumulated from the right so that
    /// small tails carry no cancellation error from the head.
    pub fn tail(&self, values: &[f64]) -> Vec<f64> {
        let n = self.rule.len();
        assert_eq!(values.len(), self.points.len());
        let mut out = vec![0.0; values.len()];
        let mut base = 0.0;
        for (k, w) in self.edges.windows(2).enumerate().rev() {
            let half = 0.5 * (w[1] - w[0]);
            let f = &values[k * n..(k + 1) * n];
            let full: f64 = self.rule.weights.iter().zip(f).map(|(w, v)| w * v).sum();
            for i in 0..n {
                let head: f64 = self.rule.cum[i].iter().zip(f).map(|(c, v)| c * v).sum();
                out[k * n + i] = base + half * (full - head);
            }
            base += half * full;
        }
        out
    }

    /// Cumulative integral values at the panel edges (length `panels + 1`).
    pub fn edge_cumulative(&self, values: &[f64]) -> Vec<f64> {
        let n = self.rule.len();
        let mut out = Vec::with_capacity(self.edges.len());
        let mut base = 0.0;
        out.push(0.0);
        for (k, w) in self.edges.windows(2).enumerate() {
            let half = 0.5 * (w[1] - w[0]);
            let f = &values[k * n..(k + 1) * n];
            base += half * self.rule.weights.iter().zip(f).map(|(w, v)| w * v).sum::<f64>();
            out.push(base);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 8, 12] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn kronrod_handles_smooth_and_peaked() {
        let r = adaptive_gk(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 0.0);
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
        let r = adaptive_gk(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 0.0);
        let exact = 2.0 * (1.0 / 1e-4f64.sqrt()) * (1.0 / 1e-4f64.sqrt()).atan();
        assert!((r.value - exact).abs() / exact < 1e-11);
        let r = adaptive_gk(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 0.0);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn spectral_cumulative_matches_antiderivative() {
        let grid = PanelGrid::uniform(0.0, 20.0, 0.5, 12);
        let vals: Vec<f64> = grid.points.iter().map(|&x| (4.0 * x).cos()).collect();
        let (cum, total) = grid.cumulative(&vals);
        for (x, c) in grid.points.iter().zip(&cum) {
            assert!((c - (4.0 * x).sin() / 4.0).abs() < 1e-12, "{x} {c} {}", (c - (4.0 * x).sin() / 4.0).abs());
        }
        assert!((total - (80f64).sin() / 4.0).abs() < 1e-13);
        let tail = grid.tail(&vals);
        for (x, t) in grid.points.iter().zip(&tail) {
            assert!((t - ((80f64).sin() - (4.0 * x).sin()) / 4.0).abs() < 1e-12);
        }
        let edges = grid.edge_cumulative(&vals);
        assert!((edges.last().unwrap() - total).abs() < 1e-15);
    }
}
