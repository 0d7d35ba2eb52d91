//! Levinson-type construction of the decaying solution at a resonant energy.
//!
//! In the rotating frame of level `j` the system reads
//! `y' = (Λ + H + K) y` with `Λ = diag(-λ, λ)`, the oscillatory part
//!
//! ```text
//! H11 = -½ Ṽ sin 2θ        H12 = -½ V (1 - cos 2θ)
//! H21 =  ½ V (1 + cos 2θ)  H22 =  ½ Ṽ sin 2θ
//! ```
//!
//! (`Ṽ` is `V` without the resonant term) and an absolutely integrable rest
//! `K`, carried exactly as `A_y - Λ - H`. With `Q = -∫_ξ^X H` (so `Q(X) = 0`)
//! and `y = (I + Q) ỹ` one gets `ỹ' = (Λ + R) ỹ`,
//! `R = (I+Q)^{-1} (K + ΛQ - QΛ + HQ + KQ)`.
//!
//! The decaying solution solves
//! `ỹ(ξ) = (e^{-L(ξ)}, 0) - ∫_ξ^X diag(e^{∫_ξ^y λ}, e^{-∫_ξ^y λ}) R ỹ dy`
//! with `L = ∫_{ξ₀}^ξ λ`. Writing `ỹ = e^{-L} w` removes the exponential
//! weights from the first row; Picard iteration runs on `w` over a spectral
//! panel grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{log_grid, POINTS_PER_DECADE};
use crate::liouville::weight_unchecked;
use crate::magnus::Mat2;
use crate::potential::Potential;
use crate::quadrature::PanelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevinsonOptions {
    /// Left end `ξ₀` of the iteration window.
    pub xi_min: f64,
    /// Truncation point `X` replacing `∞`.
    pub xi_max: f64,
    pub max_iter: usize,
    /// Stop once successive iterates differ by less than this (sup norm of `w`).
    pub tol: f64,
    pub panel: f64,
    pub nodes: usize,
}

impl LevinsonOptions {
    pub fn new(xi_min: f64, xi_max: f64) -> Self {
        LevinsonOptions { xi_min, xi_max, max_iter: 60, tol: 1e-12, panel: 1.0, nodes: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevinsonSolution {
    pub level: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub options: LevinsonOptions,
    /// Reporting points (grid nodes closest to a logarithmic grid).
    pub grid: Vec<f64>,
    /// Scaled unknown `w = e^{L} ỹ`.
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// Frame coordinates `y = (I + Q) ỹ`.
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Prüfer amplitude `|y|`.
    pub r: Vec<f64>,
    /// `∫_{ξ₀}^ξ λ` at the reporting points.
    pub lambda_integral: Vec<f64>,
    pub iteration_count: usize,
    /// Sup-norm gaps `|w_k - w_{k-1}|`.
    pub gaps: Vec<f64>,
    /// Final defect of the integral equation.
    pub residual: f64,
    pub q_norm_max: f64,
    pub r_norm_integral: f64,
}

impl LevinsonSolution {
    /// Successive gap ratios `gap_k / gap_{k-1}` while the gaps are above
    /// rounding level.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.gaps
            .windows(2)
            .filter(|g| g[0] > 1e-13)
            .map(|g| g[1] / g[0])
            .collect()
    }

    pub fn max_gap_ratio(&self) -> f64 {
        self.gap_ratios().into_iter().fold(0.0, f64::max)
    }
}

/// Pieces of the frame generator at one point.
#[derive(Debug, Clone, Copy)]
pub struct FrameTerms {
    pub lambda: f64,
    pub h: Mat2,
    pub k: Mat2,
    pub theta: f64,
    pub s: f64,
}

/// Full generator `A_y = m₁₁ Rot e₁₁ Rotᵀ + m₂₁ Rot e₂₁ Rotᵀ` of the
/// frame of level `j`, split as `Λ + H + K`.
pub fn frame_terms(pot: &Potential, j: usize, xi: f64) -> FrameTerms {
    let p = pot.params();
    let table = pot.table(j);
    let energy = table.energy();
    let theta = pot.level_angle(j, xi);
    let (sn, cs) = theta.sin_cos();
    let (s2t, c2t) = (2.0 * theta).sin_cos();
    let weight = weight_unchecked(xi, p);
    let s_sq = 1.0 + energy * weight;
    let s = s_sq.sqrt();
    let v = pot.eval_total(xi);
    let m11 = -energy * p.weight_exponent() * weight / (2.0 * xi * s_sq);
    let m21 = (v + p.curvature_coefficient() / (xi * xi)) / s;
    let a = [
        [m11 * cs * cs - m21 * sn * cs, m11 * cs * sn - m21 * sn * sn],
        [m11 * cs * sn + m21 * cs * cs, m11 * sn * sn + m21 * sn * cs],
    ];
    let resonant = if pot.level_active(j, xi) { 4.0 * pot.amplitude() / xi * s2t } else { 0.0 };
    let lambda = 0.5 * resonant * s2t;
    let vt = v - resonant;
    let h = [
        [-0.5 * vt * s2t, -0.5 * v * (1.0 - c2t)],
        [0.5 * v * (1.0 + c2t), 0.5 * vt * s2t],
    ];
    let k = [
        [a[0][0] + lambda - h[0][0], a[0][1] - h[0][1]],
        [a[1][0] - h[1][0], a[1][1] - lambda - h[1][1]],
    ];
    FrameTerms { lambda, h, k, theta, s }
}

fn frob(m: &Mat2) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

fn mm(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Picard iteration for the decaying solution at resonant level `j`.
pub fn levinson_subordinate(pot: &Potential, j: usize, opts: &LevinsonOptions) -> Result<LevinsonSolution> {
    if j >= pot.n() {
        return Err(Error::InvalidConfig(format!("level index {j} out of range")));
    }
    let (x0, xm) = (opts.xi_min, opts.xi_max);
    if !(x0 >= pot.level_start(j) && xm > 10.0 * x0) {
        return Err(Error::InvalidConfig(format!(
            "Levinson window [{x0}, {xm}] must start after level {j} switches on ({}) and span a decade",
            pot.level_start(j)
        )));
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) || !(opts.panel > 0.0) || opts.nodes < 2 {
        return Err(Error::InvalidConfig("invalid Levinson iteration settings".into()));
    }
    let grid = PanelGrid::uniform(x0, xm, opts.panel, opts.nodes);
    let terms: Vec<FrameTerms> = grid.points.par_iter().map(|&x| frame_terms(pot, j, x)).collect();

    let lam: Vec<f64> = terms.iter().map(|t| t.lambda).collect();
    let (big_l, _) = grid.cumulative(&lam);
    // Q = -∫_ξ^X H, entrywise
    let mut q = vec![[[0.0; 2]; 2]; terms.len()];
    for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let hv: Vec<f64> = terms.iter().map(|t| t.h[r][c]).collect();
        for (qi, tv) in q.iter_mut().zip(grid.tail(&hv)) {
            qi[r][c] = -tv;
        }
    }
    let q_norm_max = q.iter().map(frob).fold(0.0, f64::max);
    if q_norm_max > 0.5 {
        return Err(Error::NotContracting(format!(
            "sup |Q| = {q_norm_max:.3} exceeds 1/2 on [{x0}, {xm}]; move the window right"
        )));
    }
    let rmat: Vec<Mat2> = terms
        .par_iter()
        .zip(q.par_iter())
        .map(|(t, qm)| {
            let l = t.lambda;
            let lq_ql = [[0.0, -2.0 * l * qm[0][1]], [2.0 * l * qm[1][0], 0.0]];
            let hq = mm(&t.h, qm);
            let kq = mm(&t.k, qm);
            let mut inner = [[0.0; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    inner[r][c] = t.k[r][c] + lq_ql[r][c] + hq[r][c] + kq[r][c];
                }
            }
            let (a, b, c, d) = (1.0 + qm[0][0], qm[0][1], qm[1][0], 1.0 + qm[1][1]);
            let det = a * d - b * c;
            let inv = [[d / det, -b / det], [-c / det, a / det]];
            mm(&inv, &inner)
        })
        .collect();
    let rnorm: Vec<f64> = rmat.iter().map(frob).collect();
    let r_norm_integral = grid.edge_cumulative(&rnorm).last().copied().unwrap_or(0.0);
    if !r_norm_integral.is_finite() {
        return Err(Error::NotContracting("remainder R is not integrable on the window".into()));
    }

    let n = grid.points.len();
    let decay: Vec<f64> = big_l.iter().map(|l| (-2.0 * l).exp()).collect();
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut gaps = Vec::new();
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        for i in 0..n {
            let r = &rmat[i];
            f1[i] = r[0][0] * w1[i] + r[0][1] * w2[i];
            f2[i] = (r[1][0] * w1[i] + r[1][1] * w2[i]) * decay[i];
        }
        let t1 = grid.tail(&f1);
        let t2 = grid.tail(&f2);
        let mut gap = 0.0f64;
        for i in 0..n {
            let n1 = 1.0 - t1[i];
            let n2 = -t2[i] / decay[i];
            gap = gap.max((n1 - w1[i]).abs()).max((n2 - w2[i]).abs());
            w1[i] = n1;
            w2[i] = n2;
        }
        if !gap.is_finite() {
            return Err(Error::NotContracting("Picard iterates diverged".into()));
        }
        gaps.push(gap);
        if gap < opts.tol {
            break;
        }
        let k = gaps.len();
        if k >= 4 && gaps[k - 1] > gaps[k - 2] && gaps[k - 2] > gaps[k - 3] && gaps[k - 3] > gaps[k - 4] {
            return Err(Error::NotContracting(format!("iterate gaps growing: {:?}", &gaps[k - 4..])));
        }
    }
    let residual = *gaps.last().expect("at least one iteration");

    // report on nodes nearest to a logarithmic grid
    let targets = log_grid(x0, xm, POINTS_PER_DECADE);
    let mut idx: Vec<usize> = targets
        .iter()
        .map(|&t| match grid.points.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => {
                if i == 0 {
                    0
                } else if i >= n {
                    n - 1
                } else if (grid.points[i] - t).abs() < (t - grid.points[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        })
        .collect();
    idx.dedup();
    let table = pot.table(j);
    let t_j = pot.level(j).t;
    let mut sol = LevinsonSolution {
        level: j,
        energy: table.energy(),
        options: *opts,
        grid: Vec::new(),
        w1: Vec::new(),
        w2: Vec::new(),
        y1: Vec::new(),
        y2: Vec::new(),
        phi: Vec::new(),
        dphi: Vec::new(),
        r: Vec::new(),
        lambda_integral: Vec::new(),
        iteration_count: iterations,
        gaps,
        residual,
        q_norm_max,
        r_norm_integral,
    };
    for i in idx {
        let xi = grid.points[i];
        let e = (-big_l[i]).exp();
        let (yt1, yt2) = (e * w1[i], e * w2[i]);
        let qm = &q[i];
        let y1 = (1.0 + qm[0][0]) * yt1 + qm[0][1] * yt2;
        let y2 = qm[1][0] * yt1 + (1.0 + qm[1][1]) * yt2;
        let st = crate::integrator::from_frame(table, t_j, xi, [y1, y2]);
        sol.grid.push(xi);
        sol.w1.push(w1[i]);
        sol.w2.push(w2[i]);
        sol.y1.push(y1);
        sol.y2.push(y2);
        sol.phi.push(st[0]);
        sol.dphi.push(st[1]);
        sol.r.push(y1.hypot(y2));
        sol.lambda_integral.push(big_l[i]);
    }
    Ok(sol)
}

/// Relative agreement of two frame-coordinate curves after the best scalar
/// normalisation: `max_i |a_i - c b_i| / |a_i|`.
pub fn normalized_discrepancy(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (mut ab, mut bb) = (0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        let wt = 1.0 / (u[0] * u[0] + u[1] * u[1]).max(f64::MIN_POSITIVE);
        ab += wt * (u[0] * v[0] + u[1] * v[1]);
        bb += wt * (v[0] * v[0] + v[1] * v[1]);
    }
    let c = ab / bb;
    a.iter()
        .zip(b)
        .map(|(u, v)| (u[0] - c * v[0]).hypot(u[1] - c * v[1]) / u[0].hypot(u[1]))
        .fold(0.0, f64::max)
}
