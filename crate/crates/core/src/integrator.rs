//! Trajectories of the transformed equation `-φ'' + Q(ξ, E) φ = φ` and of
//! the original equation `-u'' - x^α u + q u = E u`, plus the rotating
//! frame used to read off Prüfer amplitudes.
//!
//! In the frame, with `s = √(1 - β_E)` and `θ = Φ_E(ξ) + t`,
//! `y = Rot(θ) (s φ, φ')`. The vector `y = (1, 0)` is the WKB solution
//! `φ ≈ cos θ / s`; at a resonant energy it is the decaying direction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{forward_map, inverse_map, weight_unchecked, ModelParams};
use crate::magnus::{propagate, Mat2, StepStats};
use crate::phase::PhaseTable;
use crate::potential::Potential;

/// Largest step in `ξ`: 20 steps per half wavelength.
pub const XI_STEP_MAX: f64 = PI / 20.0;
pub const POINTS_PER_DECADE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub schema: u32,
    pub tol_ode: f64,
    pub h_max: f64,
    pub direction: Direction,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrace {
    #[serde(rename = "E")]
    pub energy: f64,
    /// Phase `t` of the rotating frame.
    pub frame_phase: f64,
    pub xi: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub r: Vec<f64>,
    pub meta: TraceMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XTrace {
    #[serde(rename = "E")]
    pub energy: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub meta: TraceMeta,
}

/// Logarithmic grid on `[lo, hi]`: the endpoints plus every `10^{k/per_decade}`
/// strictly inside, so grids over nested windows share their points.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && per_decade > 0);
    let pd = per_decade as f64;
    let k0 = (lo.log10() * pd).floor() as i64;
    let k1 = (hi.log10() * pd).ceil() as i64;
    let mut g = vec![lo];
    for k in k0..=k1 {
        let x = 10f64.powf(k as f64 / pd);
        if x > lo * (1.0 + 1e-9) && x < hi * (1.0 - 1e-9) {
            g.push(x);
        }
    }
    g.push(hi);
    g
}

/// Generator of `(φ, φ')' = A (φ, φ')`: `A = [[0, 1], [Q - 1, 0]]`.
pub fn xi_generator(pot: &Potential, energy: f64) -> impl Fn(f64) -> Mat2 + '_ {
    let p = *pot.params();
    let k = p.curvature_coefficient();
    move |xi: f64| {
        let q = k / (xi * xi) - energy * weight_unchecked(xi, &p) + pot.eval_total(xi);
        [[0.0, 1.0], [q - 1.0, 0.0]]
    }
}

/// Generator of `(u, u')' = A (u, u')`: `A = [[0, 1], [q - x^α - E, 0]]`.
pub fn x_generator(pot: &Potential, energy: f64) -> impl Fn(f64) -> Mat2 + '_ {
    let alpha = pot.params().alpha;
    move |x: f64| {
        let xa = if x > 0.0 { x.powf(alpha) } else { 0.0 };
        [[0.0, 1.0], [pot.eval_q(x) - xa - energy, 0.0]]
    }
}

fn stops_with_breaks(grid: &[f64], breaks: &[f64], dir: Direction) -> (Vec<f64>, Vec<bool>) {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut all: Vec<(f64, bool)> = grid.iter().map(|&g| (g, true)).collect();
    all.extend(breaks.iter().filter(|&&b| b > lo && b < hi).map(|&b| (b, false)));
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    if dir == Direction::Backward {
        all.reverse();
    }
    all.into_iter().unzip()
}

fn validate_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidConfig(format!("{what} grid must be strictly increasing with >= 2 points")));
    }
    Ok(())
}

/// Integrates the `ξ`-equation over `grid` (ascending). `init` is the state
/// at `grid[0]` for forward runs and at the last point for backward runs.
/// `frame_phase` is the `t` of the rotating frame.
pub fn integrate_xi(
    pot: &Potential,
    energy: f64,
    grid: &[f64],
    init: [f64; 2],
    dir: Direction,
    frame_phase: f64,
) -> Result<SolutionTrace> {
    validate_grid(grid, "xi")?;
    let p = *pot.params();
    if grid[0] < p.xi_start {
        return Err(Error::Domain(format!(
            "xi grid starts at {} below xi_start = {}",
            grid[0], p.xi_start
        )));
    }
    if init == [0.0, 0.0] || !init.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("initial data must be finite and non-zero".into()));
    }
    let table = PhaseTable::new(energy, &p)?;
    let gen = xi_generator(pot, energy);
    let (stops, keep) = stops_with_breaks(grid, &pot.breakpoints(), dir);
    let mut stats = StepStats::default();
    let t0 = stops[0];
    let states = propagate(&gen, &|_| XI_STEP_MAX, t0, init, &stops[1..], p.tol_ode, &mut stats)?;
    let mut xs = Vec::with_capacity(grid.len());
    let mut phi = Vec::with_capacity(grid.len());
    let mut dphi = Vec::with_capacity(grid.len());
    for (i, (&s, &k)) in stops.iter().zip(&keep).enumerate() {
        if k {
            let y = if i == 0 { init } else { states[i - 1] };
            xs.push(s);
            phi.push(y[0]);
            dphi.push(y[1]);
        }
    }
    if dir == Direction::Backward {
        xs.reverse();
        phi.reverse();
        dphi.reverse();
    }
    let mut trace = SolutionTrace {
        energy,
        frame_phase,
        xi: xs,
        phi,
        dphi,
        y1: Vec::new(),
        y2: Vec::new(),
        r: Vec::new(),
        meta: TraceMeta {
            schema: 1,
            tol_ode: p.tol_ode,
            h_max: XI_STEP_MAX,
            direction: dir,
            accepted_steps: stats.accepted,
            rejected_steps: stats.rejected,
        },
    };
    rotating_frame(&mut trace, &table, frame_phase);
    Ok(trace)
}

/// Fills `(y1, y2, R)` from `(φ, φ')` with the frame angle `Φ_E + t`.
pub fn rotating_frame(trace: &mut SolutionTrace, table: &PhaseTable, t: f64) {
    trace.frame_phase = t;
    let n = trace.xi.len();
    trace.y1 = Vec::with_capacity(n);
    trace.y2 = Vec::with_capacity(n);
    trace.r = Vec::with_capacity(n);
    for i in 0..n {
        let y = to_frame(table, t, trace.xi[i], trace.phi[i], trace.dphi[i]);
        trace.y1.push(y[0]);
        trace.y2.push(y[1]);
        trace.r.push(y[0].hypot(y[1]));
    }
}

/// `y = Rot(Φ_E(ξ) + t) (√(1-β) φ, φ')`.
#[inline]
pub fn to_frame(table: &PhaseTable, t: f64, xi: f64, phi: f64, dphi: f64) -> [f64; 2] {
    let theta = table.phase_unchecked(xi) + t;
    let (sn, cs) = theta.sin_cos();
    let u1 = table.derivative(xi) * phi;
    [cs * u1 - sn * dphi, sn * u1 + cs * dphi]
}

/// Inverse of [`to_frame`]: `(φ, φ')` from `y`.
#[inline]
pub fn from_frame(table: &PhaseTable, t: f64, xi: f64, y: [f64; 2]) -> [f64; 2] {
    let theta = table.phase_unchecked(xi) + t;
    let (sn, cs) = theta.sin_cos();
    let u1 = cs * y[0] + sn * y[1];
    let u2 = -sn * y[0] + cs * y[1];
    [u1 / table.derivative(xi), u2]
}

/// Integrates the `x`-equation over `grid` (ascending); `init` as in
/// [`integrate_xi`].
pub fn integrate_x(pot: &Potential, energy: f64, grid: &[f64], init: [f64; 2], dir: Direction) -> Result<XTrace> {
    validate_grid(grid, "x")?;
    if grid[0] < 0.0 {
        return Err(Error::Domain(format!("x grid starts at {} < 0", grid[0])));
    }
    if init == [0.0, 0.0] || !init.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("initial data must be finite and non-zero".into()));
    }
    let p = *pot.params();
    let breaks: Vec<f64> = pot
        .breakpoints()
        .into_iter()
        .map(|b| inverse_map(b, &p).expect("positive breakpoint"))
        .collect();
    let gen = x_generator(pot, energy);
    let h_max = |x: f64| {
        let xa = if x > 0.0 { x.powf(p.alpha) } else { 0.0 };
        2.0 * PI / (20.0 * ((xa + energy).abs() + pot.eval_q(x).abs() + 1.0).sqrt())
    };
    let (stops, keep) = stops_with_breaks(grid, &breaks, dir);
    let mut stats = StepStats::default();
    let states = propagate(&gen, &h_max, stops[0], init, &stops[1..], p.tol_ode, &mut stats)?;
    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut du = Vec::new();
    for (i, (&s, &k)) in stops.iter().zip(&keep).enumerate() {
        if k {
            let y = if i == 0 { init } else { states[i - 1] };
            x.push(s);
            u.push(y[0]);
            du.push(y[1]);
        }
    }
    if dir == Direction::Backward {
        x.reverse();
        u.reverse();
        du.reverse();
    }
    Ok(XTrace {
        energy,
        x,
        u,
        du,
        meta: TraceMeta {
            schema: 1,
            tol_ode: p.tol_ode,
            h_max: h_max(grid[0]),
            direction: dir,
            accepted_steps: stats.accepted,
            rejected_steps: stats.rejected,
        },
    })
}

/// `λ(ξ) = 2a sin²(2(Φ_{E_j}(ξ) + t_j)) / ξ` on the support of term `j`.
pub fn lambda_rate(pot: &Potential, j: usize, xi: f64) -> f64 {
    if !pot.level_active(j, xi) {
        return 0.0;
    }
    lambda_from_angle(pot.amplitude(), pot.level_angle(j, xi), xi)
}

#[inline]
pub fn lambda_from_angle(a: f64, angle: f64, xi: f64) -> f64 {
    let s = (2.0 * angle).sin();
    2.0 * a * s * s / xi
}

/// Decaying solution at resonant level `j`: start at `xi_max` on the
/// decaying frame direction `y = (1, 0)` and integrate down to `xi_min`,
/// where that solution dominates.
pub fn subordinate_by_backward(pot: &Potential, j: usize, xi_max: f64, xi_min: f64) -> Result<SolutionTrace> {
    subordinate_on_grid(pot, j, &log_grid(xi_min, xi_max, POINTS_PER_DECADE))
}

pub fn subordinate_on_grid(pot: &Potential, j: usize, grid: &[f64]) -> Result<SolutionTrace> {
    if j >= pot.n() {
        return Err(Error::InvalidConfig(format!("level index {j} out of range")));
    }
    validate_grid(grid, "xi")?;
    let level = pot.level(j);
    let xi_max = grid[grid.len() - 1];
    let init = from_frame(pot.table(j), level.t, xi_max, [1.0, 0.0]);
    integrate_xi(pot, level.energy, grid, init, Direction::Backward, level.t)
}

/// Generic forward solution at level `j`'s energy, started at `xi_min`.
pub fn generic_forward(pot: &Potential, energy: f64, frame_phase: f64, xi_min: f64, xi_max: f64) -> Result<SolutionTrace> {
    integrate_xi(
        pot,
        energy,
        &log_grid(xi_min, xi_max, POINTS_PER_DECADE),
        [1.0, 0.3],
        Direction::Forward,
        frame_phase,
    )
}

/// `φ₁ φ₂' - φ₂ φ₁'` per sample of two traces on the same grid.
pub fn wronskian(a: &SolutionTrace, b: &SolutionTrace) -> Result<Vec<f64>> {
    if a.xi != b.xi {
        return Err(Error::InvalidConfig("traces must share a grid".into()));
    }
    Ok((0..a.xi.len()).map(|i| a.phi[i] * b.dphi[i] - b.phi[i] * a.dphi[i]).collect())
}

/// `(ξ, φ, φ')` view of an `x`-trace through the Liouville transform.
pub fn x_trace_to_xi(trace: &XTrace, params: &ModelParams) -> Result<Vec<[f64; 3]>> {
    trace
        .x
        .iter()
        .zip(trace.u.iter().zip(&trace.du))
        .map(|(&x, (&u, &du))| {
            let (xi, phi, dphi) = crate::liouville::u_state_to_phi(x, u, du, params)?;
            Ok([xi, phi, dphi])
        })
        .collect()
}

/// Grid in `x` whose images are the given `ξ` values.
pub fn x_grid_for(xi_grid: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    xi_grid.iter().map(|&xi| inverse_map(xi, params)).collect()
}

pub fn xi_grid_for(x_grid: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    x_grid.iter().map(|&x| forward_map(x, params)).collect()
}
