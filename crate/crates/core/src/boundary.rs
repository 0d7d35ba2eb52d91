//! Boundary matching for the cutoff construction: bumps `κ_j w_j` on
//! `(1, 2)` rotate the angle `atan2(u'(0), u(0))` of each subordinate
//! solution onto its prescribed value `θ_j`.
//!
//! The subordinate solution is transported backward in `ξ` down to a switch
//! point `ξ_sw = max(4, ξ_start)` (independent of the bumps, computed once
//! per level), then in `x` down to 0 where the equation is regular.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{integrate_x, subordinate_on_grid, Direction};
use crate::liouville::phi_state_to_u;
use crate::potential::{Mode, Potential};

pub const ANGLE_TOL: f64 = 1e-6;
pub const DEFAULT_KAPPA_RANGE: (f64, f64) = (-100.0, 100.0);
const SCAN_SAMPLES: usize = 401;

/// Reduces an angle difference to `(-π/2, π/2]` (angles of lines, mod π).
pub fn wrap_half(d: f64) -> f64 {
    let r = d.rem_euclid(PI);
    if r > PI / 2.0 {
        r - PI
    } else {
        r
    }
}

/// State of level `j`'s subordinate solution at the switch point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub level: usize,
    pub energy: f64,
    pub xi_max: f64,
    pub x_switch: f64,
    /// `(u, u')` at `x_switch`, unit norm.
    pub state: [f64; 2],
}

pub fn switch_point(pot: &Potential) -> f64 {
    pot.params().xi_start.max(4.0)
}

/// Backward `ξ`-integration of level `j`'s subordinate solution from
/// `xi_max` to the switch point.
pub fn transport_to_switch(pot: &Potential, j: usize, xi_max: f64) -> Result<Transport> {
    let xi_sw = switch_point(pot);
    if !(xi_max > xi_sw) {
        return Err(Error::InvalidConfig(format!("xi_max = {xi_max} must exceed the switch point {xi_sw}")));
    }
    let trace = subordinate_on_grid(pot, j, &[xi_sw, xi_max])?;
    let (x, u, du) = phi_state_to_u(xi_sw, trace.phi[0], trace.dphi[0], pot.params())?;
    let n = u.hypot(du);
    Ok(Transport { level: j, energy: trace.energy, xi_max, x_switch: x, state: [u / n, du / n] })
}

/// `(u(0), u'(0))` of the transported solution under `pot` (whose bumps
/// may differ from those used for the transport).
pub fn state_at_zero(pot: &Potential, tr: &Transport) -> Result<[f64; 2]> {
    let xt = integrate_x(pot, tr.energy, &[0.0, tr.x_switch], tr.state, Direction::Backward)?;
    Ok([xt.u[0], xt.du[0]])
}

/// Boundary angle in `[0, π)`: `tan ψ = u'(0)/u(0)`.
pub fn angle_at_zero(pot: &Potential, tr: &Transport) -> Result<f64> {
    let s = state_at_zero(pot, tr)?;
    Ok(s[1].atan2(s[0]).rem_euclid(PI))
}

fn require_thm15(pot: &Potential, j: usize) -> Result<f64> {
    if pot.spec().mode != Mode::Thm15 {
        return Err(Error::InvalidConfig("boundary matching needs thm15 mode".into()));
    }
    if j >= pot.n() {
        return Err(Error::InvalidConfig(format!("level index {j} out of range")));
    }
    pot.level(j)
        .theta_bc
        .ok_or_else(|| Error::InvalidConfig(format!("level {j} has no boundary angle")))
}

fn bumps_of(pot: &Potential) -> Vec<f64> {
    if pot.spec().bumps.is_empty() {
        vec![0.0; pot.n()]
    } else {
        pot.spec().bumps.clone()
    }
}

fn angle_with(pot: &Potential, tr: &Transport, bumps: &[f64], j: usize, kappa: f64) -> Result<f64> {
    let mut b = bumps.to_vec();
    b[j] = kappa;
    angle_at_zero(&pot.with_bumps(b)?, tr)
}

/// Transported angle of level `j` sampled over `kappas` (others fixed).
pub fn angle_scan(pot: &Potential, tr: &Transport, kappas: &[f64]) -> Result<Vec<f64>> {
    let bumps = bumps_of(pot);
    kappas.par_iter().map(|&k| angle_with(pot, tr, &bumps, tr.level, k)).collect()
}

/// Solves for `κ_j` with the other coefficients fixed; the crossing nearest
/// to the current `κ_j` wins.
fn solve_level(pot: &Potential, tr: &Transport, theta: f64, range: (f64, f64)) -> Result<f64> {
    let j = tr.level;
    let bumps = bumps_of(pot);
    let current = bumps[j];
    let f = |k: f64| angle_with(pot, tr, &bumps, j, k);
    if wrap_half(f(current)? - theta).abs() <= ANGLE_TOL {
        return Ok(current);
    }
    let (lo, hi) = range;
    let kappas: Vec<f64> = (0..SCAN_SAMPLES)
        .map(|i| lo + (hi - lo) * i as f64 / (SCAN_SAMPLES - 1) as f64)
        .collect();
    let raw: Vec<f64> = kappas.par_iter().map(|&k| f(k)).collect::<Result<_>>()?;
    // unwrap along κ; g = ψ - θ crosses a multiple of π at each solution
    let mut g = vec![raw[0] - theta];
    for w in raw.windows(2) {
        let last = *g.last().expect("non-empty");
        g.push(last + wrap_half(w[1] - w[0]));
    }
    let mut best: Option<(f64, usize, f64)> = None;
    for i in 0..SCAN_SAMPLES - 1 {
        let (a, b) = ((g[i] / PI).floor(), (g[i + 1] / PI).floor());
        let m = if a != b {
            a.max(b)
        } else if (g[i] / PI).fract() == 0.0 {
            a
        } else {
            continue;
        };
        let mid = 0.5 * (kappas[i] + kappas[i + 1]);
        if best.map_or(true, |(d, _, _)| (mid - current).abs() < d) {
            best = Some(((mid - current).abs(), i, m));
        }
    }
    let (_, i, m) = best.ok_or(Error::NoCrossing { lo, hi })?;
    // Illinois false position on G(κ) = ψ(κ) - θ - mπ, unwrapped from the left end
    let (mut ka, mut kb) = (kappas[i], kappas[i + 1]);
    let left = raw[i];
    let big_g = |k: f64| -> Result<f64> { Ok(g[i] + wrap_half(f(k)? - left) - m * PI) };
    let (mut ga, mut gb) = (g[i] - m * PI, g[i + 1] - m * PI);
    if ga == 0.0 {
        return Ok(ka);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let k = if (gb - ga).abs() > 0.0 { kb - gb * (kb - ka) / (gb - ga) } else { 0.5 * (ka + kb) };
        let k = if k > ka.min(kb) && k < ka.max(kb) { k } else { 0.5 * (ka + kb) };
        let gk = big_g(k)?;
        if gk.abs() <= 0.01 * ANGLE_TOL || (kb - ka).abs() <= 1e-14 * k.abs().max(1.0) {
            return Ok(k);
        }
        if (gk > 0.0) == (gb > 0.0) {
            kb = k;
            gb = gk;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            ka = k;
            ga = gk;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    Ok(0.5 * (ka + kb))
}

/// Adjusts level `j`'s bump so its transported boundary angle equals
/// `θ_j`, keeping the other bump coefficients fixed.
pub fn match_boundary(pot: &Potential, j: usize, kappa_range: (f64, f64), xi_max: f64) -> Result<Potential> {
    let theta = require_thm15(pot, j)?;
    let tr = transport_to_switch(pot, j, xi_max)?;
    let kappa = solve_level(pot, &tr, theta, kappa_range)?;
    let mut b = bumps_of(pot);
    b[j] = kappa;
    pot.with_bumps(b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub kappa: Vec<f64>,
    /// `|wrap(ψ_j - θ_j)|` after matching (0 for levels without `θ_j`).
    pub angle_error: Vec<f64>,
    pub newton_iterations: usize,
    pub starts_tried: usize,
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &k| a[i][c].abs().total_cmp(&a[k][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Matches every level that carries a boundary angle. A bump in one slot
/// also moves the other levels' angles, so the coefficients are found
/// jointly by damped Newton on the wrapped mismatch vector, restarted from
/// deterministic points in `kappa_range` if a run stalls.
pub fn match_all(pot: &Potential, kappa_range: (f64, f64), xi_max: f64) -> Result<(Potential, MatchReport)> {
    if pot.spec().mode != Mode::Thm15 {
        return Err(Error::InvalidConfig("boundary matching needs thm15 mode".into()));
    }
    let targets: Vec<(usize, f64)> = (0..pot.n()).filter_map(|j| pot.level(j).theta_bc.map(|t| (j, t))).collect();
    let transports: Vec<Transport> = targets
        .par_iter()
        .map(|&(j, _)| transport_to_switch(pot, j, xi_max))
        .collect::<Result<_>>()?;
    let base = bumps_of(pot);
    let (lo, hi) = kappa_range;
    let with = |k: &[f64]| -> Result<Potential> {
        let mut b = base.clone();
        for (&(j, _), v) in targets.iter().zip(k) {
            b[j] = *v;
        }
        pot.with_bumps(b)
    };
    let residual = |k: &[f64]| -> Result<Vec<f64>> {
        let p = with(k)?;
        targets
            .par_iter()
            .zip(&transports)
            .map(|(&(_, th), tr)| Ok(wrap_half(angle_at_zero(&p, tr)? - th)))
            .collect()
    };
    let norm = |f: &[f64]| f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m = targets.len();
    let mut starts: Vec<Vec<f64>> = vec![targets.iter().map(|&(j, _)| base[j]).collect()];
    // golden-ratio sequence: deterministic, well spread over the range
    let g = 0.618_033_988_749_895;
    for s in 1..=24 {
        starts.push((0..m).map(|d| lo + (hi - lo) * ((s as f64 * g * (d as f64 + 1.0).sqrt() + 0.5 * d as f64).fract())).collect());
    }
    let mut total_iters = 0;
    for (tried, start) in starts.iter().enumerate() {
        let mut k = start.clone();
        let mut f = residual(&k)?;
        for _ in 0..40 {
            if norm(&f) <= ANGLE_TOL {
                break;
            }
            total_iters += 1;
            let cols: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|c| {
                    let h = 1e-6 * k[c].abs().max(1.0);
                    let mut kp = k.clone();
                    kp[c] += h;
                    let fp = residual(&kp)?;
                    Ok(fp.iter().zip(&f).map(|(a, b)| wrap_half(a - b) / h).collect())
                })
                .collect::<Result<_>>()?;
            let jac: Vec<Vec<f64>> = (0..m).map(|r| (0..m).map(|c| cols[c][r]).collect()).collect();
            let Some(step) = solve_linear(jac, f.iter().map(|v| -v).collect()) else { break };
            let f0 = norm(&f);
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let trial: Vec<f64> = k.iter().zip(&step).map(|(a, d)| (a + lambda * d).clamp(lo, hi)).collect();
                let ft = residual(&trial)?;
                if norm(&ft) < f0 {
                    k = trial;
                    f = ft;
                    improved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if norm(&f) <= ANGLE_TOL {
            let matched = with(&k)?;
            let mut angle_error = vec![0.0; pot.n()];
            for (&(j, _), e) in targets.iter().zip(&f) {
                angle_error[j] = e.abs();
            }
            let kappa = bumps_of(&matched);
            return Ok((
                matched,
                MatchReport { kappa, angle_error, newton_iterations: total_iters, starts_tried: tried + 1 },
            ));
        }
    }
    Err(Error::NoCrossing { lo, hi })
}

/// Full re-integration (from `xi_max` down to 0) of every level's
/// subordinate solution: returns `|wrap(ψ_j - θ_j)|` per level with `θ_j`.
pub fn verify_boundary(pot: &Potential, xi_max: f64) -> Result<Vec<(usize, f64)>> {
    (0..pot.n())
        .into_par_iter()
        .filter_map(|j| pot.level(j).theta_bc.map(|t| (j, t)))
        .map(|(j, th)| {
            let tr = transport_to_switch(pot, j, xi_max)?;
            Ok((j, wrap_half(angle_at_zero(pot, &tr)? - th).abs()))
        })
        .collect()
}
