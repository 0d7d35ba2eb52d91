//! Generalized Wigner-von Neumann potentials
//!
//! `V(ξ) = (4a/ξ) Σ_j χ_j(ξ) sin(2Φ_{E_j}(ξ) + 2t_j)`
//!
//! and their physical form `q(x) = x^α V(ξ(x))`. `V` vanishes up to
//! `max(1, ξ_start)`; in the cutoff mode term `j` is switched on at `a_j`.
//! Optional boundary-matching bumps `κ_j w_j(ξ)` live in disjoint slots of
//! `(1, 2)` and are added on top of `V`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{forward_map, inverse_map, ModelParams};
use crate::phase::PhaseTable;
use crate::phase_search::PhaseVector;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Equally spaced energies `E_j = j/(Nτ)` with searched phases.
    Thm13,
    /// Arbitrary distinct energies with staggered cutoffs.
    Thm15,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    #[serde(rename = "E")]
    pub energy: f64,
    /// Phase `t_j ∈ [0, π)`.
    pub t: f64,
    #[serde(default)]
    pub a_cut: Option<f64>,
    #[serde(default)]
    pub theta_bc: Option<f64>,
}

impl EnergyLevel {
    pub fn new(energy: f64) -> Self {
        EnergyLevel { energy, t: 0.0, a_cut: None, theta_bc: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub schema: u32,
    pub mode: Mode,
    pub amplitude: f64,
    pub levels: Vec<EnergyLevel>,
    pub params: ModelParams,
    /// Bump coefficients `κ_j`, one per level (empty: no bumps).
    #[serde(default)]
    pub bumps: Vec<f64>,
}

/// `a` at the integrability threshold: `(2-α)/(2(2+α))`.
pub fn amplitude_threshold(alpha: f64) -> f64 {
    (2.0 - alpha) / (2.0 * (2.0 + alpha))
}

/// Default amplitude of the equally spaced construction: `(2-α)/(2+α)`.
pub fn default_amplitude(alpha: f64) -> f64 {
    (2.0 - alpha) / (2.0 + alpha)
}

/// `48 (2-α) √(N ln N)`.
pub fn thm13_bound(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    48.0 * (2.0 - alpha) * (nf * nf.ln()).sqrt()
}

/// `2 (2+α) a N`.
pub fn thm15_bound(n: usize, alpha: f64, a: f64) -> f64 {
    2.0 * (2.0 + alpha) * a * n as f64
}

/// `ε = 2(2+α)a - (2-α)`, the excess over the optimal constant.
pub fn thm15_epsilon(alpha: f64, a: f64) -> f64 {
    2.0 * (2.0 + alpha) * a - (2.0 - alpha)
}

impl PotentialSpec {
    pub fn n(&self) -> usize {
        self.levels.len()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!("unsupported schema {}", self.schema)));
        }
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("at least one energy level is required".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidConfig(format!("amplitude must be non-negative, got {}", self.amplitude)));
        }
        let mut es = self.energies();
        if es.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidConfig("energies must be finite".into()));
        }
        es.sort_by(f64::total_cmp);
        if es.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("energies must be pairwise distinct".into()));
        }
        let emax = es.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        if p.xi_for_beta_bound(emax, 0.5) > p.xi_start * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "xi_start = {} too small: |beta| exceeds 1/2 for |E| = {emax}",
                p.xi_start
            )));
        }
        for l in &self.levels {
            if !(l.t >= 0.0 && l.t < PI) {
                return Err(Error::InvalidConfig(format!("phase t must lie in [0, pi), got {}", l.t)));
            }
            if let Some(th) = l.theta_bc {
                if !(0.0..=PI).contains(&th) {
                    return Err(Error::InvalidConfig(format!("boundary angle must lie in [0, pi], got {th}")));
                }
            }
        }
        if !self.bumps.is_empty() && self.bumps.len() != self.levels.len() {
            return Err(Error::InvalidConfig("one bump coefficient per level is required".into()));
        }
        if self.bumps.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidConfig("bump coefficients must be finite".into()));
        }
        match self.mode {
            Mode::Thm13 => {
                p.require_embed_regime()?;
                // a = 0 is the unperturbed reference operator
                if self.amplitude != 0.0 && self.amplitude <= amplitude_threshold(p.alpha) {
                    return Err(Error::InvalidConfig(format!(
                        "amplitude must be 0 or exceed (2-alpha)/(2(2+alpha)) = {}",
                        amplitude_threshold(p.alpha)
                    )));
                }
                if self.levels.iter().any(|l| l.a_cut.is_some()) {
                    return Err(Error::InvalidConfig("cutoffs are only used in thm15 mode".into()));
                }
            }
            Mode::Thm15 => {
                for l in &self.levels {
                    match l.a_cut {
                        Some(c) if c >= p.xi_start => {}
                        Some(c) => {
                            return Err(Error::InvalidConfig(format!(
                                "cutoff {c} below xi_start = {}",
                                p.xi_start
                            )))
                        }
                        None => return Err(Error::InvalidConfig("thm15 mode needs a cutoff per level".into())),
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runtime form of a spec: phase tables are built once and shared.
#[derive(Debug, Clone)]
pub struct Potential {
    spec: PotentialSpec,
    tables: Arc<[PhaseTable]>,
    active_start: f64,
}

impl Potential {
    pub fn new(spec: PotentialSpec) -> Result<Self> {
        spec.validate()?;
        let tables: Vec<PhaseTable> = spec
            .levels
            .par_iter()
            .map(|l| PhaseTable::new(l.energy, &spec.params))
            .collect::<Result<_>>()?;
        let active_start = spec.params.xi_start.max(1.0);
        Ok(Potential { spec, tables: tables.into(), active_start })
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn params(&self) -> &ModelParams {
        &self.spec.params
    }

    pub fn n(&self) -> usize {
        self.spec.levels.len()
    }

    pub fn amplitude(&self) -> f64 {
        self.spec.amplitude
    }

    pub fn level(&self, j: usize) -> &EnergyLevel {
        &self.spec.levels[j]
    }

    pub fn table(&self, j: usize) -> &PhaseTable {
        &self.tables[j]
    }

    /// `V ≡ 0` on `[0, active_start]`.
    pub fn active_start(&self) -> f64 {
        self.active_start
    }

    /// Where term `j` switches on.
    pub fn level_start(&self, j: usize) -> f64 {
        self.spec.levels[j].a_cut.unwrap_or(self.active_start).max(self.active_start)
    }

    /// Term `j` contributes at `ξ`.
    #[inline]
    pub fn level_active(&self, j: usize, xi: f64) -> bool {
        xi > self.active_start && self.spec.levels[j].a_cut.map_or(true, |c| xi >= c)
    }

    /// `Φ_{E_j}(ξ) + t_j` for `ξ ≥ ξ_start`.
    #[inline]
    pub fn level_angle(&self, j: usize, xi: f64) -> f64 {
        self.tables[j].phase_unchecked(xi) + self.spec.levels[j].t
    }

    /// Points where `V` or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![self.active_start];
        b.extend(self.spec.levels.iter().filter_map(|l| l.a_cut));
        if !self.spec.bumps.is_empty() {
            let n = self.n();
            b.extend((0..=n).map(|j| 1.0 + j as f64 / n as f64));
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    pub fn eval_v(&self, xi: f64) -> f64 {
        if !(xi > self.active_start) || self.spec.amplitude == 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        for j in 0..self.n() {
            if self.level_active(j, xi) {
                s += (2.0 * self.level_angle(j, xi)).sin();
            }
        }
        4.0 * self.spec.amplitude / xi * s
    }

    /// Sum of boundary-matching bumps at `ξ`.
    pub fn eval_bump(&self, xi: f64) -> f64 {
        if self.spec.bumps.is_empty() || !(xi > 1.0 && xi < 2.0) {
            return 0.0;
        }
        let n = self.n();
        let j = (((xi - 1.0) * n as f64).floor() as usize).min(n - 1);
        let (lo, hi) = bump_slot(j, n);
        self.spec.bumps[j] * bump_profile(xi, lo, hi)
    }

    /// `V + W`, the full perturbation in the `ξ` variable.
    #[inline]
    pub fn eval_total(&self, xi: f64) -> f64 {
        self.eval_v(xi) + self.eval_bump(xi)
    }

    /// `q(x) = x^α (V + W)(ξ(x))`.
    pub fn eval_q(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let xi = forward_map(x, self.params()).expect("x > 0");
        let v = self.eval_total(xi);
        if v == 0.0 {
            0.0
        } else {
            x.powf(self.params().alpha) * v
        }
    }

    /// Returns a copy with the bump coefficients replaced.
    pub fn with_bumps(&self, bumps: Vec<f64>) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.bumps = bumps;
        spec.validate()?;
        Ok(Potential { spec, tables: self.tables.clone(), active_start: self.active_start })
    }

    /// Samples `(x, q, ξ, V)` on a uniform `x` grid.
    pub fn samples(&self, x_lo: f64, x_hi: f64, count: usize) -> Vec<[f64; 4]> {
        let count = count.max(2);
        (0..count)
            .into_par_iter()
            .map(|k| {
                let x = x_lo + (x_hi - x_lo) * k as f64 / (count - 1) as f64;
                let xi = forward_map(x, self.params()).unwrap_or(0.0);
                [x, self.eval_q(x), xi, self.eval_total(xi)]
            })
            .collect()
    }
}

/// Slot `(1 + j/N, 1 + (j+1)/N)` reserved for level `j`'s bump.
pub fn bump_slot(j: usize, n: usize) -> (f64, f64) {
    (1.0 + j as f64 / n as f64, 1.0 + (j + 1) as f64 / n as f64)
}

/// `C²` polynomial bump on `(lo, hi)` with unit integral.
pub fn bump_profile(xi: f64, lo: f64, hi: f64) -> f64 {
    if !(xi > lo && xi < hi) {
        return 0.0;
    }
    let u = (xi - lo) / (hi - lo);
    let b = u * (1.0 - u);
    140.0 / (hi - lo) * b * b * b
}

/// Equally spaced construction: `E_j = j/(Nτ)`, `t_j` aligned so that
/// `t_j + t̃_j ≡ πθ_j (mod π)`.
pub fn build_thm13_spec(
    n: usize,
    base: &ModelParams,
    phases: &PhaseVector,
    amplitude: Option<f64>,
) -> Result<Potential> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "the equally spaced construction needs N >= 2 (got {n}); use thm15 mode for a single level"
        )));
    }
    base.require_embed_regime()?;
    if phases.n() != n {
        return Err(Error::InvalidConfig(format!("expected {n} phases, got {}", phases.n())));
    }
    let energies: Vec<f64> = (1..=n).map(|j| j as f64 / (n as f64 * base.tau)).collect();
    let params = base.with_energies(&energies)?;
    let tables: Vec<PhaseTable> = energies
        .par_iter()
        .map(|&e| PhaseTable::new(e, &params))
        .collect::<Result<_>>()?;
    let levels = energies
        .iter()
        .zip(&tables)
        .zip(&phases.theta)
        .map(|((&e, table), &theta)| {
            let tt = table.tilde_t().expect("alpha > 2/3 checked");
            let mut t = (PI * theta - tt).rem_euclid(PI);
            if t >= PI {
                t = 0.0;
            }
            EnergyLevel { energy: e, t, a_cut: None, theta_bc: None }
        })
        .collect();
    let spec = PotentialSpec {
        schema: SCHEMA_VERSION,
        mode: Mode::Thm13,
        amplitude: amplitude.unwrap_or_else(|| default_amplitude(params.alpha)),
        levels,
        params,
        bumps: Vec::new(),
    };
    spec.validate()?;
    let active_start = params.xi_start.max(1.0);
    Ok(Potential { spec, tables: tables.into(), active_start })
}

/// Arbitrary distinct energies; missing cutoffs default to `ξ_start · 2^j`
/// (j = 1, 2, ...).
pub fn build_thm15_spec(levels: &[EnergyLevel], amplitude: f64, base: &ModelParams) -> Result<Potential> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("at least one energy level is required".into()));
    }
    if !(amplitude > amplitude_threshold(base.alpha)) {
        return Err(Error::InvalidConfig(format!(
            "amplitude must exceed (2-alpha)/(2(2+alpha)) = {}, got {amplitude}",
            amplitude_threshold(base.alpha)
        )));
    }
    let energies: Vec<f64> = levels.iter().map(|l| l.energy).collect();
    let params = base.with_energies(&energies)?;
    let levels = levels
        .iter()
        .enumerate()
        .map(|(j, l)| EnergyLevel {
            a_cut: Some(l.a_cut.unwrap_or(params.xi_start * 2f64.powi(j as i32 + 1))),
            ..*l
        })
        .collect();
    Potential::new(PotentialSpec {
        schema: SCHEMA_VERSION,
        mode: Mode::Thm15,
        amplitude,
        levels,
        params,
        bumps: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSup {
    pub value: f64,
    pub points: usize,
    pub step: f64,
    /// Approximate number of oscillations in the window.
    pub oscillations: f64,
    /// Fewer than 100 oscillations: a poor proxy for a limsup.
    pub narrow: bool,
    pub converged: bool,
}

const MAX_REFINEMENTS: usize = 8;

/// Dense-grid sup of `f` over `[lo, hi]` with step halving until two
/// successive sups agree within 0.5%.
fn refined_sup<F: Fn(f64) -> f64 + Sync>(f: F, lo: f64, hi: f64) -> TailSup {
    let mut cells = ((hi - lo) / (PI / 8.0)).ceil().max(1.0) as usize;
    let grid_max = |cells: usize, stride: usize, offset: usize| -> f64 {
        let h = (hi - lo) / cells as f64;
        (0..(cells - offset) / stride + 1)
            .into_par_iter()
            .map(|k| {
                let i = offset + k * stride;
                if i > cells {
                    return 0.0;
                }
                f(if i == cells { hi } else { lo + h * i as f64 }).abs()
            })
            .reduce(|| 0.0f64, f64::max)
    };
    let mut sup = grid_max(cells, 1, 0);
    let mut points = cells + 1;
    let mut converged = false;
    for _ in 0..MAX_REFINEMENTS {
        cells *= 2;
        let mid = grid_max(cells, 2, 1);
        points += cells / 2;
        let next = sup.max(mid);
        let agree = next == 0.0 || (next - sup) <= 0.005 * next;
        sup = next;
        if agree {
            converged = true;
            break;
        }
    }
    let oscillations = (hi - lo) / PI;
    TailSup {
        value: sup,
        points,
        step: (hi - lo) / cells as f64,
        oscillations,
        narrow: oscillations < 100.0,
        converged,
    }
}

/// Sup of `ξ|V(ξ)|` over `[xi_lo, xi_hi]`.
pub fn tail_sup_xi(pot: &Potential, xi_lo: f64, xi_hi: f64) -> Result<TailSup> {
    if !(xi_lo >= pot.active_start() && xi_hi > xi_lo) {
        return Err(Error::Domain(format!(
            "tail window [{xi_lo}, {xi_hi}] must lie above the active start {}",
            pot.active_start()
        )));
    }
    Ok(refined_sup(|xi| xi * pot.eval_v(xi), xi_lo, xi_hi))
}

/// Sup of `x^{1-α/2}|q(x)|` over `[x_lo, x_hi]`, sampled uniformly in `ξ`
/// (the oscillation period there is constant).
pub fn tail_sup_x(pot: &Potential, x_lo: f64, x_hi: f64) -> Result<TailSup> {
    let p = *pot.params();
    let xi_lo = forward_map(x_lo, &p)?;
    let xi_hi = forward_map(x_hi, &p)?;
    if !(xi_lo >= pot.active_start() && xi_hi > xi_lo) {
        return Err(Error::Domain(format!(
            "tail window [{x_lo}, {x_hi}] must lie above the active start x = {}",
            inverse_map(pot.active_start(), &p)?
        )));
    }
    let expo = 1.0 - 0.5 * p.alpha;
    Ok(refined_sup(
        |xi| {
            let x = inverse_map(xi, &p).expect("xi >= 0");
            x.powf(expo) * pot.eval_q(x)
        },
        xi_lo,
        xi_hi,
    ))
}
