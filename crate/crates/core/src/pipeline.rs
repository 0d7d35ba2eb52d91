//! End-to-end orchestration: phases → potential → subordinate solutions →
//! fits → certificate report, plus the method comparison used by the
//! `asymptotics` command.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{certify_l2_with_mass, fit_decay, theorem_report, CertificateReport, DecayFit, L2Certificate, ReportInputs};
use crate::boundary::{match_all, MatchReport, DEFAULT_KAPPA_RANGE};
use crate::error::{Error, Result};
use crate::integrator::{generic_forward, subordinate_by_backward, subordinate_on_grid, SolutionTrace};
use crate::levinson::{levinson_subordinate, normalized_discrepancy, LevinsonOptions};
use crate::liouville::{inverse_map, ModelParams, DEFAULT_TOL};
use crate::phase_search::{search_phases, SearchOutcome};
use crate::potential::{build_thm13_spec, build_thm15_spec, tail_sup_x, EnergyLevel, Mode, Potential, PotentialSpec, TailSup};

/// Lower edge of every fit window.
pub const FIT_LO: f64 = 1e3;
/// Smallest `ξ_max` whose fit window `[10³, ξ_max/√10]` spans 1.5 decades.
pub const MIN_XI_MAX: f64 = 1e5;

pub fn check_xi_max(xi_max: f64) -> Result<()> {
    if !(xi_max.is_finite() && xi_max >= MIN_XI_MAX) {
        return Err(Error::InvalidConfig(format!(
            "xi_max must be >= {MIN_XI_MAX:e} so the fit window spans 1.5 decades, got {xi_max}"
        )));
    }
    Ok(())
}

/// Lower edge of the Levinson window (where `‖Q‖ ≤ 1/2` at moderate α).
pub const LEVINSON_LO: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub alpha: f64,
    /// Number of levels (equally spaced mode).
    pub n: Option<usize>,
    pub amplitude: Option<f64>,
    pub seed: u64,
    pub xi_max: f64,
    pub tol_ode: f64,
    pub tol_quad: f64,
    pub max_samples: usize,
    /// Energies, phases, cutoffs and boundary angles (cutoff mode).
    pub levels: Vec<EnergyLevel>,
    pub kappa_range: (f64, f64),
}

impl RunConfig {
    pub fn new(mode: Mode, alpha: f64) -> Self {
        RunConfig {
            mode,
            alpha,
            n: None,
            amplitude: None,
            seed: 0,
            xi_max: 1e5,
            tol_ode: DEFAULT_TOL,
            tol_quad: DEFAULT_TOL,
            max_samples: 64,
            levels: Vec::new(),
            kappa_range: DEFAULT_KAPPA_RANGE,
        }
    }

    /// Cheap precondition checks; nothing is computed before they pass.
    pub fn validate(&self) -> Result<()> {
        self.base_params()?;
        check_xi_max(self.xi_max)?;
        if let Some(a) = self.amplitude {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::InvalidConfig(format!("amplitude must be non-negative, got {a}")));
            }
        }
        if self.max_samples == 0 {
            return Err(Error::InvalidConfig("max_samples must be positive".into()));
        }
        if !(self.kappa_range.0 < self.kappa_range.1) {
            return Err(Error::InvalidConfig("kappa range must be increasing".into()));
        }
        match self.mode {
            Mode::Thm13 => {
                ModelParams::new(self.alpha)?.require_embed_regime()?;
                match self.n {
                    Some(n) if n >= 2 => {}
                    Some(n) => {
                        return Err(Error::InvalidConfig(format!("thm13 mode needs N >= 2, got {n}")))
                    }
                    None => return Err(Error::InvalidConfig("thm13 mode needs N".into())),
                }
                if !self.levels.is_empty() {
                    return Err(Error::InvalidConfig("explicit levels are only used in thm15 mode".into()));
                }
            }
            Mode::Thm15 => {
                if self.levels.is_empty() {
                    return Err(Error::InvalidConfig("thm15 mode needs at least one level".into()));
                }
                if let Some(n) = self.n {
                    if n != self.levels.len() {
                        return Err(Error::InvalidConfig(format!("N = {n} but {} levels given", self.levels.len())));
                    }
                }
                if self.amplitude.is_none() {
                    return Err(Error::InvalidConfig("thm15 mode needs an amplitude a".into()));
                }
            }
        }
        Ok(())
    }

    pub fn base_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.alpha)?.with_tolerances(self.tol_ode, self.tol_quad)
    }
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub potential: Potential,
    pub phases: Option<SearchOutcome>,
    pub matching: Option<MatchReport>,
}

/// Builds the potential of `cfg`, including phase search (equally spaced
/// mode) and boundary matching (cutoff mode with boundary angles).
pub fn construct(cfg: &RunConfig) -> Result<Construction> {
    cfg.validate()?;
    let base = cfg.base_params()?;
    match cfg.mode {
        Mode::Thm13 => {
            let n = cfg.n.expect("validated");
            let search = search_phases(n, cfg.max_samples, cfg.seed)?;
            let potential = build_thm13_spec(n, &base, &search.phases, cfg.amplitude)?;
            Ok(Construction { potential, phases: Some(search), matching: None })
        }
        Mode::Thm15 => {
            let amplitude = cfg.amplitude.expect("validated");
            let pot = build_thm15_spec(&cfg.levels, amplitude, &base)?;
            if cfg.levels.iter().any(|l| l.theta_bc.is_some()) {
                let (potential, rep) = match_all(&pot, cfg.kappa_range, cfg.xi_max)?;
                Ok(Construction { potential, phases: None, matching: Some(rep) })
            } else {
                Ok(Construction { potential: pot, phases: None, matching: None })
            }
        }
    }
}

pub fn construct_from_spec(spec: PotentialSpec) -> Result<Potential> {
    Potential::new(spec)
}

/// Last decade of `x` below `x(ξ_max)`, clipped to the active region.
pub fn tail_window_x(pot: &Potential, xi_max: f64) -> Result<(f64, f64)> {
    let p = pot.params();
    let x_hi = inverse_map(xi_max, p)?;
    let x_lo = (x_hi / 10.0).max(inverse_map(pot.active_start(), p)?);
    if !(x_hi > x_lo) {
        return Err(Error::InvalidConfig(format!("xi_max = {xi_max} leaves no tail window")));
    }
    Ok((x_lo, x_hi))
}

/// Fit window `[max(10³, 10 ξ_on), ξ_max/√10]` of level `j`.
pub fn fit_window(pot: &Potential, j: usize, xi_max: f64) -> (f64, f64) {
    (FIT_LO.max(10.0 * pot.level_start(j)), xi_max / 10f64.sqrt())
}

/// Lower end of stored traces.
fn trace_lo(pot: &Potential) -> f64 {
    pot.params().xi_start.max(10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub trace: SolutionTrace,
    pub fit: DecayFit,
    pub l2: L2Certificate,
}

#[derive(Debug, Clone)]
pub struct EmbedOutput {
    pub construction: Construction,
    pub sup: TailSup,
    pub sup_window_x: (f64, f64),
    pub levels: Vec<LevelResult>,
    pub report: CertificateReport,
}

/// Subordinate solution, envelope fit and L² certificate of level `j`.
pub fn certify_level(pot: &Potential, j: usize, xi_max: f64) -> Result<LevelResult> {
    let window = fit_window(pot, j, xi_max);
    let trace = subordinate_by_backward(pot, j, xi_max, trace_lo(pot).min(window.0))?;
    let fit = fit_decay(&trace.xi, &trace.r, window, true)?;
    let l2 = certify_l2_with_mass(&fit, &trace.xi, &trace.r, trace.energy, pot.params());
    Ok(LevelResult { level: j, energy: trace.energy, trace, fit, l2 })
}

/// Measures and certifies an already constructed potential.
pub fn certify_potential(pot: &Potential, xi_max: f64) -> Result<(TailSup, (f64, f64), Vec<LevelResult>, CertificateReport)> {
    let window = tail_window_x(pot, xi_max)?;
    let (sup, levels) = rayon::join(
        || tail_sup_x(pot, window.0, window.1),
        || (0..pot.n()).into_par_iter().map(|j| certify_level(pot, j, xi_max)).collect::<Result<Vec<_>>>(),
    );
    let (sup, levels) = (sup?, levels?);
    let report = theorem_report(&ReportInputs {
        mode: Some(pot.spec().mode),
        alpha: Some(pot.params().alpha),
        a: Some(pot.amplitude()),
        energies: pot.spec().energies(),
        sup: Some(sup),
        sup_window_x: Some(window),
        fits: levels.iter().map(|l| l.fit).collect(),
        l2: levels.iter().map(|l| l.l2).collect(),
    })?;
    Ok((sup, window, levels, report))
}

pub fn embed(cfg: &RunConfig) -> Result<EmbedOutput> {
    let construction = construct(cfg)?;
    let (sup, sup_window_x, levels, report) = certify_potential(&construction.potential, cfg.xi_max)?;
    Ok(EmbedOutput { construction, sup, sup_window_x, levels, report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevinsonSummary {
    pub window: (f64, f64),
    pub fit: Option<DecayFit>,
    pub iteration_count: usize,
    pub gap_ratios: Vec<f64>,
    pub q_norm_max: f64,
    pub r_norm_integral: f64,
    pub residual: f64,
    /// Normalised discrepancy against backward integration on the same grid.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAsymptotics {
    pub level: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    /// `-a` for the subordinate, `+a` for generic solutions.
    pub predicted_rate: f64,
    pub backward_fit: DecayFit,
    pub forward_fit: DecayFit,
    pub levinson: Option<LevinsonSummary>,
    pub levinson_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonResonant {
    #[serde(rename = "E")]
    pub energy: f64,
    pub window: (f64, f64),
    pub max_over_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub schema: u32,
    pub alpha: f64,
    pub a: f64,
    pub xi_max: f64,
    pub levels: Vec<LevelAsymptotics>,
    pub non_resonant: Vec<NonResonant>,
}

/// `max R / min R` of a generic solution at `energy` over `[lo, hi]`.
pub fn non_resonant_ratio(pot: &Potential, energy: f64, lo: f64, hi: f64) -> Result<NonResonant> {
    let tr = generic_forward(pot, energy, 0.0, trace_lo(pot).min(lo), hi)?;
    let inside: Vec<f64> = tr.xi.iter().zip(&tr.r).filter(|(x, _)| **x >= lo && **x <= hi).map(|(_, r)| *r).collect();
    let max = inside.iter().cloned().fold(f64::MIN, f64::max);
    let min = inside.iter().cloned().fold(f64::MAX, f64::min);
    Ok(NonResonant { energy, window: (lo, hi), max_over_min: max / min })
}

fn levinson_summary(pot: &Potential, j: usize, xi_max: f64) -> Result<LevinsonSummary> {
    let lo = LEVINSON_LO.max(pot.level_start(j));
    let sol = levinson_subordinate(pot, j, &LevinsonOptions::new(lo, xi_max))?;
    let back = subordinate_on_grid(pot, j, &sol.grid)?;
    let a: Vec<[f64; 2]> = back.y1.iter().zip(&back.y2).map(|(p, q)| [*p, *q]).collect();
    let b: Vec<[f64; 2]> = sol.y1.iter().zip(&sol.y2).map(|(p, q)| [*p, *q]).collect();
    let fit = fit_decay(&sol.grid, &sol.r, (FIT_LO.max(10.0 * lo), xi_max / 10.0), true).ok();
    Ok(LevinsonSummary {
        window: (lo, xi_max),
        fit,
        iteration_count: sol.iteration_count,
        gap_ratios: sol.gap_ratios(),
        q_norm_max: sol.q_norm_max,
        r_norm_integral: sol.r_norm_integral,
        residual: sol.residual,
        discrepancy: normalized_discrepancy(&a, &b),
    })
}

/// Per-level comparison of the Picard and backward subordinate solutions,
/// generic growth, and boundedness between consecutive levels.
pub fn asymptotics(pot: &Potential, xi_max: f64) -> Result<AsymptoticsReport> {
    let a = pot.amplitude();
    let levels = (0..pot.n())
        .into_par_iter()
        .map(|j| {
            let level = pot.level(j);
            let lo = trace_lo(pot);
            let window = fit_window(pot, j, xi_max);
            let back = subordinate_by_backward(pot, j, xi_max, lo.min(window.0))?;
            let backward_fit = fit_decay(&back.xi, &back.r, window, true)?;
            let fwd_lo = FIT_LO.max(10.0 * pot.level_start(j));
            let fwd = generic_forward(pot, level.energy, level.t, lo.min(fwd_lo), xi_max)?;
            let forward_fit = fit_decay(&fwd.xi, &fwd.r, (fwd_lo, xi_max), true)?;
            let (levinson, levinson_error) = match levinson_summary(pot, j, xi_max) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            Ok(LevelAsymptotics {
                level: j,
                energy: level.energy,
                predicted_rate: a,
                backward_fit,
                forward_fit,
                levinson,
                levinson_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut es = pot.spec().energies();
    es.sort_by(f64::total_cmp);
    let lo = FIT_LO.max(10.0 * pot.active_start());
    let non_resonant = es
        .par_windows(2)
        .map(|w| non_resonant_ratio(pot, 0.5 * (w[0] + w[1]), lo, xi_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticsReport { schema: 1, alpha: pot.params().alpha, a, xi_max, levels, non_resonant })
}
