//! Quantitative checks on traces and potentials: power-law fits of Prüfer
//! amplitudes, weighted-L² certification, decay of oscillatory integrals,
//! the Taylor expansion of the phase, and the aggregated theorem report.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{weight_unchecked, ModelParams};
use crate::phase::PhaseTable;
use crate::potential::{thm13_bound, thm15_bound, thm15_epsilon, Mode, TailSup};
use crate::quadrature::PanelGrid;

pub const MIN_DECADES: f64 = 1.5;
pub const MIN_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub r_squared: f64,
}

fn ols(points: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, intercept, stderr, r2)
}

/// Least-squares fit of `ln R` against `ln ξ` on `window`. With `envelope`
/// the fit runs on the maxima of `R` over consecutive bins of length `2π`
/// (bins holding a single sample keep it).
pub fn fit_decay(xi: &[f64], r: &[f64], window: (f64, f64), envelope: bool) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::WindowTooShort(format!("invalid window [{lo}, {hi}]")));
    }
    if (hi / lo).log10() < MIN_DECADES - 1e-9 {
        return Err(Error::WindowTooShort(format!(
            "window [{lo:e}, {hi:e}] spans {:.2} decades, need {MIN_DECADES}",
            (hi / lo).log10()
        )));
    }
    let inside: Vec<(f64, f64)> = xi
        .iter()
        .zip(r)
        .filter(|(x, _)| **x >= lo * (1.0 - 1e-12) && **x <= hi * (1.0 + 1e-12))
        .map(|(x, r)| (*x, *r))
        .collect();
    if inside.len() < MIN_POINTS {
        return Err(Error::WindowTooShort(format!(
            "{} samples in window, need {MIN_POINTS}",
            inside.len()
        )));
    }
    if let Some((x, v)) = inside.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("amplitude must be positive, got {v} at xi = {x}")));
    }
    let pts: Vec<(f64, f64)> = if envelope {
        let mut out = Vec::new();
        let mut bin_start = inside[0].0;
        let mut best = inside[0];
        for &(x, v) in &inside[1..] {
            if x - bin_start >= 2.0 * PI {
                out.push(best);
                bin_start = x;
                best = (x, v);
            } else if v > best.1 {
                best = (x, v);
            }
        }
        out.push(best);
        out.into_iter().map(|(x, v)| (x.ln(), v.ln())).collect()
    } else {
        inside.iter().map(|(x, v)| (x.ln(), v.ln())).collect()
    };
    if pts.len() < 3 {
        return Err(Error::WindowTooShort("fewer than 3 envelope points".into()));
    }
    let (exponent, intercept, stderr, r_squared) = ols(&pts);
    Ok(DecayFit { exponent, intercept, stderr, window, n_points: inside.len(), r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Certificate {
    pub pass: bool,
    pub exponent: f64,
    pub stderr: f64,
    /// Amplitude exponent that makes `p |φ|²` borderline integrable:
    /// `-(1 - 2α/(2+α))/2`.
    pub threshold: f64,
    /// `threshold - exponent - 2 stderr`; positive iff `pass`.
    pub margin: f64,
    /// Exponent of the density `p |φ|²`: `2e - 2α/(2+α)`.
    pub density_exponent: f64,
    /// `∫ p |φ|²` over the fit window, when a trace was supplied.
    pub window_mass: Option<f64>,
    /// Power-law extrapolation of the mass beyond the window (∞ if divergent).
    pub tail_mass: Option<f64>,
}

/// Weighted square-integrability from a fitted amplitude exponent.
pub fn certify_l2(fit: &DecayFit, params: &ModelParams) -> L2Certificate {
    let w = params.weight_exponent();
    let threshold = -(1.0 - w) / 2.0;
    let margin = threshold - fit.exponent - 2.0 * fit.stderr;
    L2Certificate {
        pass: fit.exponent.is_finite() && fit.stderr.is_finite() && margin > 0.0,
        exponent: fit.exponent,
        stderr: fit.stderr,
        threshold,
        margin,
        density_exponent: 2.0 * fit.exponent - w,
        window_mass: None,
        tail_mass: None,
    }
}

/// [`certify_l2`] plus the window mass of `p R² / (2 s²)` (the
/// period-averaged `p φ²`) and its power-law tail.
pub fn certify_l2_with_mass(
    fit: &DecayFit,
    xi: &[f64],
    r: &[f64],
    energy: f64,
    params: &ModelParams,
) -> L2Certificate {
    let mut cert = certify_l2(fit, params);
    let (lo, hi) = fit.window;
    let density: Vec<(f64, f64)> = xi
        .iter()
        .zip(r)
        .filter(|(x, _)| **x >= lo && **x <= hi)
        .map(|(&x, &rv)| {
            let p = weight_unchecked(x, params);
            (x, p * rv * rv / (2.0 * (1.0 + energy * p)))
        })
        .collect();
    // trapezoid in ln ξ: ∫ f dξ = ∫ f ξ d ln ξ
    let mass: f64 = density
        .windows(2)
        .map(|w| 0.5 * (w[0].1 * w[0].0 + w[1].1 * w[1].0) * (w[1].0 / w[0].0).ln())
        .sum();
    cert.window_mass = Some(mass);
    let e = cert.density_exponent;
    cert.tail_mass = Some(if e < -1.0 {
        let last = density.last().map_or(0.0, |d| d.1 * d.0);
        last / (-(e + 1.0))
    } else {
        f64::INFINITY
    });
    cert
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairSign {
    Plus,
    Minus,
}

/// Running integrals `∫_{ξ₀}^{ξ} f` on a panel grid: (nodes, values).
pub fn partial_integrals<F: Fn(f64) -> f64 + Sync>(f: F, xi0: f64, xi: f64, panel: f64) -> (Vec<f64>, Vec<f64>) {
    let grid = PanelGrid::uniform(xi0, xi, panel, 12);
    let vals: Vec<f64> = grid.points.par_iter().map(|&s| f(s)).collect();
    let (cum, total) = grid.cumulative(&vals);
    let mut xs = vec![xi0];
    let mut ys = vec![0.0];
    xs.extend_from_slice(&grid.points);
    ys.extend_from_slice(&cum);
    xs.push(xi);
    ys.push(total);
    (xs, ys)
}

fn panel_for(freq: f64) -> f64 {
    // at most ~1 radian of phase per half panel
    (2.0 / freq.abs().max(1e-3)).min(1.0)
}

fn check_window(xi0: f64, xi: f64, params: &ModelParams) -> Result<()> {
    if !(xi > xi0 && xi0 > 1.0 && xi0 >= params.xi_start) {
        return Err(Error::Domain(format!(
            "need xi > xi0 > max(1, xi_start = {}), got xi0 = {xi0}, xi = {xi}",
            params.xi_start
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscIntegral {
    pub value: f64,
    /// `sup_{ξ₀ ≤ η ≤ ξ} |∫_{ξ₀}^η|` over grid nodes.
    pub sup_partial: f64,
}

/// `∫_{ξ₀}^{ξ} sin(a Φ_E(s) + γ) / s ds`.
pub fn osc_integral_single(
    a_coef: f64,
    gamma: f64,
    energy: f64,
    xi0: f64,
    xi: f64,
    params: &ModelParams,
) -> Result<OscIntegral> {
    if a_coef == 0.0 || !a_coef.is_finite() {
        return Err(Error::InvalidConfig("the oscillation coefficient a must be non-zero".into()));
    }
    check_window(xi0, xi, params)?;
    let table = PhaseTable::new(energy, params)?;
    let freq = a_coef * table.derivative(xi0).max(1.0);
    let (_, ys) = partial_integrals(|s| (a_coef * table.phase_unchecked(s) + gamma).sin() / s, xi0, xi, panel_for(freq));
    Ok(summarize(&ys))
}

/// `∫_{ξ₀}^{ξ} sin(a (Φ_{E₁}(s) ± Φ_{E₂}(s)) + γ) / s ds`.
#[allow(clippy::too_many_arguments)]
pub fn osc_integral_pair(
    a_coef: f64,
    gamma: f64,
    e1: f64,
    e2: f64,
    sign: PairSign,
    xi0: f64,
    xi: f64,
    params: &ModelParams,
) -> Result<OscIntegral> {
    if a_coef == 0.0 || !a_coef.is_finite() {
        return Err(Error::InvalidConfig("the oscillation coefficient a must be non-zero".into()));
    }
    if sign == PairSign::Minus && e1 == e2 {
        return Err(Error::InvalidConfig(
            "the difference phase needs E1 != E2 (for E1 = E2 the integrand is sin(gamma)/s and the integral diverges)".into(),
        ));
    }
    check_window(xi0, xi, params)?;
    let t1 = PhaseTable::new(e1, params)?;
    let t2 = PhaseTable::new(e2, params)?;
    let sg = if sign == PairSign::Plus { 1.0 } else { -1.0 };
    let freq = a_coef * (t1.derivative(xi0) + sg * t2.derivative(xi0)).abs().max(1.0);
    let (_, ys) = partial_integrals(
        |s| (a_coef * (t1.phase_unchecked(s) + sg * t2.phase_unchecked(s)) + gamma).sin() / s,
        xi0,
        xi,
        panel_for(freq),
    );
    Ok(summarize(&ys))
}

/// Running integrals of the degenerate pair `E₁ = E₂` with sign `-`
/// (the integrand is `sin(γ)/s` exactly).
pub fn degenerate_pair_partials(gamma: f64, energy: f64, xi0: f64, xi: f64, params: &ModelParams) -> Result<(Vec<f64>, Vec<f64>)> {
    check_window(xi0, xi, params)?;
    let t = PhaseTable::new(energy, params)?;
    Ok(partial_integrals(
        |s| (2.0 * (t.phase_unchecked(s) - t.phase_unchecked(s)) + gamma).sin() / s,
        xi0,
        xi,
        1.0,
    ))
}

fn summarize(ys: &[f64]) -> OscIntegral {
    OscIntegral {
        value: *ys.last().expect("non-empty"),
        sup_partial: ys.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    pub xi0: Vec<f64>,
    pub sup_partial: Vec<f64>,
    /// Log-log slope of `sup_partial` against `ξ₀`.
    pub slope: f64,
}

/// Sup of partial integrals over `[ξ₀, ξ_max]` for each `ξ₀` and the fitted
/// decay slope.
pub fn decay_scan<F: Fn(f64) -> Result<OscIntegral> + Sync>(xi0s: &[f64], f: F) -> Result<DecayScan> {
    if xi0s.len() < 2 {
        return Err(Error::InvalidConfig("need at least two starting points".into()));
    }
    let sups: Vec<f64> = xi0s.par_iter().map(|&x| f(x).map(|o| o.sup_partial)).collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = xi0s.iter().zip(&sups).map(|(x, s)| (x.ln(), s.max(f64::MIN_POSITIVE).ln())).collect();
    let (slope, _, _, _) = ols(&pts);
    Ok(DecayScan { xi0: xi0s.to_vec(), sup_partial: sups, slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCheck {
    pub xi: Vec<f64>,
    pub residual: Vec<f64>,
    pub tilde_t: f64,
    /// `1 - 4α/(2+α)`.
    pub expected_slope: f64,
    /// `None` when all residuals vanish (E = 0).
    pub fitted_slope: Option<f64>,
}

impl TaylorCheck {
    /// Fitted slope within 20% of the predicted one.
    pub fn within_tolerance(&self) -> bool {
        self.fitted_slope
            .map_or(false, |s| (s - self.expected_slope).abs() <= 0.2 * self.expected_slope.abs())
    }
}

/// Residuals `Φ_E(ξ) - ξ - τ E ξ^κ - t̃_E`.
pub fn taylor_phase_check(energy: f64, params: &ModelParams, xi_list: &[f64]) -> Result<TaylorCheck> {
    params.require_embed_regime()?;
    if xi_list.iter().any(|&x| x < params.xi_start) {
        return Err(Error::Domain("all xi must be >= xi_start".into()));
    }
    let table = PhaseTable::new(energy, params)?;
    let tilde_t = table.tilde_t().expect("alpha > 2/3");
    let kappa = params.kappa();
    let residual: Vec<f64> = xi_list
        .iter()
        .map(|&x| table.phase_unchecked(x) - x - params.tau * energy * x.powf(kappa) - tilde_t)
        .collect();
    let pts: Vec<(f64, f64)> = xi_list
        .iter()
        .zip(&residual)
        .filter(|(_, r)| **r != 0.0)
        .map(|(x, r)| (x.ln(), r.abs().ln()))
        .collect();
    let fitted_slope = if pts.len() >= 2 { Some(ols(&pts).0) } else { None };
    Ok(TaylorCheck {
        xi: xi_list.to_vec(),
        residual,
        tilde_t,
        expected_slope: 1.0 - 4.0 * params.alpha / (2.0 + params.alpha),
        fitted_slope,
    })
}

/// Necessary lower bound on `limsup x^{1-α/2}|q|` for `k` eigenvalues:
/// `(2-α)/√2 · √k`.
pub fn thm11_floor(alpha: f64, k: usize) -> f64 {
    (2.0 - alpha) / 2f64.sqrt() * (k as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub schema: u32,
    pub mode: Mode,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: f64,
    pub a: f64,
    pub energies: Vec<f64>,
    pub measured_sup_x: f64,
    pub sup_window_x: (f64, f64),
    pub theorem_bound: f64,
    /// `ε = 2(2+α)a - (2-α)` of the cutoff construction.
    pub epsilon: Option<f64>,
    pub bound_ok: bool,
    pub decay_fits: Vec<DecayFit>,
    pub l2: Vec<L2Certificate>,
    pub l2_certified: Vec<bool>,
    pub certified_count: usize,
    pub thm11_floor: f64,
    pub thm11_consistent: bool,
    /// Numerics certify at least this many eigenvalues; excluding others is
    /// out of reach.
    pub eigenvalue_claim: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub mode: Option<Mode>,
    pub alpha: Option<f64>,
    pub a: Option<f64>,
    pub energies: Vec<f64>,
    pub sup: Option<TailSup>,
    pub sup_window_x: Option<(f64, f64)>,
    pub fits: Vec<DecayFit>,
    pub l2: Vec<L2Certificate>,
}

/// Aggregates the sub-checks; `pass` requires all of them.
pub fn theorem_report(inputs: &ReportInputs) -> Result<CertificateReport> {
    let missing = |w: &str| Error::IncompleteInputs(format!("missing {w}"));
    let mode = inputs.mode.ok_or_else(|| missing("mode"))?;
    let alpha = inputs.alpha.ok_or_else(|| missing("alpha"))?;
    let a = inputs.a.ok_or_else(|| missing("amplitude"))?;
    let sup = inputs.sup.ok_or_else(|| missing("tail sup measurement"))?;
    let window = inputs.sup_window_x.ok_or_else(|| missing("tail sup window"))?;
    let n = inputs.energies.len();
    if n == 0 {
        return Err(missing("energies"));
    }
    if inputs.fits.len() != n || inputs.l2.len() != n {
        return Err(Error::IncompleteInputs(format!(
            "{n} levels but {} decay fits and {} L2 checks",
            inputs.fits.len(),
            inputs.l2.len()
        )));
    }
    let (theorem_bound, epsilon) = match mode {
        Mode::Thm13 => (thm13_bound(n, alpha), None),
        Mode::Thm15 => (thm15_bound(n, alpha, a), Some(thm15_epsilon(alpha, a))),
    };
    let measured = sup.value;
    let bound_ok = measured.is_finite() && measured <= theorem_bound;
    let l2_certified: Vec<bool> = inputs.l2.iter().map(|c| c.pass).collect();
    let certified_count = l2_certified.iter().filter(|b| **b).count();
    let floor = thm11_floor(alpha, certified_count);
    let thm11_consistent = measured >= 0.9 * floor;

    let mut reasons = Vec::new();
    if !bound_ok {
        reasons.push(format!("measured sup {measured:.6} exceeds theorem bound {theorem_bound:.6}"));
    }
    for (j, c) in inputs.l2.iter().enumerate() {
        if !c.pass {
            reasons.push(format!(
                "level {j}: decay exponent {:.4} (stderr {:.1e}) does not beat L2 threshold {:.4}",
                c.exponent, c.stderr, c.threshold
            ));
        }
    }
    if !thm11_consistent {
        reasons.push(format!(
            "measured sup {measured:.6} below 90% of the necessary floor {floor:.6} for {certified_count} eigenvalues"
        ));
    }
    if certified_count == 0 {
        reasons.push("no eigensolution certified".into());
    }
    if sup.narrow {
        reasons.push("tail window has fewer than 100 oscillations".into());
    }
    let finite = measured.is_finite()
        && inputs.fits.iter().all(|f| f.exponent.is_finite() && f.stderr.is_finite())
        && inputs.l2.iter().all(|c| c.margin.is_finite());
    if !finite {
        reasons.push("non-finite quantity in report".into());
    }
    let pass = reasons.is_empty();
    Ok(CertificateReport {
        schema: 1,
        mode,
        n,
        alpha,
        a,
        energies: inputs.energies.clone(),
        measured_sup_x: measured,
        sup_window_x: window,
        theorem_bound,
        epsilon,
        bound_ok,
        decay_fits: inputs.fits.clone(),
        l2: inputs.l2.clone(),
        l2_certified,
        certified_count,
        thm11_floor: floor,
        thm11_consistent,
        eigenvalue_claim: format!(">= {certified_count} certified"),
        verdict: Verdict { pass, reasons },
    })
}

impl CertificateReport {
    /// Plain-text summary table.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "mode {:?}  N = {}  alpha = {}  a = {:.6}\n",
            self.mode, self.n, self.alpha, self.a
        ));
        s.push_str(&format!(
            "sup x^(1-alpha/2)|q| on [{:.4e}, {:.4e}]: {:.6}  (bound {:.6}) {}\n",
            self.sup_window_x.0,
            self.sup_window_x.1,
            self.measured_sup_x,
            self.theorem_bound,
            if self.bound_ok { "ok" } else { "FAIL" }
        ));
        if let Some(eps) = self.epsilon {
            s.push_str(&format!("epsilon = {eps:.6}, bound (2-alpha+eps)N = {:.6}\n", self.theorem_bound));
        }
        s.push_str("level  E                 exponent   stderr     L2\n");
        for (j, ((e, f), c)) in self.energies.iter().zip(&self.decay_fits).zip(&self.l2).enumerate() {
            s.push_str(&format!(
                "{j:<6} {e:<17.10} {:<10.5} {:<10.2e} {}\n",
                f.exponent,
                f.stderr,
                if c.pass { "certified" } else { "not certified" }
            ));
        }
        s.push_str(&format!(
            "necessary floor {:.6} (x0.9) {}\neigenvalues: {}\nverdict: {}\n",
            self.thm11_floor,
            if self.thm11_consistent { "consistent" } else { "VIOLATED" },
            self.eigenvalue_claim,
            if self.verdict.pass { "PASS" } else { "FAIL" }
        ));
        for r in &self.verdict.reasons {
            s.push_str(&format!("  - {r}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn synthetic_power_laws() {
        let xs = grid(1e3, 1e5, 200);
        let r: Vec<f64> = xs.iter().map(|x| x.powf(0.33)).collect();
        let f = fit_decay(&xs, &r, (1e3, 1e5), false).unwrap();
        assert!((f.exponent - 0.33).abs() < 1e-3 && f.r_squared > 0.999_999);
        let c: Vec<f64> = xs.iter().map(|_| 2.5).collect();
        assert!(fit_decay(&xs, &c, (1e3, 1e5), false).unwrap().exponent.abs() < 1e-6);
        let dense: Vec<f64> = (0..200_000).map(|i| 1e3 + 0.495 * i as f64).collect();
        let osc: Vec<f64> = dense.iter().map(|x| x.powf(0.33) * (1.0 + 0.2 * x.sin())).collect();
        let e = fit_decay(&dense, &osc, (1e3, 1e5), true).unwrap();
        assert!((e.exponent - 0.33).abs() < 0.02, "{}", e.exponent);
    }

    #[test]
    fn short_windows_rejected() {
        let xs = grid(1e3, 1e5, 200);
        let r: Vec<f64> = xs.iter().map(|x| x.powf(-0.3)).collect();
        assert!(matches!(fit_decay(&xs, &r, (1e3, 1e4), false), Err(Error::WindowTooShort(_))));
        let few = grid(1e3, 1e5, 30);
        let rf: Vec<f64> = few.iter().map(|x| x.powf(-0.3)).collect();
        assert!(matches!(fit_decay(&few, &rf, (1e3, 1e5), false), Err(Error::WindowTooShort(_))));
    }

    fn fit_with(e: f64, se: f64) -> DecayFit {
        DecayFit { exponent: e, intercept: 0.0, stderr: se, window: (1e3, 1e5), n_points: 128, r_squared: 1.0 }
    }

    #[test]
    fn l2_threshold_logic() {
        let p = ModelParams::new(1.0).unwrap();
        let c = certify_l2(&fit_with(-1.0 / 3.0, 1e-3), &p);
        assert!(c.pass && (c.density_exponent + 4.0 / 3.0).abs() < 1e-12);
        // borderline a = (2-α)/(2(2+α)) = 1/6: density exponent exactly -1
        let b = certify_l2(&fit_with(-1.0 / 6.0, 0.0), &p);
        assert!(!b.pass && (b.density_exponent + 1.0).abs() < 1e-12);
        assert!(!certify_l2(&fit_with(0.0, 1e-3), &p).pass);
        // strictness: must beat by two standard errors
        assert!(!certify_l2(&fit_with(-1.0 / 6.0 - 0.019, 0.01), &p).pass);
        assert!(certify_l2(&fit_with(-1.0 / 6.0 - 0.021, 0.01), &p).pass);
        for alpha in [0.3, 1.0, 1.9] {
            let q = ModelParams::new(alpha).unwrap();
            assert!(!certify_l2(&fit_with(0.0, 0.0), &q).pass);
        }
    }

    #[test]
    fn l2_mass_for_exact_power_law() {
        let p = ModelParams::new(1.0).unwrap();
        let xs = grid(1e3, 1e5, 400);
        let r: Vec<f64> = xs.iter().map(|x| x.powf(-1.0 / 3.0)).collect();
        let f = fit_decay(&xs, &r, (1e3, 1e5), false).unwrap();
        let c = certify_l2_with_mass(&f, &xs, &r, 0.0, &p);
        // p R²/2 = c^{-1} ξ^{-4/3} / 2
        let k = 0.5 / p.c;
        let exact = k * 3.0 * (1e3f64.powf(-1.0 / 3.0) - 1e5f64.powf(-1.0 / 3.0));
        assert!((c.window_mass.unwrap() / exact - 1.0).abs() < 1e-4);
        let tail = k * 3.0 * 1e5f64.powf(-1.0 / 3.0);
        assert!((c.tail_mass.unwrap() / tail - 1.0).abs() < 1e-6);
    }

    #[test]
    fn oscillatory_integral_properties() {
        let p = ModelParams::new(1.0).unwrap().with_energies(&[1.0]).unwrap();
        let a = osc_integral_single(2.0, 0.3, 1.0, 100.0, 3e3, &p).unwrap();
        let b = osc_integral_single(2.0, 0.3 + PI, 1.0, 100.0, 3e3, &p).unwrap();
        assert!((a.value + b.value).abs() < 1e-12);
        assert!(osc_integral_single(0.0, 0.3, 1.0, 100.0, 3e3, &p).is_err());
        assert!(osc_integral_pair(2.0, 0.3, 1.0, 1.0, PairSign::Minus, 100.0, 3e3, &p).is_err());
        // refinement oracle: halve the panel
        let t = PhaseTable::new(1.0, &p).unwrap();
        let f = |s: f64| (2.0 * t.phase_unchecked(s) + 0.3).sin() / s;
        let (_, coarse) = partial_integrals(f, 100.0, 3e3, 1.0);
        let (_, fine) = partial_integrals(f, 100.0, 3e3, 0.5);
        assert!((coarse.last().unwrap() - fine.last().unwrap()).abs() < 1e-8);
        assert!((coarse.last().unwrap() - a.value).abs() < 1e-8);
    }

    #[test]
    fn degenerate_pair_is_logarithmic() {
        let p = ModelParams::new(1.0).unwrap().with_energies(&[1.0]).unwrap();
        let g = 0.7f64;
        let (xs, ys) = degenerate_pair_partials(g, 1.0, 100.0, 1e5, &p).unwrap();
        for (x, y) in xs.iter().zip(&ys).skip(1).step_by(5000) {
            let exact = g.sin() * (x / 100.0).ln();
            assert!((y - exact).abs() <= 0.01 * exact.abs());
        }
    }

    #[test]
    fn taylor_residual_slopes() {
        for (alpha, e) in [(1.0, 1.0), (0.8, 0.7), (1.5, -0.4)] {
            let p = ModelParams::new(alpha).unwrap().with_energies(&[e]).unwrap();
            let xs: Vec<f64> = (0..=8).map(|k| 10f64.powf(3.0 + 0.25 * k as f64)).collect();
            let c = taylor_phase_check(e, &p, &xs).unwrap();
            assert!(c.within_tolerance(), "alpha {alpha}: {:?} vs {}", c.fitted_slope, c.expected_slope);
        }
        let p = ModelParams::new(1.0).unwrap();
        let z = taylor_phase_check(0.0, &p, &[10.0, 100.0]).unwrap();
        assert!(z.residual.iter().all(|r| r.abs() < 1e-12));
        assert!(taylor_phase_check(1.0, &ModelParams::new(0.6).unwrap(), &[10.0]).is_err());
        assert!((taylor_phase_check(1.0, &ModelParams::new(0.8).unwrap().with_energies(&[1.0]).unwrap(), &[1e3]).unwrap().expected_slope + 1.0 / 7.0).abs() < 1e-12);
    }

    fn sup(v: f64) -> TailSup {
        TailSup { value: v, points: 1000, step: 0.1, oscillations: 1e4, narrow: false, converged: true }
    }

    fn inputs(mode: Mode, sup_v: f64, exps: &[f64]) -> ReportInputs {
        let p = ModelParams::new(1.0).unwrap();
        let fits: Vec<DecayFit> = exps.iter().map(|&e| fit_with(e, 1e-3)).collect();
        ReportInputs {
            mode: Some(mode),
            alpha: Some(1.0),
            a: Some(if mode == Mode::Thm13 { 1.0 / 3.0 } else { 0.2 }),
            energies: (1..=exps.len()).map(|j| j as f64).collect(),
            sup: Some(sup(sup_v)),
            sup_window_x: Some((1e2, 1e3)),
            l2: fits.iter().map(|f| certify_l2(f, &p)).collect(),
            fits,
        }
    }

    #[test]
    fn report_rows() {
        let r = theorem_report(&inputs(Mode::Thm13, 3.0, &[-0.34, -0.35])).unwrap();
        assert!((r.theorem_bound - 56.515_681_080_742_8).abs() < 1e-9);
        assert!((r.thm11_floor - 1.0).abs() < 1e-12);
        assert!(r.verdict.pass, "{:?}", r.verdict);
        assert_eq!(r.eigenvalue_claim, ">= 2 certified");
        let t = theorem_report(&inputs(Mode::Thm15, 1.0, &[-0.2])).unwrap();
        assert!((t.theorem_bound - 1.2).abs() < 1e-12);
        assert!((t.epsilon.unwrap() - 0.2).abs() < 1e-12);
        // unperturbed potential: nothing certified
        let z = theorem_report(&inputs(Mode::Thm15, 0.0, &[0.0])).unwrap();
        assert!(!z.verdict.pass);
        let mut bad = inputs(Mode::Thm13, 3.0, &[-0.34, -0.35]);
        bad.fits.pop();
        assert!(matches!(theorem_report(&bad), Err(Error::IncompleteInputs(_))));
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"schema\":1") && json.contains("\"verdict\""));
    }

    #[test]
    fn report_is_monotone() {
        let base = inputs(Mode::Thm13, 3.0, &[-0.34, -0.35]);
        assert!(theorem_report(&base).unwrap().verdict.pass);
        let worse = [
            inputs(Mode::Thm13, 100.0, &[-0.34, -0.35]),
            inputs(Mode::Thm13, 3.0, &[-0.1, -0.35]),
            inputs(Mode::Thm13, 0.5, &[-0.34, -0.35]),
            inputs(Mode::Thm13, f64::NAN, &[-0.34, -0.35]),
        ];
        for w in &worse {
            assert!(!theorem_report(w).unwrap().verdict.pass);
        }
    }
}
