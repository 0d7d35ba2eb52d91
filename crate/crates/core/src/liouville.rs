//! Change of variables between the Stark-type equation in `x` and the
//! unit-energy equation in `ξ`.
//!
//! With `c = (1 + α/2)^{2/(2+α)}` the maps are `ξ = x^{1+α/2}/(1+α/2)` and
//! `x = c ξ^{2/(2+α)}`, the weight is `p(ξ) = 1/x(ξ)^α` and the energy
//! enters through `β_E(ξ) = -E p(ξ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ambient operator `-u'' - x^α u + q u = E u` plus numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr")]
pub struct ModelParams {
    pub alpha: f64,
    pub c: f64,
    pub tau: f64,
    pub xi_start: f64,
    pub tol_ode: f64,
    pub tol_quad: f64,
}

#[derive(Deserialize)]
struct ParamsRepr {
    alpha: f64,
    xi_start: f64,
    tol_ode: f64,
    tol_quad: f64,
}

impl TryFrom<ParamsRepr> for ModelParams {
    type Error = Error;

    fn try_from(r: ParamsRepr) -> Result<Self> {
        ModelParams::new(r.alpha)?
            .with_xi_start(r.xi_start)?
            .with_tolerances(r.tol_ode, r.tol_quad)
    }
}

pub const DEFAULT_TOL: f64 = 1e-10;

impl ModelParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 2), got {alpha}")));
        }
        let half = 1.0 + 0.5 * alpha;
        let c = half.powf(2.0 / (2.0 + alpha));
        let tau = (2.0 + alpha) / (2.0 * (2.0 - alpha)) / half.powf(2.0 * alpha / (2.0 + alpha));
        Ok(ModelParams {
            alpha,
            c,
            tau,
            xi_start: 1.0,
            tol_ode: DEFAULT_TOL,
            tol_quad: DEFAULT_TOL,
        })
    }

    pub fn with_xi_start(mut self, xi_start: f64) -> Result<Self> {
        if !(xi_start > 0.0 && xi_start.is_finite()) {
            return Err(Error::InvalidConfig(format!("xi_start must be positive, got {xi_start}")));
        }
        self.xi_start = xi_start;
        Ok(self)
    }

    /// Moves `xi_start` out far enough that `|β_E| ≤ 1/2` for every energy.
    pub fn with_energies(self, energies: &[f64]) -> Result<Self> {
        let emax = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let xi = self.xi_for_beta_bound(emax, 0.5).max(1.0);
        self.with_xi_start(xi)
    }

    pub fn with_tolerances(mut self, tol_ode: f64, tol_quad: f64) -> Result<Self> {
        for (name, t) in [("tol_ode", tol_ode), ("tol_quad", tol_quad)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {t}")));
            }
        }
        self.tol_ode = tol_ode;
        self.tol_quad = tol_quad;
        Ok(self)
    }

    /// Exponent of `ξ` in the weight: `2α/(2+α)`.
    pub fn weight_exponent(&self) -> f64 {
        2.0 * self.alpha / (2.0 + self.alpha)
    }

    /// Exponent of the secondary phase term: `(2-α)/(2+α)`.
    pub fn kappa(&self) -> f64 {
        (2.0 - self.alpha) / (2.0 + self.alpha)
    }

    /// Coefficient of `ξ^{-2}` in the transformed potential.
    pub fn curvature_coefficient(&self) -> f64 {
        let a = self.alpha;
        (-1.25 * a * a + a * (a - 1.0)) / ((2.0 + a) * (2.0 + a))
    }

    /// Smallest `ξ` with `|E| p(ξ) ≤ bound`.
    pub fn xi_for_beta_bound(&self, energy_abs: f64, bound: f64) -> f64 {
        if energy_abs == 0.0 {
            return 0.0;
        }
        (energy_abs / (bound * self.c.powf(self.alpha))).powf(1.0 / self.weight_exponent())
    }

    /// Regime required by the equally-spaced construction.
    pub fn require_embed_regime(&self) -> Result<()> {
        if self.alpha <= 2.0 / 3.0 {
            return Err(Error::InvalidConfig(format!(
                "the equally-spaced construction needs alpha in (2/3, 2), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `ξ(x) = ∫_0^x t^{α/2} dt`.
pub fn forward_map(x: f64, params: &ModelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("forward_map needs x >= 0, got {x}")));
    }
    let half = 1.0 + 0.5 * params.alpha;
    Ok(x.powf(half) / half)
}

/// `x(ξ) = c ξ^{2/(2+α)}`.
pub fn inverse_map(xi: f64, params: &ModelParams) -> Result<f64> {
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("inverse_map needs xi >= 0, got {xi}")));
    }
    Ok(params.c * xi.powf(2.0 / (2.0 + params.alpha)))
}

/// `p(ξ) = c^{-α} ξ^{-2α/(2+α)}`.
pub fn weight(xi: f64, params: &ModelParams) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("weight needs xi > 0, got {xi}")));
    }
    Ok(weight_unchecked(xi, params))
}

#[inline]
pub(crate) fn weight_unchecked(xi: f64, params: &ModelParams) -> f64 {
    1.0 / (params.c.powf(params.alpha) * xi.powf(params.weight_exponent()))
}

/// `β_E(ξ) = -E p(ξ)`.
pub fn beta(energy: f64, xi: f64, params: &ModelParams) -> Result<f64> {
    Ok(-energy * weight(xi, params)?)
}

/// Transformed potential `Q(ξ, E)` with both `ξ^{-2}` terms kept.
pub fn q_potential<F: Fn(f64) -> f64>(
    xi: f64,
    energy: f64,
    v: F,
    params: &ModelParams,
) -> Result<f64> {
    let b = beta(energy, xi, params)?;
    Ok(params.curvature_coefficient() / (xi * xi) + b + v(xi))
}

/// `φ = x^{α/4} u` at `ξ = ξ(x)`.
pub fn u_to_phi(x: f64, u: f64, params: &ModelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("u_to_phi needs x > 0, got {x}")));
    }
    Ok(x.powf(0.25 * params.alpha) * u)
}

/// `u = c^{-α/4} ξ^{-α/(2(2+α))} φ`.
pub fn phi_to_u(xi: f64, phi: f64, params: &ModelParams) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::Domain(format!("phi_to_u needs xi > 0, got {xi}")));
    }
    let a = params.alpha;
    Ok(phi / (params.c.powf(0.25 * a) * xi.powf(a / (2.0 * (2.0 + a)))))
}

/// Maps `(u, u')` at `x` to `(ξ, φ, dφ/dξ)`.
pub fn u_state_to_phi(x: f64, u: f64, du: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    let xi = forward_map(x, params)?;
    let phi = u_to_phi(x, u, params)?;
    let q = 0.25 * params.alpha;
    let dphi = x.powf(-q) * (du + q / x * u);
    Ok((xi, phi, dphi))
}

/// Maps `(φ, dφ/dξ)` at `ξ` to `(x, u, u')`.
pub fn phi_state_to_u(xi: f64, phi: f64, dphi: f64, params: &ModelParams) -> Result<(f64, f64, f64)> {
    let x = inverse_map(xi, params)?;
    let u = phi_to_u(xi, phi, params)?;
    let q = 0.25 * params.alpha;
    let du = x.powf(q) * dphi - q / x * u;
    Ok((x, u, du))
}
