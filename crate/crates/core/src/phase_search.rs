//! Randomized selection of phase vectors `θ ∈ [0,1)^N` that keep the
//! trigonometric sums
//!
//! `f₁(ξ) = Σ_j sin(2 j ξ / N + 2π θ_j)`, `f₂(ξ) = Σ_j cos(2 j ξ / N + 2π θ_j)`
//!
//! below `4 √(2N ln(8(N+1)N))` in `sup|f₁| + sup|f₂|`. A uniform draw lands
//! in the good set with probability at least 1/4, so rejection sampling with
//! a certified supremum terminates after a handful of draws.
//!
//! Both sums are `πN`-periodic and `(N+1)`-Lipschitz, so the maximum over a
//! grid of step `h` on one period plus `(N+1) h / 2` bounds the supremum on
//! all of `ℝ⁺`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    pub theta: Vec<f64>,
    pub seed: u64,
    /// Index of the random stream the vector was drawn from.
    pub sample_index: u64,
}

impl PhaseVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidConfig("phase vector must be non-empty".into()));
        }
        if let Some(t) = theta.iter().find(|t| !(**t >= 0.0 && **t < 1.0)) {
            return Err(Error::InvalidConfig(format!("phase {t} outside [0, 1)")));
        }
        Ok(PhaseVector { theta, seed: 0, sample_index: 0 })
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupCertificate {
    /// Certified upper bound on `sup |f₁|`.
    pub m1: f64,
    /// Certified upper bound on `sup |f₂|`.
    pub m2: f64,
    pub grid_max1: f64,
    pub grid_max2: f64,
    pub h: f64,
    pub bound_used: f64,
}

impl SupCertificate {
    pub fn total(&self) -> f64 {
        self.m1 + self.m2
    }

    pub fn satisfies_bound(&self) -> bool {
        self.total() <= self.bound_used
    }
}

/// `4 √(2N ln(8(N+1)N))`.
pub fn lemma_bound(n: usize) -> f64 {
    let nf = n as f64;
    4.0 * (2.0 * nf * (8.0 * (nf + 1.0) * nf).ln()).sqrt()
}

/// Grid step keeping the Lipschitz slack at 0.1% of the bound.
pub fn default_step(n: usize) -> f64 {
    (0.001 * lemma_bound(n) * 2.0 / (n as f64 + 1.0)).min(PI / 8.0)
}

/// `(f₁(ξ), f₂(ξ))` with frequencies `2j/N`.
pub fn trig_sums(xi: f64, theta: &[f64]) -> (f64, f64) {
    let n = theta.len() as f64;
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for (j, t) in theta.iter().enumerate() {
        let arg = 2.0 * (j as f64 + 1.0) / n * xi + 2.0 * PI * t;
        let (s, c) = arg.sin_cos();
        f1 += s;
        f2 += c;
    }
    (f1, f2)
}

pub fn certified_sup(theta: &[f64], h: f64) -> Result<SupCertificate> {
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(format!("grid step must be positive, got {h}")));
    }
    if theta.is_empty() {
        return Err(Error::InvalidConfig("phase vector must be non-empty".into()));
    }
    let n = theta.len();
    let period = PI * n as f64;
    let steps = (period / h).ceil() as usize;
    let step = period / steps as f64;
    let (g1, g2) = (0..steps + 1)
        .into_par_iter()
        .with_min_len(1024)
        .map(|k| {
            let (a, b) = trig_sums(step * k as f64, theta);
            (a.abs(), b.abs())
        })
        .reduce(|| (0.0f64, 0.0f64), |x, y| (x.0.max(y.0), x.1.max(y.1)));
    let slack = (n as f64 + 1.0) * step / 2.0;
    Ok(SupCertificate {
        m1: g1 + slack,
        m2: g2 + slack,
        grid_max1: g1,
        grid_max2: g2,
        h: step,
        bound_used: lemma_bound(n),
    })
}

/// Independent uniform draw number `index` for a given seed.
pub fn draw_phases(n: usize, seed: u64, index: u64) -> PhaseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let theta = (0..n).map(|_| rng.gen::<f64>()).collect();
    PhaseVector { theta, seed, sample_index: index }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub phases: PhaseVector,
    pub certificate: SupCertificate,
    pub samples_used: usize,
}

/// Rejection sampling; returns the lowest-index draw whose certified
/// `M₁ + M₂` meets the bound.
pub fn search_phases(n: usize, max_samples: usize, seed: u64) -> Result<SearchOutcome> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    if max_samples == 0 {
        return Err(Error::InvalidConfig("max_samples must be at least 1".into()));
    }
    let h = default_step(n);
    let batch = rayon::current_num_threads().max(1);
    let mut start = 0usize;
    while start < max_samples {
        let end = (start + batch).min(max_samples);
        let hit = (start..end)
            .into_par_iter()
            .map(|i| {
                let phases = draw_phases(n, seed, i as u64);
                let cert = certified_sup(&phases.theta, h).expect("validated inputs");
                (i, phases, cert)
            })
            .filter(|(_, _, cert)| cert.satisfies_bound())
            .min_by_key(|(i, _, _)| *i);
        if let Some((i, phases, certificate)) = hit {
            return Ok(SearchOutcome { phases, certificate, samples_used: i + 1 });
        }
        start = end;
    }
    Err(Error::BudgetExhausted { samples: max_samples })
}

/// Fraction of `trials` independent uniform draws that pass on their own.
pub fn single_draw_success_fraction(n: usize, trials: usize, seed: u64) -> f64 {
    let h = default_step(n);
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&i| {
            let p = draw_phases(n, seed, i as u64);
            certified_sup(&p.theta, h).map(|c| c.satisfies_bound()).unwrap_or(false)
        })
        .count();
    hits as f64 / trials as f64
}

/// `λ = √(8 ln(8N(N+1)) / N)`.
pub fn default_lambda(n: usize) -> f64 {
    let nf = n as f64;
    (8.0 * (8.0 * nf * (nf + 1.0)).ln() / nf).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// `e^{Nλ²/4}`.
    pub bound: f64,
}

impl MomentEstimate {
    /// Estimate within the bound up to three standard errors.
    pub fn within_bound(&self) -> bool {
        self.mean <= self.bound + 3.0 * self.stderr
    }
}

/// Monte Carlo estimate of `E_θ exp(λ f₁(ξ, θ))`.
pub fn moment_check(n: usize, lambda: f64, xi: f64, samples: usize, seed: u64) -> Result<MomentEstimate> {
    if !(lambda > 0.0) || n == 0 || samples < 2 {
        return Err(Error::InvalidConfig("moment_check needs lambda > 0, N >= 1, samples >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; n];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        theta.iter_mut().for_each(|t| *t = rng.gen::<f64>());
        let v = (lambda * trig_sums(xi, &theta).0).exp();
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
    Ok(MomentEstimate {
        mean,
        stderr: (var / m).sqrt(),
        bound: (n as f64 * lambda * lambda / 4.0).exp(),
    })
}
