//! Adaptive sixth-order Magnus integrator for traceless linear 2×2 systems
//! `y' = A(t) y`. Every step applies an exact matrix exponential of a
//! traceless generator, so the flow has determinant one and Wronskians are
//! conserved to rounding. An embedded fourth-order Magnus update supplies
//! the error estimate.

use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];
pub type Vec2 = [f64; 2];

#[inline]
fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

#[inline]
fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

#[inline]
fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

#[inline]
fn comm(a: &Mat2, b: &Mat2) -> Mat2 {
    let ab = mul(a, b);
    let ba = mul(b, a);
    [[ab[0][0] - ba[0][0], ab[0][1] - ba[0][1]], [ab[1][0] - ba[1][0], ab[1][1] - ba[1][1]]]
}

#[inline]
pub fn apply(m: &Mat2, y: &Vec2) -> Vec2 {
    [m[0][0] * y[0] + m[0][1] * y[1], m[1][0] * y[0] + m[1][1] * y[1]]
}

/// `exp(M)` for traceless `M` (the trace is projected out first).
pub fn expm_traceless(m: &Mat2) -> Mat2 {
    let p = 0.5 * (m[0][0] - m[1][1]);
    let (q, r) = (m[0][1], m[1][0]);
    let delta = p * p + q * r;
    // exp(M) = C(δ) I + S(δ) M with M² = δ I
    let (c, s) = if delta.abs() < 1e-4 {
        let mut c = 1.0;
        let mut s = 1.0;
        let mut term_c = 1.0;
        let mut term_s = 1.0;
        for k in 1..8 {
            let kf = k as f64;
            term_c *= delta / ((2.0 * kf - 1.0) * (2.0 * kf));
            term_s *= delta / ((2.0 * kf) * (2.0 * kf + 1.0));
            c += term_c;
            s += term_s;
        }
        (c, s)
    } else if delta > 0.0 {
        let w = delta.sqrt();
        (w.cosh(), w.sinh() / w)
    } else {
        let w = (-delta).sqrt();
        (w.cos(), w.sin() / w)
    };
    [[c + s * p, s * q], [s * r, c - s * p]]
}

const SQRT15: f64 = 3.872_983_346_207_417;

/// One Magnus step from `t` with signed step `h`: returns the sixth-order
/// update and the norm of its difference to the fourth-order update.
pub fn magnus_step<F: Fn(f64) -> Mat2>(gen: &F, t: f64, h: f64, y: &Vec2) -> (Vec2, f64) {
    let a1 = gen(t + (0.5 - SQRT15 / 10.0) * h);
    let a2 = gen(t + 0.5 * h);
    let a3 = gen(t + (0.5 + SQRT15 / 10.0) * h);
    let al1 = scale(&a2, h);
    let al2 = scale(&add(&a3, &scale(&a1, -1.0)), SQRT15 * h / 3.0);
    let al3 = scale(&add(&add(&a3, &scale(&a2, -2.0)), &a1), 10.0 * h / 3.0);
    let c1 = comm(&al1, &al2);
    let c2 = scale(&comm(&al1, &add(&scale(&al3, 2.0), &c1)), -1.0 / 60.0);
    let base = add(&al1, &scale(&al3, 1.0 / 12.0));
    let inner_l = add(&add(&scale(&al1, -20.0), &scale(&al3, -1.0)), &c1);
    let inner_r = add(&al2, &c2);
    let omega6 = add(&base, &scale(&comm(&inner_l, &inner_r), 1.0 / 240.0));
    let omega4 = add(&base, &scale(&c1, -1.0 / 12.0));
    let y6 = apply(&expm_traceless(&omega6), y);
    let y4 = apply(&expm_traceless(&omega4), y);
    (y6, ((y6[0] - y4[0]).powi(2) + (y6[1] - y4[1]).powi(2)).sqrt())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

const MAX_STEPS: usize = 50_000_000;

/// Adaptive propagation from `t0` through the monotone sequence `stops`
/// (all on the same side of `t0`), recording the state at every stop.
/// `h_max(t)` caps the step magnitude; `tol` is relative to `|y|`.
pub fn propagate<F, H>(
    gen: &F,
    h_max: &H,
    t0: f64,
    y0: Vec2,
    stops: &[f64],
    tol: f64,
    stats: &mut StepStats,
) -> Result<Vec<Vec2>>
where
    F: Fn(f64) -> Mat2,
    H: Fn(f64) -> f64,
{
    let mut out = Vec::with_capacity(stops.len());
    let mut t = t0;
    let mut y = y0;
    let mut h_prev = h_max(t0);
    for &target in stops {
        let dir = if target >= t { 1.0 } else { -1.0 };
        while (target - t) * dir > 0.0 {
            let cap = h_max(t);
            let mut h = h_prev.min(cap);
            let remaining = (target - t).abs();
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            } else if h > 0.5 * remaining {
                // split the remainder evenly rather than leave a sliver
                h = 0.5 * remaining;
            }
            let (y_new, err) = magnus_step(gen, t, dir * h, &y);
            let norm = (y_new[0] * y_new[0] + y_new[1] * y_new[1]).sqrt();
            if !norm.is_finite() {
                return Err(Error::StepFailure { at: t, reason: "non-finite state".into() });
            }
            let ratio = err / (tol * norm.max(f64::MIN_POSITIVE));
            if ratio <= 1.0 {
                t = if last { target } else { t + dir * h };
                y = y_new;
                stats.accepted += 1;
                let grow = if ratio > 0.0 { (0.9 * ratio.powf(-0.2)).min(4.0) } else { 4.0 };
                h_prev = (h * grow).max(h_prev.min(h));
            } else {
                stats.rejected += 1;
                h_prev = h * (0.9 * ratio.powf(-0.2)).max(0.1);
            }
            if h_prev < 1e-12 * t.abs().max(1.0) {
                return Err(Error::StepFailure { at: t, reason: format!("step size underflow ({h_prev:e})") });
            }
            if stats.accepted + stats.rejected > MAX_STEPS {
                return Err(Error::StepFailure { at: t, reason: "step budget exhausted".into() });
            }
        }
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_matches_series() {
        for m in [[[0.3, 1.2], [-0.7, -0.3]], [[1e-4, 2e-3], [3e-3, -1e-4]], [[0.0, 2.0], [0.5, 0.0]], [[0.0, 0.0], [0.0, 0.0]]] {
            let e = expm_traceless(&m);
            // Taylor series oracle
            let mut term = [[1.0, 0.0], [0.0, 1.0]];
            let mut sum = term;
            for k in 1..40 {
                term = scale(&mul(&term, &m), 1.0 / k as f64);
                sum = add(&sum, &term);
            }
            for i in 0..2 {
                for j in 0..2 {
                    assert!((e[i][j] - sum[i][j]).abs() < 1e-14, "{m:?}");
                }
            }
            let det = e[0][0] * e[1][1] - e[0][1] * e[1][0];
            assert!((det - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_oscillator_exact() {
        let gen = |_t: f64| [[0.0, 1.0], [-1.0, 0.0]];
        let mut st = StepStats::default();
        let out = propagate(&gen, &|_| 0.1, 0.0, [1.0, 0.0], &[10.0, 0.0], 1e-12, &mut st).unwrap();
        assert!((out[0][0] - 10f64.cos()).abs() < 1e-13 && (out[0][1] + 10f64.sin()).abs() < 1e-13);
        assert!((out[1][0] - 1.0).abs() < 1e-13 && out[1][1].abs() < 1e-13);
    }

    /// Airy-type problem `y'' = -t y` against a fine classical RK4 oracle.
    #[test]
    fn sixth_order_convergence() {
        let gen = |t: f64| [[0.0, 1.0], [-(1.0 + t), 0.0]];
        let rk4 = |n: usize| {
            let h = 4.0 / n as f64;
            let f = |t: f64, y: [f64; 2]| [y[1], -(1.0 + t) * y[0]];
            let mut y = [1.0, 0.5];
            let mut t = 0.0;
            for _ in 0..n {
                let k1 = f(t, y);
                let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
                let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
                let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
                y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
                y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
                t += h;
            }
            y
        };
        let exact = rk4(200_000);
        let fixed = |n: usize| {
            let h = 4.0 / n as f64;
            let mut y = [1.0, 0.5];
            for k in 0..n {
                y = magnus_step(&gen, k as f64 * h, h, &y).0;
            }
            ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt()
        };
        let (e1, e2) = (fixed(10), fixed(20));
        let order = (e1 / e2).log2();
        assert!(order > 5.5, "observed order {order}");
    }

    #[test]
    fn backward_inverts_forward() {
        let gen = |t: f64| [[0.0, 1.0], [(t * 0.3).sin() - 2.0, 0.0]];
        let mut st = StepStats::default();
        let fwd = propagate(&gen, &|_| 0.2, 1.0, [0.3, -1.1], &[30.0], 1e-12, &mut st).unwrap();
        let back = propagate(&gen, &|_| 0.2, 30.0, fwd[0], &[1.0], 1e-12, &mut st).unwrap();
        assert!((back[0][0] - 0.3).abs() < 1e-9 && (back[0][1] + 1.1).abs() < 1e-9);
    }
}
