//! Acceptance suite: one test per criterion, each printing a single
//! `[PASS]`/`[FAIL]` line. Run with
//! `cargo test --release -p stark-embed-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use stark_embed::analysis::{
    decay_scan, degenerate_pair_partials, fit_decay, osc_integral_pair, osc_integral_single, thm11_floor, PairSign,
};
use stark_embed::boundary::verify_boundary;
use stark_embed::integrator::{
    from_frame, integrate_x, integrate_xi, log_grid, to_frame, wronskian, x_grid_for, x_trace_to_xi,
    Direction,
};
use stark_embed::levinson::{levinson_subordinate, LevinsonOptions};
use stark_embed::liouville::{forward_map, inverse_map, phi_state_to_u, ModelParams};
use stark_embed::phase_search::{lemma_bound, search_phases, single_draw_success_fraction};
use stark_embed::pipeline::{asymptotics, construct, embed, tail_window_x, AsymptoticsReport, EmbedOutput, RunConfig};
use stark_embed::potential::{tail_sup_x, thm13_bound, EnergyLevel, Mode};

const XI_MAX: f64 = 1e5;

fn line(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{tag}] {id} {detail}");
    let _ = out.flush();
}

fn conclude(id: &str, failures: &[String], ok_detail: String) {
    if failures.is_empty() {
        line(id, true, &ok_detail);
    } else {
        line(id, false, &failures.join("; "));
        panic!("{id} failed: {}", failures.join("; "));
    }
}

fn thm13_config() -> RunConfig {
    let mut c = RunConfig::new(Mode::Thm13, 1.0);
    c.n = Some(2);
    c.seed = 7;
    c.xi_max = XI_MAX;
    c
}

fn thm15_config() -> RunConfig {
    let mut c = RunConfig::new(Mode::Thm15, 1.0);
    c.amplitude = Some(0.2);
    c.xi_max = XI_MAX;
    c.levels = [(1.0, 0.3), (2.0, 1.1)]
        .iter()
        .map(|&(e, th)| EnergyLevel { theta_bc: Some(th), ..EnergyLevel::new(e) })
        .collect();
    c
}

fn thm13_embed() -> &'static EmbedOutput {
    static CELL: OnceLock<EmbedOutput> = OnceLock::new();
    CELL.get_or_init(|| embed(&thm13_config()).expect("thm13 embed"))
}

fn thm15_embed() -> &'static EmbedOutput {
    static CELL: OnceLock<EmbedOutput> = OnceLock::new();
    CELL.get_or_init(|| embed(&thm15_config()).expect("thm15 embed"))
}

fn thm13_asymptotics() -> &'static (AsymptoticsReport, Duration) {
    static CELL: OnceLock<(AsymptoticsReport, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let t0 = Instant::now();
        let pot = construct(&thm13_config()).expect("construct").potential;
        let rep = asymptotics(&pot, XI_MAX).expect("asymptotics");
        (rep, t0.elapsed())
    })
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    (value - target).abs() <= rel * target.abs()
}

#[test]
fn c01_phase_search() {
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for n in [2usize, 4, 8, 16, 32] {
        let t0 = Instant::now();
        match search_phases(n, 64, 7) {
            Ok(out) => {
                let s = out.certificate.m1 + out.certificate.m2;
                let dt = t0.elapsed();
                if !(s <= lemma_bound(n)) || dt > Duration::from_secs(60) {
                    failures.push(format!("N={n}: M1+M2={s:.3} bound {:.3} in {dt:?}", lemma_bound(n)));
                }
                details.push(format!("N={n}:{s:.2}/{:.2}", lemma_bound(n)));
            }
            Err(e) => failures.push(format!("N={n}: {e}")),
        }
    }
    let frac = single_draw_success_fraction(16, 200, 11);
    if !(frac >= 0.15) {
        failures.push(format!("success fraction {frac} < 0.15"));
    }
    conclude("C1", &failures, format!("{} success(N=16)={frac:.3}", details.join(" ")));
}

#[test]
fn c02_phase_aligned_bound_and_identity() {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for alpha in [0.8, 1.0, 1.5] {
        for n in [2usize, 4, 8] {
            let mut c = RunConfig::new(Mode::Thm13, alpha);
            c.n = Some(n);
            c.seed = 7;
            let pot = construct(&c).expect("construct").potential;
            let (lo, hi) = tail_window_x(&pot, XI_MAX).unwrap();
            let sup = tail_sup_x(&pot, lo, hi).unwrap().value;
            let bound = thm13_bound(n, alpha);
            let expected = 48.0 * (2.0 - alpha) * (n as f64 * (n as f64).ln()).sqrt();
            if !(sup <= bound) || !within(bound, expected, 1e-14) {
                failures.push(format!("alpha={alpha} N={n}: sup {sup} bound {bound}"));
            }
            let p = *pot.params();
            let k = 0.5 * (2.0 + alpha);
            for i in 0..2000 {
                let x = lo * (hi / lo).powf(i as f64 / 1999.0);
                let xi = forward_map(x, &p).unwrap();
                let lhs = x.powf(1.0 - 0.5 * alpha) * pot.eval_q(x);
                let rhs = k * xi * pot.eval_v(xi);
                let rel = (lhs - rhs).abs() / lhs.abs().max(1e-300);
                if lhs != 0.0 {
                    worst = worst.max(rel);
                }
            }
        }
    }
    if !(worst <= 1e-10) {
        failures.push(format!("identity residual {worst:e}"));
    }
    conclude("C2", &failures, format!("9 configs within bound, identity residual {worst:.1e}"));
}

#[test]
fn c03_cutoff_construction_bound() {
    let out = thm15_embed();
    let pot = &out.construction.potential;
    let (alpha, a, n) = (pot.params().alpha, pot.amplitude(), pot.n() as f64);
    let mut failures = Vec::new();
    let x_lo = inverse_map(pot.active_start(), pot.params()).unwrap();
    let x_hi = inverse_map(XI_MAX, pot.params()).unwrap();
    let (mut sup_v, mut sup_q) = (0.0f64, 0.0f64);
    for [x, q, xi, v] in pot.samples(x_lo, x_hi, 200_001) {
        sup_v = sup_v.max(xi * v.abs());
        sup_q = sup_q.max(x.powf(1.0 - 0.5 * alpha) * q.abs());
    }
    if !(sup_v <= 4.0 * a * n) {
        failures.push(format!("sup xi|V| = {sup_v} > 4aN = {}", 4.0 * a * n));
    }
    if !(sup_q <= 2.0 * (2.0 + alpha) * a * n) {
        failures.push(format!("sup x^(1-a/2)|q| = {sup_q} > {}", 2.0 * (2.0 + alpha) * a * n));
    }
    let eps = 2.0 * (2.0 + alpha) * a - (2.0 - alpha);
    let rep = &out.report;
    if rep.epsilon.map_or(true, |e| !within(e, eps, 1e-12)) || !within(rep.theorem_bound, (2.0 - alpha + eps) * n, 1e-12) {
        failures.push(format!("report bound {} eps {:?}", rep.theorem_bound, rep.epsilon));
    }
    conclude(
        "C3",
        &failures,
        format!("sup xi|V|={sup_v:.6} <= {:.3}, report bound (2-alpha+eps)N={:.3}", 4.0 * a * n, rep.theorem_bound),
    );
}

#[test]
fn c04_resonant_asymptotics() {
    let (rep, elapsed) = thm13_asymptotics();
    let a = rep.a;
    let mut failures = Vec::new();
    let mut details = Vec::new();
    let pot = construct(&thm13_config()).unwrap().potential;
    for lv in &rep.levels {
        let b = lv.backward_fit;
        if b.window != (1e3, 10f64.powf(4.5)) || !within(b.exponent, -a, 0.15) {
            failures.push(format!("level {} backward {:.4} on {:?}", lv.level, b.exponent, b.window));
        }
        let sol = levinson_subordinate(&pot, lv.level, &LevinsonOptions::new(500.0, XI_MAX)).unwrap();
        let lf = fit_decay(&sol.grid, &sol.r, (1e3, 10f64.powf(4.5)), true).unwrap();
        if !within(lf.exponent, -a, 0.15) {
            failures.push(format!("level {} levinson {:.4}", lv.level, lf.exponent));
        }
        if !within(lv.forward_fit.exponent, a, 0.15) {
            failures.push(format!("level {} forward {:.4}", lv.level, lv.forward_fit.exponent));
        }
        details.push(format!(
            "E={}: bwd {:.4} lev {:.4} fwd {:.4}",
            lv.energy, b.exponent, lf.exponent, lv.forward_fit.exponent
        ));
    }
    for nr in &rep.non_resonant {
        if nr.window != (1e3, XI_MAX) || !(nr.max_over_min <= 3.0) {
            failures.push(format!("E={} ratio {:.3} on {:?}", nr.energy, nr.max_over_min, nr.window));
        }
        details.push(format!("E={}: ratio {:.3}", nr.energy, nr.max_over_min));
    }
    if *elapsed > Duration::from_secs(300) {
        failures.push(format!("runtime {elapsed:?}"));
    }
    conclude("C4", &failures, format!("a={a:.4}; {} ({elapsed:.1?})", details.join("; ")));
}

#[test]
fn c05_l2_certification() {
    let out = thm13_embed();
    let rep = &out.report;
    let a = rep.a;
    let w = ModelParams::new(rep.alpha).unwrap().weight_exponent();
    let mut failures = Vec::new();
    for (j, c) in rep.l2.iter().enumerate() {
        if !c.pass {
            failures.push(format!("level {j} not certified (exponent {:.4})", c.exponent));
        }
        // a ±15% spread in the envelope exponent is 2·0.15·a in the density
        if !((c.density_exponent - (-2.0 * a - w)).abs() <= 0.3 * a) {
            failures.push(format!("level {j} density exponent {:.4}", c.density_exponent));
        }
    }
    if rep.certified_count < rep.n {
        failures.push(format!("certified {} < N = {}", rep.certified_count, rep.n));
    }
    let dens: Vec<String> = rep.l2.iter().map(|c| format!("{:.4}", c.density_exponent)).collect();
    conclude("C5", &failures, format!("{} of {} certified, density exponents [{}] (ref -4/3)", rep.certified_count, rep.n, dens.join(", ")));
}

#[test]
fn c06_oscillatory_integrals() {
    let xs = [1e2, 1e3, 1e4];
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for alpha in [1.0, 0.8] {
        let p = ModelParams::new(alpha).unwrap().with_energies(&[1.0, 2.0]).unwrap();
        let single = decay_scan(&xs, |x0| osc_integral_single(2.0, 0.0, 1.0, x0, XI_MAX, &p)).unwrap();
        let plus = decay_scan(&xs, |x0| osc_integral_pair(2.0, 0.0, 1.0, 2.0, PairSign::Plus, x0, XI_MAX, &p)).unwrap();
        let minus = decay_scan(&xs, |x0| osc_integral_pair(2.0, 0.0, 1.0, 2.0, PairSign::Minus, x0, XI_MAX, &p)).unwrap();
        for (name, s) in [("Gosc1", &single), ("Gosc2+", &plus), ("Gosc2-", &minus)] {
            let decreasing = s.sup_partial.windows(2).all(|w| w[1] < w[0]);
            if !decreasing || !(s.slope <= -0.05) {
                failures.push(format!("alpha={alpha} {name} slope {:.3} sups {:?}", s.slope, s.sup_partial));
            }
            details.push(format!("a{alpha}/{name} {:.3}", s.slope));
        }
        if alpha == 1.0 && !(minus.slope <= -0.8 / 3.0) {
            failures.push(format!("alpha=1 Gosc2- slope {:.3} > -0.2667", minus.slope));
        }
    }
    let p = ModelParams::new(1.0).unwrap().with_energies(&[1.0]).unwrap();
    let mut worst = 0.0f64;
    for g in [0.4f64, 0.7, 1.3] {
        let (nodes, ys) = degenerate_pair_partials(g, 1.0, 100.0, XI_MAX, &p).unwrap();
        for (x, y) in nodes.iter().zip(&ys).skip(1) {
            let exact = g.sin() * (x / 100.0).ln();
            if exact.abs() > 1e-3 {
                worst = worst.max((y - exact).abs() / exact.abs());
            }
        }
    }
    if !(worst <= 0.01) {
        failures.push(format!("degenerate relative error {worst:e}"));
    }
    conclude("C6", &failures, format!("{}; degenerate rel err {worst:.1e}", details.join(" ")));
}

#[test]
fn c07_levinson_engine() {
    let (rep, _) = thm13_asymptotics();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for lv in &rep.levels {
        match &lv.levinson {
            Some(s) => {
                let max_gap = s.gap_ratios.iter().cloned().fold(0.0, f64::max);
                if !(s.q_norm_max <= 0.5) || !(max_gap <= 0.6) || !(s.discrepancy <= 0.05) {
                    failures.push(format!(
                        "level {}: |Q| {:.3} gap {:.3} disc {:.2e}",
                        lv.level, s.q_norm_max, max_gap, s.discrepancy
                    ));
                }
                details.push(format!("E={}: |Q|={:.3} gap={max_gap:.3} disc={:.1e}", lv.energy, s.q_norm_max, s.discrepancy));
            }
            None => failures.push(format!("level {}: {:?}", lv.level, lv.levinson_error)),
        }
    }
    conclude("C7", &failures, details.join("; "));
}

#[test]
fn c08_liouville_layer() {
    let mut failures = Vec::new();
    let pot = construct(&thm13_config()).unwrap().potential;
    let p = *pot.params();

    let mut rt = 0.0f64;
    for alpha in [0.8, 1.0, 1.5] {
        let q = ModelParams::new(alpha).unwrap();
        for i in 0..400 {
            let x = 10f64.powf(-3.0 + 9.0 * i as f64 / 399.0);
            let back = inverse_map(forward_map(x, &q).unwrap(), &q).unwrap();
            rt = rt.max((back - x).abs() / (1.0 + x));
        }
    }
    if !(rt <= 1e-12) {
        failures.push(format!("round trip {rt:e}"));
    }

    let e = pot.level(1).energy;
    let xi_grid = log_grid(pot.active_start() * 1.5, 2e3, 32);
    let x_grid = x_grid_for(&xi_grid, &p).unwrap();
    let (_, u0, du0) = phi_state_to_u(xi_grid[0], 1.0, -0.4, &p).unwrap();
    let tx = integrate_x(&pot, e, &x_grid, [u0, du0], Direction::Forward).unwrap();
    let tz = integrate_xi(&pot, e, &xi_grid, [1.0, -0.4], Direction::Forward, 0.0).unwrap();
    let mut xz = 0.0f64;
    for (i, m) in x_trace_to_xi(&tx, &p).unwrap().iter().enumerate() {
        let scale = tz.phi[i].hypot(tz.dphi[i]);
        xz = xz.max((m[1] - tz.phi[i]).abs().max((m[2] - tz.dphi[i]).abs()) / scale);
    }
    if !(xz <= 1e-6) {
        failures.push(format!("x vs xi {xz:e}"));
    }

    let table = pot.table(0);
    let mut iso = 0.0f64;
    for i in 0..200 {
        let xi = pot.active_start() + 17.3 * i as f64;
        let (phi, dphi) = ((0.3 * i as f64).sin(), (0.7 * i as f64).cos());
        for t in [0.2, 0.2 + 2.0 * PI] {
            let y = to_frame(table, t, xi, phi, dphi);
            let rhs = table.derivative(xi).powi(2) * phi * phi + dphi * dphi;
            iso = iso.max(((y[0] * y[0] + y[1] * y[1]) - rhs).abs() / rhs);
            let back = from_frame(table, t, xi, y);
            iso = iso.max((back[0] - phi).abs().max((back[1] - dphi).abs()));
        }
    }
    if !(iso <= 1e-12) {
        failures.push(format!("isometry {iso:e}"));
    }

    let grid = log_grid(1e2, 1e5, 16);
    let a = integrate_xi(&pot, pot.level(0).energy, &grid, [1.0, 0.0], Direction::Forward, 0.0).unwrap();
    let b = integrate_xi(&pot, pot.level(0).energy, &grid, [0.0, 1.0], Direction::Forward, 0.0).unwrap();
    let w = wronskian(&a, &b).unwrap();
    let drift = w.iter().map(|v| (v - w[0]).abs()).fold(0.0, f64::max) / w[0].abs();
    if !(drift <= 1e-7) {
        failures.push(format!("wronskian drift {drift:e}"));
    }
    conclude(
        "C8",
        &failures,
        format!("round trip {rt:.1e}, x vs xi {xz:.1e}, isometry {iso:.1e}, wronskian drift {drift:.1e}"),
    );
}

#[test]
fn c09_sup_floor_consistency() {
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (name, out) in [("thm13", thm13_embed()), ("thm15", thm15_embed())] {
        let rep = &out.report;
        if !rep.verdict.pass {
            failures.push(format!("{name} run did not pass: {:?}", rep.verdict.reasons));
            continue;
        }
        let floor = thm11_floor(rep.alpha, rep.certified_count);
        let expected = (2.0 - rep.alpha) / 2f64.sqrt() * (rep.certified_count as f64).sqrt();
        if !within(floor, expected, 1e-14) || !(rep.measured_sup_x >= 0.9 * floor) || !rep.thm11_consistent {
            failures.push(format!("{name}: sup {} floor {floor}", rep.measured_sup_x));
        }
        details.push(format!("{name}: sup {:.4} >= 0.9*{floor:.4}", rep.measured_sup_x));
    }
    conclude("C9", &failures, details.join("; "));
}

#[test]
fn c10_boundary_matching() {
    let out = thm15_embed();
    let pot = &out.construction.potential;
    let mut failures = Vec::new();
    let errs = verify_boundary(pot, XI_MAX).unwrap();
    for &(j, err) in &errs {
        if !(err <= 1e-4) {
            failures.push(format!("level {j} angle error {err:e}"));
        }
    }
    if errs.len() != 2 {
        failures.push(format!("{} levels verified", errs.len()));
    }
    let shown: Vec<String> = errs.iter().map(|(j, e)| format!("level {j}: {e:.1e}")).collect();
    conclude("C10", &failures, format!("angle errors {}", shown.join(", ")));
}
