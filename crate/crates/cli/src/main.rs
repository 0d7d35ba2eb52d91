//! `stark-embed`: phase search, potential construction, end-to-end
//! certification of embedded eigenvalues, oscillatory-integral scans and
//! asymptotics comparisons.
//!
//! Exit codes: 0 pass, 1 invalid input, 2 phase-search budget exhausted,
//! 3 certification failed (including numerical failures).

mod levels;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use stark_embed::analysis::{decay_scan, osc_integral_pair, osc_integral_single, DecayScan, PairSign};
use stark_embed::export::{write_oscint_csv, write_potential_csv, write_trace_csv};
use stark_embed::liouville::{inverse_map, ModelParams};
use stark_embed::phase_search::{lemma_bound, search_phases};
use stark_embed::pipeline::{asymptotics, check_xi_max, certify_potential, construct, tail_window_x, RunConfig};
use stark_embed::potential::{tail_sup_x, thm13_bound, thm15_bound, Mode, Potential, PotentialSpec};
use stark_embed::Error;

#[derive(Parser)]
#[command(name = "stark-embed", version, about = "Embedded eigenvalues for perturbed Stark-type operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search certified phase vectors for the trigonometric-sum bound.
    Phases(PhasesArgs),
    /// Build a potential; write samples (x,q,xi,V) and the spec.
    Construct(RunArgs),
    /// Full pipeline: construct, integrate, fit, certify.
    Embed(RunArgs),
    /// Decay of oscillatory integrals across starting points.
    Oscint(OscArgs),
    /// Picard vs backward subordinate solutions, generic growth, boundedness.
    Asymptotics(RunArgs),
}

#[derive(Args)]
struct PhasesArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    max_samples: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Thm13,
    Thm15,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value = "thm13")]
    mode: ModeArg,
    /// Amplitude a (default (2-alpha)/(2+alpha) in thm13 mode).
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e5)]
    xi_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_ode: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_quad: f64,
    #[arg(long, default_value_t = 64)]
    max_samples: usize,
    /// Thm15 levels, e.g. "E=1:theta=0.3,E=2:theta=1.1" (keys E, theta, t, cut).
    #[arg(long)]
    levels: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Load the potential from a spec JSON instead of constructing it.
    #[arg(long)]
    spec_in: Option<PathBuf>,
    /// Where to write the spec JSON (default <out-dir>/spec.json).
    #[arg(long)]
    spec_out: Option<PathBuf>,
    /// Number of potential samples written by `construct`.
    #[arg(long, default_value_t = 20001)]
    samples: usize,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OscKind {
    Single,
    Pair,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Args)]
struct OscArgs {
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "single")]
    kind: OscKind,
    #[arg(long, default_value_t = 1.0)]
    e1: f64,
    #[arg(long, default_value_t = 2.0)]
    e2: f64,
    #[arg(long, value_enum, default_value = "minus")]
    sign: SignArg,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    a_coef: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
    #[arg(long, default_value_t = 1e5)]
    xi_max: f64,
    /// Comma-separated starting points.
    #[arg(long, default_value = "1e2,1e3,1e4")]
    xi0: String,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

enum Failure {
    Input(String),
    Budget(String),
    Certification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 1,
            Failure::Budget(_) => 2,
            Failure::Certification(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let tag = match &e {
            Error::Domain(_) | Error::InvalidConfig(_) => "config",
            Error::PhaseUndefined { .. } => "liouville",
            Error::BudgetExhausted { .. } => "phase-search",
            Error::StepFailure { .. } | Error::NotContracting(_) => "integrator",
            Error::WindowTooShort(_) | Error::IncompleteInputs(_) => "analysis",
            Error::NoCrossing { .. } => "potential",
        };
        let msg = format!("[{tag}] {e}");
        match e {
            Error::Domain(_) | Error::InvalidConfig(_) | Error::PhaseUndefined { .. } => Failure::Input(msg),
            Error::BudgetExhausted { .. } => Failure::Budget(msg),
            _ => Failure::Certification(msg),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Input(format!("[io] {}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Serialize)]
struct PhasesOut {
    schema: u32,
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    theta: Vec<f64>,
    #[serde(rename = "M1")]
    m1: f64,
    #[serde(rename = "M2")]
    m2: f64,
    bound: f64,
    samples_used: usize,
    h: f64,
}

fn cmd_phases(a: &PhasesArgs) -> Outcome {
    if a.n == 0 {
        return Err(Failure::Input("[config] N must be at least 1".into()));
    }
    if a.max_samples == 0 {
        return Err(Failure::Input("[config] max-samples must be positive".into()));
    }
    let out = search_phases(a.n, a.max_samples, a.seed)?;
    print!(
        "{}",
        to_json(&PhasesOut {
            schema: 1,
            n: a.n,
            seed: a.seed,
            theta: out.phases.theta.clone(),
            m1: out.certificate.m1,
            m2: out.certificate.m2,
            bound: lemma_bound(a.n),
            samples_used: out.samples_used,
            h: out.certificate.h,
        })
    );
    Ok(())
}

fn run_config(a: &RunArgs) -> Result<RunConfig, Failure> {
    let mode = match a.mode {
        ModeArg::Thm13 => Mode::Thm13,
        ModeArg::Thm15 => Mode::Thm15,
    };
    let mut cfg = RunConfig::new(mode, a.alpha);
    cfg.n = a.n;
    cfg.amplitude = a.a;
    cfg.seed = a.seed;
    cfg.xi_max = a.xi_max;
    cfg.tol_ode = a.tol_ode;
    cfg.tol_quad = a.tol_quad;
    cfg.max_samples = a.max_samples;
    if let Some(l) = &a.levels {
        cfg.levels = levels::parse_levels(l).map_err(|e| Failure::Input(format!("[config] {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Potential from `--spec-in` or from the construction flags.
fn load_potential(a: &RunArgs) -> Result<(Potential, Option<serde_json::Value>), Failure> {
    if let Some(path) = &a.spec_in {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let spec: PotentialSpec =
            serde_json::from_str(&text).map_err(|e| Failure::Input(format!("[config] {}: {e}", path.display())))?;
        check_xi_max(a.xi_max)?;
        return Ok((Potential::new(spec)?, None));
    }
    let cfg = run_config(a)?;
    let c = construct(&cfg)?;
    let extra = serde_json::json!({
        "phases": c.phases.as_ref().map(|s| serde_json::json!({
            "theta": s.phases.theta,
            "M1": s.certificate.m1,
            "M2": s.certificate.m2,
            "samples_used": s.samples_used,
        })),
        "matching": c.matching,
    });
    Ok((c.potential, Some(extra)))
}

fn save_spec(a: &RunArgs, pot: &Potential) -> Outcome {
    let path = a.spec_out.clone().unwrap_or_else(|| a.out_dir.join("spec.json"));
    write_file(&path, &to_json(pot.spec()))
}

fn theorem_bound(pot: &Potential) -> f64 {
    let (n, alpha) = (pot.n(), pot.params().alpha);
    match pot.spec().mode {
        Mode::Thm13 => thm13_bound(n, alpha),
        Mode::Thm15 => thm15_bound(n, alpha, pot.amplitude()),
    }
}

fn cmd_construct(a: &RunArgs) -> Outcome {
    let (pot, extra) = load_potential(a)?;
    ensure_dir(&a.out_dir)?;
    save_spec(a, &pot)?;
    let x_hi = inverse_map(a.xi_max, pot.params())?;
    let samples = pot.samples(0.0, x_hi, a.samples);
    let path = a.out_dir.join("potential.csv");
    let mut w = create(&path)?;
    write_potential_csv(&mut w, &samples).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    let max_xi_v = samples.iter().map(|s| (s[2] * s[3]).abs()).fold(0.0, f64::max);
    let window = tail_window_x(&pot, a.xi_max)?;
    let sup = tail_sup_x(&pot, window.0, window.1)?;
    let summary = serde_json::json!({
        "schema": 1,
        "mode": pot.spec().mode,
        "N": pot.n(),
        "alpha": pot.params().alpha,
        "a": pot.amplitude(),
        "samples": samples.len(),
        "max_xi_abs_V": max_xi_v,
        "xi_V_bound": 4.0 * pot.amplitude() * pot.n() as f64,
        "sup_window_x": window,
        "measured_sup_x": sup,
        "theorem_bound": theorem_bound(&pot),
        "construction": extra,
    });
    print!("{}", to_json(&summary));
    Ok(())
}

fn cmd_embed(a: &RunArgs) -> Outcome {
    let (pot, extra) = load_potential(a)?;
    ensure_dir(&a.out_dir)?;
    save_spec(a, &pot)?;
    let (_, _, levels, report) = certify_potential(&pot, a.xi_max)?;
    for l in &levels {
        let path = a.out_dir.join(format!("level_{}.csv", l.level));
        let mut w = create(&path)?;
        write_trace_csv(&mut w, &l.trace).map_err(|e| io_err(&path, e))?;
        w.flush().map_err(|e| io_err(&path, e))?;
        let sidecar = serde_json::json!({
            "schema": 1,
            "level": l.level,
            "E": l.energy,
            "frame_phase": l.trace.frame_phase,
            "meta": l.trace.meta,
            "fit": l.fit,
            "l2": l.l2,
        });
        write_file(&a.out_dir.join(format!("level_{}.json", l.level)), &to_json(&sidecar))?;
    }
    let mut full = serde_json::to_value(&report).expect("serializable");
    full["construction"] = extra.unwrap_or(serde_json::Value::Null);
    write_file(&a.out_dir.join("report.json"), &to_json(&full))?;
    print!("{}", report.summary());
    if report.verdict.pass {
        Ok(())
    } else {
        Err(Failure::Certification("[analysis] certification failed".into()))
    }
}

fn cmd_asymptotics(a: &RunArgs) -> Outcome {
    let (pot, _) = load_potential(a)?;
    ensure_dir(&a.out_dir)?;
    let rep = asymptotics(&pot, a.xi_max)?;
    let text = to_json(&rep);
    write_file(&a.out_dir.join("asymptotics.json"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct OscOut<'a> {
    schema: u32,
    kind: &'a str,
    alpha: f64,
    a_coef: f64,
    gamma: f64,
    #[serde(rename = "E1")]
    e1: f64,
    #[serde(rename = "E2")]
    e2: Option<f64>,
    sign: Option<&'a str>,
    xi_max: f64,
    #[serde(flatten)]
    scan: &'a DecayScan,
}

fn cmd_oscint(a: &OscArgs) -> Outcome {
    let input = |m: String| Failure::Input(format!("[config] {m}"));
    let xi0: Vec<f64> = a
        .xi0
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| input(format!("bad xi0 entry '{s}'"))))
        .collect::<Result<_, _>>()?;
    if xi0.len() < 2 || xi0.iter().any(|x| !(*x > 1.0 && *x < a.xi_max)) {
        return Err(input("need at least two xi0 values in (1, xi_max)".into()));
    }
    if a.a_coef == 0.0 {
        return Err(input("the oscillation coefficient a must be non-zero".into()));
    }
    let sign = match a.sign {
        SignArg::Plus => PairSign::Plus,
        SignArg::Minus => PairSign::Minus,
    };
    if a.kind == OscKind::Pair && sign == PairSign::Minus && a.e1 == a.e2 {
        return Err(input(
            "the difference phase needs E1 != E2 (for E1 = E2 the integral grows like sin(gamma) ln(xi/xi0))".into(),
        ));
    }
    let energies = if a.kind == OscKind::Pair { vec![a.e1, a.e2] } else { vec![a.e1] };
    let params = ModelParams::new(a.alpha)?.with_energies(&energies)?;
    if xi0.iter().any(|x| *x < params.xi_start) {
        return Err(input(format!("xi0 must be >= {} for these energies", params.xi_start)));
    }
    let scan = match a.kind {
        OscKind::Single => decay_scan(&xi0, |x| osc_integral_single(a.a_coef, a.gamma, a.e1, x, a.xi_max, &params))?,
        OscKind::Pair => {
            decay_scan(&xi0, |x| osc_integral_pair(a.a_coef, a.gamma, a.e1, a.e2, sign, x, a.xi_max, &params))?
        }
    };
    ensure_dir(&a.out_dir)?;
    let path = a.out_dir.join("oscint.csv");
    let mut w = create(&path)?;
    write_oscint_csv(&mut w, &scan).map_err(|e| io_err(&path, e))?;
    w.flush().map_err(|e| io_err(&path, e))?;
    let pair = a.kind == OscKind::Pair;
    let out = OscOut {
        schema: 1,
        kind: if pair { "pair" } else { "single" },
        alpha: a.alpha,
        a_coef: a.a_coef,
        gamma: a.gamma,
        e1: a.e1,
        e2: pair.then_some(a.e2),
        sign: pair.then_some(if sign == PairSign::Plus { "plus" } else { "minus" }),
        xi_max: a.xi_max,
        scan: &scan,
    };
    let text = to_json(&out);
    write_file(&a.out_dir.join("oscint.json"), &text)?;
    print!("{text}");
    Ok(())
}

fn init_threads() -> Outcome {
    if let Ok(v) = std::env::var("STARK_EMBED_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Failure::Input(format!("[config] STARK_EMBED_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("[config] thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Phases(a) => cmd_phases(a),
        Command::Construct(a) => cmd_construct(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Oscint(a) => cmd_oscint(a),
        Command::Asymptotics(a) => cmd_asymptotics(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Input(m) | Failure::Budget(m) | Failure::Certification(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
