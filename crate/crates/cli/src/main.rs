//! `abp-lab`: run maximum-principle experiments and write CSV/JSON artifacts.
//!
//! Settings come from an optional JSON config (`--config`), overridden by
//! flags. Exit status: 0 when every asserted bound or tolerance holds, 1 when
//! one fails, 2 on configuration errors (nothing is written in that case).

use std::f64::consts::PI;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use abp_core::elliptic::{solve_dirichlet, SolverOptions};
use abp_core::exec::configure_workers;
use abp_core::field::{extrema, sample, TestFunction};
use abp_core::geometry::{build_domain, GridDomain, Point, Shape};
use abp_core::kernels::{
    empirical_lemma_constant, lemma_base_grid, lemma_refined_grid, lemma_sweep, write_lemma_csv,
};
use abp_core::stochastic::{
    default_dt, exit_probability, free_terminal_exterior_probability, simulate, Integrand,
    McConfig, TerminalMode,
};
use abp_core::verify::{
    constant_sweep, default_manifest, sharpness_records, verify_classical, verify_corollary,
    verify_theorem1, verify_theorem2, write_sharpness_csv, InequalityReport, SuiteManifest,
    TheoremTag, VerifyOptions, DEFAULT_CLASSICAL_S, SHARPNESS_EPSILONS,
};
use abp_core::Error;

const WORKERS_ENV: &str = "ABP_LAB_WORKERS";
const DEFAULT_SEED: u64 = 1;
const DEFAULT_PATHS: usize = 100_000;
const DEFAULT_H_2D: f64 = 1.0 / 128.0;
const DEFAULT_H_2D_CONCENTRATED: f64 = 1.0 / 256.0;
const DEFAULT_H_3D: f64 = 1.0 / 32.0;

#[derive(Parser, Debug)]
#[command(name = "abp-lab", version, about = "Maximum-principle estimates, checked numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid spacing.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Monte Carlo path count.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Monte Carlo time step.
    #[arg(long, global = true)]
    dt: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check one inequality on one domain and test function.
    Verify(VerifyArgs),
    /// Empirical constants over the default (or configured) suite.
    Sweep,
    /// Sharpness family on the unit disk.
    Sharpness(SharpnessArgs),
    /// Heat-kernel lemma sweep.
    Lemma(LemmaArgs),
    /// Exit probabilities of Brownian motion.
    Exitprob(ExitArgs),
    /// Feynman–Kac estimate of u at a point.
    FeynmanKac(FeynmanKacArgs),
    /// Finite-difference Dirichlet solve against a closed-form solution.
    Solve(SolveArgs),
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    theorem: Option<TheoremTag>,
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    function: Option<String>,
    /// Sharpness parameter for `u_eps`.
    #[arg(long)]
    eps: Option<f64>,
    /// Exponent for the classical bound.
    #[arg(long)]
    s: Option<f64>,
    /// Also evaluate with the discrete Laplacian.
    #[arg(long)]
    cross_check: bool,
}

#[derive(Args, Debug)]
struct SharpnessArgs {
    /// Comma-separated epsilons.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    /// Refinement factor for the stability check.
    #[arg(long)]
    refine: Option<usize>,
}

#[derive(Args, Debug)]
struct ExitArgs {
    #[arg(long)]
    shape: Option<String>,
    /// Time horizon: a number or `omega-over-8`.
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    mode: Option<ExitMode>,
    /// Start point as `x,y[,z]`; defaults to the shape's reference point.
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct FeynmanKacArgs {
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    x0: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    shape: Option<String>,
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
enum ExitMode {
    /// Free Gaussian jump, terminal position outside the shape.
    Mc,
    /// Closed form for a disk or ball centered at the start point.
    ExactBall,
    /// Absorbed paths, exit before the horizon.
    Path,
}

/// A domain given by name or as an explicit shape object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum DomainArg {
    Named(String),
    Custom(Shape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum FunctionArg {
    Named(String),
    Custom(TestFunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum TimeArg {
    Value(f64),
    Named(String),
}

/// Every setting a command may read. Config files use these keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    substream_width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem: Option<TheoremTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    domain: Option<DomainArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    function: Option<FunctionArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilons: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cross_check: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refine: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<TimeArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mode: Option<ExitMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    manifest: Option<SuiteManifest>,
}

impl Settings {
    /// Field-wise: values in `over` win.
    fn overridden_by(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            command, out, seed, h, paths, dt, substream_width, theorem, domain, function, eps,
            epsilons, s, cross_check, refine, t, mode, x0, horizon, manifest
        )
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Verify(_) => "verify",
        Command::Sweep => "sweep",
        Command::Sharpness(_) => "sharpness",
        Command::Lemma(_) => "lemma",
        Command::Exitprob(_) => "exitprob",
        Command::FeynmanKac(_) => "feynman-kac",
        Command::Solve(_) => "solve",
    }
}

fn flag_settings(cli: &Cli) -> Settings {
    let mut s = Settings {
        command: Some(command_name(&cli.command).to_string()),
        out: cli.out.clone(),
        seed: cli.seed,
        h: cli.h,
        paths: cli.paths,
        dt: cli.dt,
        ..Default::default()
    };
    let time = |t: &Option<String>| {
        t.as_ref().map(|v| match v.parse::<f64>() {
            Ok(x) => TimeArg::Value(x),
            Err(_) => TimeArg::Named(v.clone()),
        })
    };
    match &cli.command {
        Command::Verify(a) => {
            s.theorem = a.theorem;
            s.domain = a.domain.clone().map(DomainArg::Named);
            s.function = a.function.clone().map(FunctionArg::Named);
            s.eps = a.eps;
            s.s = a.s;
            s.cross_check = a.cross_check.then_some(true);
        }
        Command::Sweep => {}
        Command::Sharpness(a) => s.epsilons = a.eps.clone(),
        Command::Lemma(a) => s.refine = a.refine,
        Command::Exitprob(a) => {
            s.domain = a.shape.clone().map(DomainArg::Named);
            s.t = time(&a.t);
            s.mode = a.mode;
            s.x0 = a.x0.clone();
        }
        Command::FeynmanKac(a) => {
            s.domain = a.shape.clone().map(DomainArg::Named);
            s.function = a.function.clone().map(FunctionArg::Named);
            s.eps = a.eps;
            s.horizon = a.horizon;
            s.x0 = a.x0.clone();
        }
        Command::Solve(a) => {
            s.domain = a.shape.clone().map(DomainArg::Named);
            s.function = a.function.clone().map(FunctionArg::Named);
            s.eps = a.eps;
        }
    }
    s
}

/// `Config` maps to exit status 2, `Runtime` to 1.
#[derive(Debug)]
enum RunError {
    Config(String),
    Runtime(String),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence(_) => RunError::Runtime(e.to_string()),
            other => RunError::Config(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Config(e.to_string())
    }
}

fn named_shape(name: &str) -> Result<Shape, RunError> {
    Ok(match name {
        "disk" => Shape::unit_disk(),
        "square" => Shape::unit_square(),
        "annulus" => Shape::default_annulus(),
        "l_shape" | "l-shape" => Shape::default_l_shape(),
        "thin_rectangle" | "rectangle" => Shape::thin_rectangle(),
        "ball" => Shape::unit_ball(),
        "cube" => Shape::unit_cube(),
        other => {
            return Err(RunError::Config(format!(
                "unknown domain {other:?} (disk, square, annulus, l_shape, thin_rectangle, ball, cube)"
            )))
        }
    })
}

fn resolve_shape(s: &Settings, fallback: &str) -> Result<Shape, RunError> {
    let shape = match &s.domain {
        None => named_shape(fallback)?,
        Some(DomainArg::Named(n)) => named_shape(n)?,
        Some(DomainArg::Custom(shape)) => shape.clone(),
    };
    shape.validate()?;
    Ok(shape)
}

/// Named test functions are placed relative to the shape's reference point,
/// with `ell` (the inradius) as length scale.
fn resolve_function(
    s: &Settings,
    shape: &Shape,
    ell: f64,
    fallback: &str,
) -> Result<TestFunction, RunError> {
    let name = match &s.function {
        Some(FunctionArg::Custom(f)) => return Ok(f.clone()),
        Some(FunctionArg::Named(n)) => n.as_str(),
        None => fallback,
    };
    let p = shape.reference_point();
    Ok(match name {
        "paraboloid" => TestFunction::Paraboloid { center: p },
        "harmonic" => TestFunction::HarmonicQuadratic { center: p },
        "harmonic_bump" => TestFunction::Sum {
            terms: vec![
                TestFunction::HarmonicQuadratic { center: p },
                TestFunction::Bump {
                    center: p,
                    radius: 0.25 * ell,
                    amplitude: 0.1,
                },
            ],
        },
        "u_eps" => {
            let eps = s
                .eps
                .ok_or_else(|| RunError::Config("function u_eps needs --eps".into()))?;
            let mut f = TestFunction::sharpness(eps)?;
            if let TestFunction::Sharpness { center, .. } = &mut f {
                *center = p;
            }
            f
        }
        "bump" => TestFunction::Bump {
            center: [p[0] + 0.4 * ell, p[1] + 0.2 * ell, p[2]],
            radius: 0.5 * ell,
            amplitude: 1.0,
        },
        "sin" => TestFunction::SinProduct,
        other => {
            return Err(RunError::Config(format!(
                "unknown function {other:?} (paraboloid, harmonic, harmonic_bump, u_eps, bump, sin)"
            )))
        }
    })
}

/// Concentrated Laplacians get a finer default grid; full-support ones keep
/// the quadratic-cost kernel sums affordable.
fn default_h(shape: &Shape, s: &Settings) -> f64 {
    let concentrated = matches!(&s.function, Some(FunctionArg::Named(n)) if n == "u_eps");
    match (shape.dimension(), concentrated) {
        (3, _) => DEFAULT_H_3D,
        (_, true) => DEFAULT_H_2D_CONCENTRATED,
        _ => DEFAULT_H_2D,
    }
}

fn build(shape: &Shape, s: &mut Settings) -> Result<Arc<GridDomain>, RunError> {
    let h = match s.h {
        Some(h) => h,
        None => *s.h.insert(default_h(shape, s)),
    };
    Ok(Arc::new(build_domain(shape, h)?))
}

fn start_point(s: &Settings, shape: &Shape) -> Result<Point, RunError> {
    match &s.x0 {
        None => Ok(shape.reference_point()),
        Some(v) if v.len() == shape.dimension() => {
            let mut p = [0.0; 3];
            p[..v.len()].copy_from_slice(v);
            if !shape.contains(&p) {
                return Err(RunError::Config(format!("x0 {v:?} is not inside {shape}")));
            }
            Ok(p)
        }
        Some(v) => Err(RunError::Config(format!(
            "x0 has {} coordinates, {shape} needs {}",
            v.len(),
            shape.dimension()
        ))),
    }
}

fn mc_config(s: &mut Settings, dt: f64, horizon: f64) -> McConfig {
    let mut cfg = McConfig::new(
        *s.seed.get_or_insert(DEFAULT_SEED),
        *s.paths.get_or_insert(DEFAULT_PATHS),
        *s.dt.get_or_insert(dt),
        horizon,
    );
    cfg.substream_width = *s.substream_width.get_or_insert(cfg.substream_width);
    cfg
}

/// Files to write plus the summary and the pass/fail verdict.
struct Run {
    files: Vec<(String, Vec<u8>)>,
    summary: Vec<(String, String)>,
    failures: Vec<String>,
    results: Value,
}

impl Run {
    fn new() -> Self {
        Run {
            files: Vec::new(),
            summary: Vec::new(),
            failures: Vec::new(),
            results: Value::Null,
        }
    }

    fn line(&mut self, key: &str, value: impl Display) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    fn assert(&mut self, ok: bool, what: String) {
        self.line("check", format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        if !ok {
            self.failures.push(what);
        }
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), RunError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut Vec<u8>) -> abp_core::Result<()>,
    ) -> Result<(), RunError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }
}

fn report_csv(r: &InequalityReport, buf: &mut Vec<u8>) -> abp_core::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    let mut header = vec![
        "theorem_tag".to_string(),
        "domain".into(),
        "function".into(),
        "h".into(),
        "lhs_interior_sup".into(),
        "boundary_sup".into(),
        "functional_value".into(),
        "implied_constant".into(),
    ];
    header.extend(r.extras.keys().cloned());
    w.write_record(&header)?;
    let mut row = vec![
        r.theorem_tag.to_string(),
        r.domain.clone(),
        r.function.clone(),
        r.h.to_string(),
        r.lhs_interior_sup.to_string(),
        r.boundary_sup.to_string(),
        r.functional_value.to_string(),
        r.implied_constant.to_string(),
    ];
    row.extend(r.extras.values().map(|v| v.to_string()));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

fn run_verify(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let theorem = *s.theorem.get_or_insert(TheoremTag::Thm2);
    let fallback_domain = if theorem == TheoremTag::Thm1 { "ball" } else { "disk" };
    let shape = resolve_shape(s, fallback_domain)?;
    let domain = build(&shape, s)?;
    let f = resolve_function(s, &shape, domain.inradius(), "paraboloid")?;
    let opts = VerifyOptions {
        cross_check: s.cross_check.unwrap_or(false),
        ..Default::default()
    };
    let report = match theorem {
        TheoremTag::Classical => {
            let exp = *s.s.get_or_insert(DEFAULT_CLASSICAL_S);
            verify_classical(&domain, &f, exp, &opts)?
        }
        TheoremTag::Thm1 => verify_theorem1(&domain, &f, &opts)?,
        TheoremTag::Thm2 => verify_theorem2(&domain, &f, &opts)?,
        TheoremTag::Corollary => verify_corollary(&domain, &f, &opts)?,
    };
    run.line("theorem", report.theorem_tag);
    run.line("domain", &report.domain);
    run.line("function", &report.function);
    run.line("h", report.h);
    run.line("lhs_interior_sup", report.lhs_interior_sup);
    run.line("boundary_sup", report.boundary_sup);
    run.line("functional_value", report.functional_value);
    run.line("implied_constant", report.implied_constant);
    for (k, v) in &report.extras {
        run.line(k, v);
    }
    run.assert(
        report.implied_constant.is_finite(),
        "implied constant is finite".into(),
    );
    if let Some(v) = report.extras.get("chain_holds") {
        run.assert(*v == 1.0, "Green and duality constants within bounds".into());
    }
    if let Some(v) = report.extras.get("pointwise_holds") {
        run.assert(*v == 1.0, "inradius functional below measure functional".into());
    }
    run.assert(!report.is_suspicious(), "excess within 1e3 x functional".into());
    run.csv("report.csv", |b| report_csv(&report, b))?;
    run.json("report.json", &report)?;
    run.results = serde_json::to_value(&report)?;
    Ok(())
}

fn run_sweep(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let h = *s.h.get_or_insert(1.0 / 64.0);
    let manifest = s.manifest.clone().unwrap_or_else(|| default_manifest(h));
    let outcome = constant_sweep(&manifest, &VerifyOptions::default())?;
    run.line("manifest_hash", &outcome.manifest_hash);
    run.line("rows", outcome.rows.len());
    for (tag, c) in &outcome.max_implied_constant {
        run.line(&format!("max_implied_constant[{tag}]"), c);
    }
    for row in outcome.errors() {
        run.assert(
            false,
            format!(
                "row {} ({} / {} / {}): {}",
                row.index,
                row.theorem,
                row.domain,
                row.function,
                row.error.as_deref().unwrap_or_default()
            ),
        );
    }
    for row in outcome.suspicious() {
        run.assert(
            false,
            format!("row {} ({} / {}): excess above 1e3 x functional", row.index, row.theorem, row.domain),
        );
    }
    run.assert(
        outcome.max_implied_constant.values().all(|c| c.is_finite()),
        "all implied constants finite".into(),
    );
    run.csv("sweep.csv", |b| outcome.write_csv(b))?;
    run.json("sweep.json", &outcome)?;
    run.json("suite.json", &manifest)?;
    run.results = json!({
        "manifest_hash": outcome.manifest_hash,
        "max_implied_constant": outcome.max_implied_constant,
    });
    Ok(())
}

fn run_sharpness(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let h = *s.h.get_or_insert(1.0 / 256.0);
    let eps = s.epsilons.get_or_insert(SHARPNESS_EPSILONS.to_vec()).clone();
    if eps.is_empty() {
        return Err(RunError::Config("no epsilons given".into()));
    }
    let records = sharpness_records(&eps, h, Default::default())?;
    for r in &records {
        run.line(
            &format!("eps={}", r.epsilon),
            format!(
                "sup_u={:.6} l1_lap={:.6} log_kernel={:.6} ratio_l1={:.6} ratio_kernel={:.6}",
                r.sup_u, r.l1_lap, r.log_kernel, r.ratio_l1, r.ratio_kernel
            ),
        );
    }
    let mut sorted = records.clone();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    run.assert(
        sorted.windows(2).all(|w| w[1].ratio_l1 > w[0].ratio_l1),
        "ratio_l1 increases as eps decreases".into(),
    );
    run.assert(
        records.iter().all(|r| (0.05..=0.12).contains(&r.ratio_kernel)),
        "ratio_kernel within [0.05, 0.12]".into(),
    );
    run.csv("sharpness.csv", |b| write_sharpness_csv(&records, b))?;
    run.json("sharpness.json", &records)?;
    run.results = serde_json::to_value(&records)?;
    Ok(())
}

fn run_lemma(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let factor = *s.refine.get_or_insert(10);
    if factor == 0 {
        return Err(RunError::Config("refine must be positive".into()));
    }
    let base = lemma_sweep(&lemma_base_grid())?;
    let refined = lemma_sweep(&lemma_refined_grid(factor))?;
    let (c_base, c_refined) = (empirical_lemma_constant(&base), empirical_lemma_constant(&refined));
    run.line("c_emp", c_base);
    run.line("c_emp_refined", c_refined);
    run.assert(c_base <= 2.0, "C_emp <= 2".into());
    run.assert(
        (c_refined / c_base - 1.0).abs() <= 0.01,
        "C_emp stable within 1% under refinement".into(),
    );
    run.csv("lemma.csv", |b| write_lemma_csv(&base, b))?;
    run.csv("lemma_refined.csv", |b| write_lemma_csv(&refined, b))?;
    let results = json!({"c_emp": c_base, "c_emp_refined": c_refined, "refine": factor});
    run.json("lemma.json", &results)?;
    run.results = results;
    Ok(())
}

fn horizon_from(t: &TimeArg, shape: &Shape) -> Result<f64, RunError> {
    let v = match t {
        TimeArg::Value(v) => *v,
        TimeArg::Named(n) if n == "omega-over-8" => shape.measure() / 8.0,
        TimeArg::Named(n) => return Err(RunError::Config(format!("unknown time {n:?}"))),
    };
    if !(v > 0.0) || !v.is_finite() {
        return Err(RunError::Config(format!("time must be positive, got {v}")));
    }
    Ok(v)
}

fn run_exitprob(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let shape = resolve_shape(s, "disk")?;
    let x0 = start_point(s, &shape)?;
    let t_arg = s
        .t
        .get_or_insert(TimeArg::Named("omega-over-8".into()))
        .clone();
    let t = horizon_from(&t_arg, &shape)?;
    let mode = *s.mode.get_or_insert(ExitMode::Mc);
    let inrad = build(&shape, s)?.inradius();
    let dt = default_dt(inrad).min(0.5 * t);
    let cfg = mc_config(s, dt, t);
    let (estimate, stderr, stats) = match mode {
        ExitMode::Mc | ExitMode::ExactBall => {
            let m = if mode == ExitMode::Mc {
                TerminalMode::Mc
            } else {
                TerminalMode::ExactBall
            };
            let p = free_terminal_exterior_probability(&shape, &x0, t, m, &cfg)?;
            (p.estimate, p.stderr, None)
        }
        ExitMode::Path => {
            let (p, stats) = exit_probability(&shape, &x0, t, &cfg)?;
            (p.estimate, p.stderr, Some(stats))
        }
    };
    run.line("shape", &shape);
    run.line("t", t);
    run.line("estimate", estimate);
    run.line("stderr", stderr);
    let reference = (-2.0 / PI).exp();
    run.line("e^(-2/pi)", reference);
    run.assert(
        estimate - 3.0 * stderr >= 0.5,
        "estimate - 3 stderr >= 1/2".into(),
    );
    if let Some(stats) = &stats {
        run.csv("exit_times.csv", |b| stats.write_histogram_csv(b))?;
    }
    let results = json!({
        "shape": shape,
        "x0": x0,
        "t": t,
        "mode": mode,
        "estimate": estimate,
        "stderr": stderr,
        "reference_e_minus_2_over_pi": reference,
        "path_stats": stats,
    });
    run.json("exitprob.json", &results)?;
    run.results = results;
    Ok(())
}

fn run_feynman_kac(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let shape = resolve_shape(s, "disk")?;
    let domain = build(&shape, s)?;
    let inrad = domain.inradius();
    let f = resolve_function(s, &shape, inrad, "paraboloid")?;
    if !f.supports_dimension(shape.dimension()) {
        return Err(RunError::Config(format!("{f} is not defined in dimension {}", shape.dimension())));
    }
    let x0 = start_point(s, &shape)?;
    let horizon = *s.horizon.get_or_insert(shape.measure());
    let cfg = mc_config(s, default_dt(inrad), horizon);
    let dim = shape.dimension();
    let u = |p: &Point| f.u(p, dim);
    let lap = |p: &Point| f.lap_u(p, dim);
    let integrand = Integrand {
        boundary_u: &u,
        lap_u: &lap,
        interior_u: Some(&u),
    };
    let stats = simulate(&shape, &x0, &integrand, &cfg)?;
    let exact = f.u(&x0, dim);
    // discrete monitoring bias allowance
    let allowance = 4.0 * cfg.dt.sqrt();
    run.line("function", &f);
    run.line("u(x0)", exact);
    run.line("estimate", stats.estimate);
    run.line("stderr", stats.estimate_stderr);
    run.line("exit_fraction", stats.exit_fraction);
    run.line("bias_allowance", allowance);
    run.assert(
        (stats.estimate - exact).abs() <= 3.0 * stats.estimate_stderr + allowance,
        "estimate within 3 stderr + bias allowance of u(x0)".into(),
    );
    run.csv("exit_times.csv", |b| stats.write_histogram_csv(b))?;
    let results = json!({
        "function": f,
        "x0": x0,
        "u_x0": exact,
        "bias_allowance": allowance,
        "stats": stats,
    });
    run.json("feynman_kac.json", &results)?;
    run.results = results;
    Ok(())
}

fn run_solve(s: &mut Settings, run: &mut Run) -> Result<(), RunError> {
    let shape = resolve_shape(s, "square")?;
    let domain = build(&shape, s)?;
    let f = resolve_function(s, &shape, domain.inradius(), "sin")?;
    let (u, lap) = sample(&domain, &f)?;
    let (uh, diag) = solve_dirichlet(&domain, &lap.scale(-1.0), u.boundary(), &SolverOptions::default())?;
    let err = uh
        .interior()
        .iter()
        .zip(u.interior())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let e = extrema(&uh);
    run.line("function", &f);
    run.line("h", domain.h());
    run.line("iterations", diag.iterations);
    run.line("residual_inf", diag.residual_inf);
    run.line("max_error", err);
    run.line("sup_interior", e.sup_interior);
    run.line("sup_boundary", e.sup_boundary);
    run.assert(diag.residual_inf <= diag.tolerance, "residual within tolerance".into());
    run.csv("solution.csv", |b| uh.write_csv(b))?;
    let results = json!({
        "function": f,
        "diagnostics": diag,
        "max_error": err,
        "sup_interior": e.sup_interior,
        "sup_boundary": e.sup_boundary,
    });
    run.json("solve.json", &results)?;
    run.results = results;
    Ok(())
}

fn load_config(path: &Path) -> Result<Settings, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| RunError::Config(format!("invalid config {}: {e}", path.display())))
}

fn execute(cli: &Cli) -> Result<(Settings, Run), RunError> {
    let base = match &cli.config {
        Some(p) => load_config(p)?,
        None => Settings::default(),
    };
    if let Some(c) = &base.command {
        if c != command_name(&cli.command) {
            return Err(RunError::Config(format!(
                "config is for command {c:?}, not {:?}",
                command_name(&cli.command)
            )));
        }
    }
    let mut s = base.overridden_by(flag_settings(cli));
    let mut run = Run::new();
    match &cli.command {
        Command::Verify(_) => run_verify(&mut s, &mut run),
        Command::Sweep => run_sweep(&mut s, &mut run),
        Command::Sharpness(_) => run_sharpness(&mut s, &mut run),
        Command::Lemma(_) => run_lemma(&mut s, &mut run),
        Command::Exitprob(_) => run_exitprob(&mut s, &mut run),
        Command::FeynmanKac(_) => run_feynman_kac(&mut s, &mut run),
        Command::Solve(_) => run_solve(&mut s, &mut run),
    }?;
    Ok((s, run))
}

fn write_outputs(dir: &Path, s: &Settings, run: &Run) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, bytes) in &run.files {
        fs::write(dir.join(name), bytes)?;
    }
    let manifest = json!({
        "tool": "abp-lab",
        "version": env!("CARGO_PKG_VERSION"),
        "config": s,
        "files": run.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "results": run.results,
        "failures": run.failures,
    });
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(dir.join("manifest.json"), bytes)
}

fn print_summary(command: &str, dir: &Path, run: &Run) {
    let width = run.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    println!("abp-lab {command}");
    for (k, v) in &run.summary {
        println!("  {k:<width$}  {v}");
    }
    println!("  {:<width$}  {}", "output", dir.display());
    let verdict = if run.failures.is_empty() { "PASS" } else { "FAIL" };
    println!("  {:<width$}  {verdict}", "status");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let workers = match v.trim().parse::<usize>() {
            Ok(n) => configure_workers(n).map_err(|e| e.to_string()),
            Err(e) => Err(format!("{WORKERS_ENV}={v:?}: {e}")),
        };
        if let Err(e) = workers {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let (mut settings, run) = match execute(&cli) {
        Ok(r) => r,
        Err(RunError::Config(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(RunError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let dir = settings.out.get_or_insert_with(|| PathBuf::from("out")).clone();
    if let Err(e) = write_outputs(&dir, &settings, &run) {
        eprintln!("error: cannot write to {}: {e}", dir.display());
        return ExitCode::from(2);
    }
    print_summary(command_name(&cli.command), &dir, &run);
    if run.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &run.failures {
            eprintln!("assertion failed: {f}");
        }
        ExitCode::from(1)
    }
}
