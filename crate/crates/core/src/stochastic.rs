//! Brownian motion with an absorbing boundary.
//!
//! Paths use the generator `Δ`: each coordinate increment over a step `dt` is
//! centered Gaussian with variance `2 dt`, so the free transition density is
//! `(4πt)^{-n/2} exp(-|x - y|^2 / 4t)`. A path that leaves the region is
//! frozen at the crossing point, located by bisection along the offending
//! step. Exits between grid times are not detected, which biases exit
//! probabilities slightly downward; the bias shrinks with `dt`.
//!
//! # Random streams
//!
//! Path `j` draws its increments from ChaCha8 stream `j` under the key
//! expanded from `seed`. Paths are grouped into substreams of
//! `substream_width` consecutive indices; each substream is simulated
//! sequentially and substream partial sums are combined in index order. The
//! output is therefore a pure function of the configuration, independent of
//! scheduling, and runs with the same seed on nested regions see identical
//! increments (coupled paths).

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{DomainSpec, GridDomain, Point, Shape};
use crate::special::erfc;

pub const HISTOGRAM_BINS: usize = 50;

/// Bisection stops once the bracket is shorter than this multiple of `√dt`.
const BISECTION_TOLERANCE: f64 = 1e-3;

/// Membership oracle for the absorbing region.
pub trait Region: Sync {
    fn dimension(&self) -> usize;
    fn contains(&self, p: &Point) -> bool;
}

impl Region for Shape {
    fn dimension(&self) -> usize {
        Shape::dimension(self)
    }

    fn contains(&self, p: &Point) -> bool {
        Shape::contains(self, p)
    }
}

/// Grid-mask membership.
impl Region for GridDomain {
    fn dimension(&self) -> usize {
        GridDomain::dimension(self)
    }

    fn contains(&self, p: &Point) -> bool {
        self.contains_point(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_substream_width")]
    pub substream_width: usize,
    #[serde(skip)]
    pub exec: Exec,
}

fn default_substream_width() -> usize {
    4096
}

impl McConfig {
    pub fn new(seed: u64, n_paths: usize, dt: f64, horizon: f64) -> Self {
        McConfig {
            seed,
            n_paths,
            dt,
            horizon,
            substream_width: default_substream_width(),
            exec: Exec::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::param("n_paths must be positive"));
        }
        if self.substream_width == 0 {
            return Err(Error::param("substream_width must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::param(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dt >= self.horizon {
            return Err(Error::param(format!(
                "dt = {} must be smaller than the horizon {}",
                self.dt, self.horizon
            )));
        }
        Ok(())
    }

    fn substreams(&self) -> usize {
        self.n_paths.div_ceil(self.substream_width)
    }
}

/// Default time step `1e-4 inrad^2`.
pub fn default_dt(inradius: f64) -> f64 {
    1e-4 * inradius * inradius
}

pub type PointFn<'a> = &'a (dyn Fn(&Point) -> f64 + Sync);

/// Functions sampled along paths.
#[derive(Clone, Copy)]
pub struct Integrand<'a> {
    /// Value at the absorption point.
    pub boundary_u: PointFn<'a>,
    /// Accumulated by the left-endpoint rule until absorption or the horizon.
    pub lap_u: PointFn<'a>,
    /// Terminal value of surviving paths; survivors contribute zero if absent.
    pub interior_u: Option<PointFn<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n_paths: usize,
    pub exit_fraction: f64,
    pub exit_fraction_stderr: f64,
    pub mean_terminal_u: f64,
    pub mean_terminal_u_stderr: f64,
    pub mean_occupation_integral: f64,
    pub mean_occupation_integral_stderr: f64,
    /// Feynman–Kac estimate `E u(ω(T ∧ τ)) - E ∫_0^{T ∧ τ} Δu(ω(s)) ds`.
    pub estimate: f64,
    pub estimate_stderr: f64,
    pub mean_exit_time: f64,
    /// Absorption counts in `HISTOGRAM_BINS` equal bins over `[0, horizon]`.
    pub exit_histogram: Vec<u64>,
    pub horizon: f64,
}

impl PathStats {
    /// Writes `t_bin, count` rows with bin centers.
    pub fn write_histogram_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_bin", "count"])?;
        let width = self.horizon / self.exit_histogram.len() as f64;
        for (i, c) in self.exit_histogram.iter().enumerate() {
            w.write_record([((i as f64 + 0.5) * width).to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    /// Mean and standard error (sample standard deviation / √n).
    fn mean_stderr(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum / nf;
        if n < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

#[derive(Debug, Clone)]
struct Partial {
    exits: Moments,
    terminal: Moments,
    occupation: Moments,
    estimate: Moments,
    exit_time: f64,
    histogram: Vec<u64>,
}

impl Partial {
    fn new() -> Self {
        Partial {
            exits: Moments::default(),
            terminal: Moments::default(),
            occupation: Moments::default(),
            estimate: Moments::default(),
            exit_time: 0.0,
            histogram: vec![0; HISTOGRAM_BINS],
        }
    }
}

fn base_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn path_rng(base: &ChaCha8Rng, path: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream(path as u64);
    rng
}

struct PathOutcome {
    exited: bool,
    exit_time: f64,
    terminal: f64,
    occupation: f64,
}

fn run_path<R: Region + ?Sized>(
    region: &R,
    x0: &Point,
    integrand: &Integrand<'_>,
    cfg: &McConfig,
    rng: &mut ChaCha8Rng,
) -> PathOutcome {
    let dim = region.dimension();
    let mut x = *x0;
    let mut occupation = 0.0;
    let tol = BISECTION_TOLERANCE * cfg.dt.sqrt();
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * cfg.dt;
        let step = cfg.dt.min(cfg.horizon - t);
        if step <= 1e-12 * cfg.dt {
            let terminal = integrand.interior_u.map_or(0.0, |f| f(&x));
            return PathOutcome {
                exited: false,
                exit_time: cfg.horizon,
                terminal,
                occupation,
            };
        }
        let sd = (2.0 * step).sqrt();
        let mut next = x;
        let mut delta = [0.0; 3];
        for a in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            delta[a] = sd * z;
            next[a] += delta[a];
        }
        if region.contains(&next) {
            occupation += (integrand.lap_u)(&x) * step;
            x = next;
            k += 1;
            continue;
        }
        let len = (0..dim).map(|a| delta[a] * delta[a]).sum::<f64>().sqrt();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while (hi - lo) * len > tol {
            let mid = 0.5 * (lo + hi);
            let mut p = x;
            for a in 0..dim {
                p[a] += mid * delta[a];
            }
            if region.contains(&p) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let frac = 0.5 * (lo + hi);
        let mut exit = x;
        for a in 0..dim {
            exit[a] += frac * delta[a];
        }
        occupation += (integrand.lap_u)(&x) * frac * step;
        return PathOutcome {
            exited: true,
            exit_time: t + frac * step,
            terminal: (integrand.boundary_u)(&exit),
            occupation,
        };
    }
}

/// Simulates `cfg.n_paths` absorbed paths from `x0` up to `cfg.horizon`.
pub fn simulate<R: Region + ?Sized>(
    region: &R,
    x0: &Point,
    integrand: &Integrand<'_>,
    cfg: &McConfig,
) -> Result<PathStats> {
    cfg.validate()?;
    if !region.contains(x0) {
        return Err(Error::param(format!("start point {x0:?} is not inside the region")));
    }
    let base = base_rng(cfg.seed);
    let bin_width = cfg.horizon / HISTOGRAM_BINS as f64;
    let partials = cfg.exec.map(cfg.substreams(), |s| {
        let mut part = Partial::new();
        let end = ((s + 1) * cfg.substream_width).min(cfg.n_paths);
        for path in s * cfg.substream_width..end {
            let mut rng = path_rng(&base, path);
            let o = run_path(region, x0, integrand, cfg, &mut rng);
            part.exits.push(if o.exited { 1.0 } else { 0.0 });
            part.terminal.push(o.terminal);
            part.occupation.push(o.occupation);
            part.estimate.push(o.terminal - o.occupation);
            part.exit_time += o.exit_time;
            if o.exited {
                let bin = ((o.exit_time / bin_width) as usize).min(HISTOGRAM_BINS - 1);
                part.histogram[bin] += 1;
            }
        }
        part
    });
    let mut total = Partial::new();
    for p in &partials {
        total.exits.merge(&p.exits);
        total.terminal.merge(&p.terminal);
        total.occupation.merge(&p.occupation);
        total.estimate.merge(&p.estimate);
        total.exit_time += p.exit_time;
        for (a, b) in total.histogram.iter_mut().zip(&p.histogram) {
            *a += b;
        }
    }
    let n = cfg.n_paths;
    let (exit_fraction, exit_fraction_stderr) = total.exits.mean_stderr(n);
    let (mean_terminal_u, mean_terminal_u_stderr) = total.terminal.mean_stderr(n);
    let (mean_occupation_integral, mean_occupation_integral_stderr) =
        total.occupation.mean_stderr(n);
    let (estimate, estimate_stderr) = total.estimate.mean_stderr(n);
    Ok(PathStats {
        n_paths: n,
        exit_fraction,
        exit_fraction_stderr,
        mean_terminal_u,
        mean_terminal_u_stderr,
        mean_occupation_integral,
        mean_occupation_integral_stderr,
        estimate,
        estimate_stderr,
        mean_exit_time: total.exit_time / n as f64,
        exit_histogram: total.histogram,
        horizon: cfg.horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl ProbabilityEstimate {
    pub fn lower_bound(&self, sigmas: f64) -> f64 {
        self.estimate - sigmas * self.stderr
    }
}

fn zero(_: &Point) -> f64 {
    0.0
}

/// Fraction of paths leaving the region by time `t`.
pub fn exit_probability<R: Region + ?Sized>(
    region: &R,
    x0: &Point,
    t: f64,
    cfg: &McConfig,
) -> Result<(ProbabilityEstimate, PathStats)> {
    let cfg = McConfig {
        horizon: t,
        ..cfg.clone()
    };
    let integrand = Integrand {
        boundary_u: &zero,
        lap_u: &zero,
        interior_u: None,
    };
    let stats = simulate(region, x0, &integrand, &cfg)?;
    Ok((
        ProbabilityEstimate {
            estimate: stats.exit_fraction,
            stderr: stats.exit_fraction_stderr,
        },
        stats,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalMode {
    /// One Gaussian jump per path; exact in distribution.
    Mc,
    /// Closed form for a disk or ball centered at the start point.
    ExactBall,
}

/// `P(x0 + W(t) ∉ shape)` for free (non-absorbed) motion.
pub fn free_terminal_exterior_probability(
    shape: &Shape,
    x0: &Point,
    t: f64,
    mode: TerminalMode,
    cfg: &McConfig,
) -> Result<ProbabilityEstimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::param(format!("t must be positive, got {t}")));
    }
    match mode {
        TerminalMode::ExactBall => {
            let (radius, centered) = match shape {
                Shape::Disk { center, radius } => {
                    (*radius, center[0] == x0[0] && center[1] == x0[1])
                }
                Shape::Ball3d { center, radius } => (*radius, *center == *x0),
                other => {
                    return Err(Error::param(format!(
                        "exact_ball mode needs a disk or ball, got {other}"
                    )))
                }
            };
            if !centered {
                return Err(Error::param("exact_ball mode needs the start point at the center"));
            }
            let x = radius * radius / (4.0 * t);
            let p = if shape.dimension() == 2 {
                (-x).exp()
            } else {
                erfc(x.sqrt()) + 2.0 * (x / PI).sqrt() * (-x).exp()
            };
            Ok(ProbabilityEstimate {
                estimate: p,
                stderr: 0.0,
            })
        }
        TerminalMode::Mc => {
            if cfg.n_paths == 0 || cfg.substream_width == 0 {
                return Err(Error::param("n_paths and substream_width must be positive"));
            }
            let dim = shape.dimension();
            let sd = (2.0 * t).sqrt();
            let base = base_rng(cfg.seed);
            let counts = cfg.exec.map(cfg.substreams(), |s| {
                let end = ((s + 1) * cfg.substream_width).min(cfg.n_paths);
                let mut outside = 0u64;
                for path in s * cfg.substream_width..end {
                    let mut rng = path_rng(&base, path);
                    let mut p = *x0;
                    for c in p.iter_mut().take(dim) {
                        let z: f64 = rng.sample(StandardNormal);
                        *c += sd * z;
                    }
                    if !shape.contains(&p) {
                        outside += 1;
                    }
                }
                outside
            });
            let hits: u64 = counts.iter().sum();
            let n = cfg.n_paths as f64;
            let p = hits as f64 / n;
            let stderr = if cfg.n_paths > 1 {
                (p * (1.0 - p) / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(ProbabilityEstimate { estimate: p, stderr })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InradiusExitResult {
    pub inradius: f64,
    pub c_geo: f64,
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Default multiple of `inrad^2` for the exit-time window.
pub const DEFAULT_C_GEO: f64 = 4.0;

/// Exit probability by `t = c_geo inrad(Ω)^2` on a simply connected shape;
/// the inradius comes from the grid at `spec.h`, paths use the analytic shape.
pub fn inradius_exit_check(
    spec: &DomainSpec,
    x0: &Point,
    c_geo: f64,
    cfg: &McConfig,
) -> Result<InradiusExitResult> {
    if !spec.shape.is_simply_connected() {
        return Err(Error::param(format!("{} is not simply connected", spec.shape)));
    }
    if !(c_geo > 0.0) {
        return Err(Error::param(format!("c_geo must be positive, got {c_geo}")));
    }
    let inradius = spec.build()?.inradius();
    let t = c_geo * inradius * inradius;
    let (p, _) = exit_probability(&spec.shape, x0, t, cfg)?;
    Ok(InradiusExitResult {
        inradius,
        c_geo,
        t,
        estimate: p.estimate,
        stderr: p.stderr,
    })
}
