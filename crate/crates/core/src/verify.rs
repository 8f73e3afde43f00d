//! Inequality verifiers and empirical-constant sweeps.
//!
//! Every verifier samples `u` at cell centers and the closed-form `Δu` of a
//! [`TestFunction`] as cell averages, then reports
//! `implied_constant = max(0, sup_interior |u| - sup_boundary |u|) / functional`.
//! With [`VerifyOptions::cross_check`] the functional is recomputed from the
//! five-point (seven-point) Laplacian of the sampled `u` and the difference
//! is recorded.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{
    discrete_laplacian, extrema, sample, sample_laplacian_cell_average, ScalarField, TestFunction,
};
use crate::geometry::{build_domain, DomainSpec, GridDomain, Point, Shape};
use crate::kernels::{log_kernel_functional, riesz_functional, KernelOptions};
use crate::norms::{lorentz_norm, lp_norm, LORENTZ_CONVENTION};

pub const MANIFEST_VERSION: u32 = 1;

/// `1/(4π)`, the Newtonian potential constant in three dimensions.
pub const GREEN_CONSTANT_3D: f64 = 1.0 / (4.0 * PI);

/// Relative slack allowed for grid error in the Lorentz duality chain.
pub const CHAIN_TOLERANCE: f64 = 0.05;

/// Rows with `lhs - boundary > SUSPICION_FACTOR * functional` are flagged.
pub const SUSPICION_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremTag {
    Classical,
    Thm1,
    Thm2,
    Corollary,
}

impl TheoremTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TheoremTag::Classical => "classical",
            TheoremTag::Thm1 => "thm1",
            TheoremTag::Thm2 => "thm2",
            TheoremTag::Corollary => "corollary",
        }
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TheoremTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(TheoremTag::Classical),
            "thm1" => Ok(TheoremTag::Thm1),
            "thm2" => Ok(TheoremTag::Thm2),
            "corollary" => Ok(TheoremTag::Corollary),
            other => Err(Error::param(format!("unknown theorem tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub theorem_tag: TheoremTag,
    pub lhs_interior_sup: f64,
    pub boundary_sup: f64,
    pub functional_value: f64,
    /// `+∞` when the functional vanishes but `lhs > boundary`; serialized as
    /// `null` in JSON.
    pub implied_constant: f64,
    pub domain: String,
    pub function: String,
    pub h: f64,
    pub argmax: Point,
    pub conventions: Vec<String>,
    pub extras: BTreeMap<String, f64>,
}

impl InequalityReport {
    pub fn excess(&self) -> f64 {
        (self.lhs_interior_sup - self.boundary_sup).max(0.0)
    }

    pub fn is_suspicious(&self) -> bool {
        self.excess() > SUSPICION_FACTOR * self.functional_value
    }
}

/// `max(0, lhs - boundary) / functional`; zero over zero reads 0.
pub fn implied_constant(lhs: f64, boundary: f64, functional: f64) -> f64 {
    let excess = (lhs - boundary).max(0.0);
    if functional > 0.0 {
        excess / functional
    } else if excess == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub exec: Exec,
    pub cross_check: bool,
}

struct Sampled {
    domain: Arc<GridDomain>,
    u: ScalarField,
    lap: ScalarField,
}

fn prepare(domain: &Arc<GridDomain>, f: &TestFunction, dim: Option<usize>) -> Result<Sampled> {
    if let Some(expected) = dim {
        if domain.dimension() != expected {
            return Err(Error::Dimension {
                expected,
                got: domain.dimension(),
            });
        }
    }
    let (u, _) = sample(domain, f)?;
    let lap = sample_laplacian_cell_average(domain, f)?;
    Ok(Sampled {
        domain: domain.clone(),
        u,
        lap,
    })
}

/// Assembles a report; `functional` maps `|Δu|` to the functional value and
/// any extra diagnostics.
fn report(
    tag: TheoremTag,
    s: &Sampled,
    f: &TestFunction,
    opts: &VerifyOptions,
    mut conventions: Vec<String>,
    functional: impl Fn(&ScalarField) -> Result<(f64, BTreeMap<String, f64>)>,
) -> Result<InequalityReport> {
    let ext = extrema(&s.u);
    let (value, mut extras) = functional(&s.lap.abs())?;
    conventions.insert(0, "laplacian=closed-form-cell-average".to_string());
    if opts.cross_check {
        let (discrete, _) = functional(&discrete_laplacian(&s.u).abs())?;
        extras.insert("functional_discrete".into(), discrete);
        let rel = if value > 0.0 {
            (discrete - value).abs() / value
        } else {
            (discrete - value).abs()
        };
        extras.insert("cross_check_rel_diff".into(), rel);
    }
    Ok(InequalityReport {
        theorem_tag: tag,
        lhs_interior_sup: ext.sup_interior,
        boundary_sup: ext.sup_boundary,
        functional_value: value,
        implied_constant: implied_constant(ext.sup_interior, ext.sup_boundary, value),
        domain: s.domain.shape().to_string(),
        function: f.to_string(),
        h: s.domain.h(),
        argmax: ext.argmax,
        conventions,
        extras,
    })
}

/// Classical bound with `diam(Ω)^{2 - n/s} ‖Δu‖_{L^s}`, `s > n/2`.
pub fn verify_classical(
    domain: &Arc<GridDomain>,
    f: &TestFunction,
    s: f64,
    opts: &VerifyOptions,
) -> Result<InequalityReport> {
    let n = domain.dimension() as f64;
    if !(s > n / 2.0) {
        return Err(Error::param(format!(
            "classical bound needs s > n/2 = {}, got s = {s}",
            n / 2.0
        )));
    }
    let sampled = prepare(domain, f, None)?;
    let diam = domain.diameter();
    let factor = diam.powf(2.0 - n / s);
    report(
        TheoremTag::Classical,
        &sampled,
        f,
        opts,
        vec![format!("s={s}"), "diameter=grid".into()],
        |g| {
            let mut extras = BTreeMap::new();
            extras.insert("s".into(), s);
            extras.insert("diameter".into(), diam);
            Ok((factor * lp_norm(g, s)?, extras))
        },
    )
}

/// Lorentz `L^{3/2,1}` bound in three dimensions, with the pointwise Riesz
/// potential at the argmax of `|u|` and the two constants of the chain
/// `lhs - boundary ≤ riesz / 4π` and `riesz ≤ (4π/3)^{1/3} lorentz`.
pub fn verify_theorem1(
    domain: &Arc<GridDomain>,
    f: &TestFunction,
    opts: &VerifyOptions,
) -> Result<InequalityReport> {
    let sampled = prepare(domain, f, Some(3))?;
    let argmax = extrema(&sampled.u).argmax_index;
    let excess = {
        let e = extrema(&sampled.u);
        (e.sup_interior - e.sup_boundary).max(0.0)
    };
    let duality_bound = (4.0 * PI / 3.0).cbrt();
    report(
        TheoremTag::Thm1,
        &sampled,
        f,
        opts,
        vec![format!("lorentz={LORENTZ_CONVENTION}"), "p=1.5,q=1".into()],
        |g| {
            let lorentz = lorentz_norm(g, 1.5, 1.0)?;
            let kopts = KernelOptions {
                exec: opts.exec,
                ..KernelOptions::at_cells(vec![argmax])
            };
            let riesz = riesz_functional(domain, g, &kopts)?.max_value;
            let green_constant = if riesz > 0.0 { excess / riesz } else { 0.0 };
            let duality_constant = if lorentz > 0.0 { riesz / lorentz } else { 0.0 };
            let holds = green_constant <= GREEN_CONSTANT_3D * (1.0 + CHAIN_TOLERANCE)
                && duality_constant <= duality_bound * (1.0 + CHAIN_TOLERANCE);
            let mut extras = BTreeMap::new();
            extras.insert("riesz_at_argmax".into(), riesz);
            extras.insert("green_constant".into(), green_constant);
            extras.insert("duality_constant".into(), duality_constant);
            extras.insert("chain_holds".into(), if holds { 1.0 } else { 0.0 });
            Ok((lorentz, extras))
        },
    )
}

/// Planar log-kernel bound with scale `|Ω|`.
pub fn verify_theorem2(
    domain: &Arc<GridDomain>,
    f: &TestFunction,
    opts: &VerifyOptions,
) -> Result<InequalityReport> {
    let sampled = prepare(domain, f, Some(2))?;
    let scale = domain.measure();
    let kopts = KernelOptions {
        exec: opts.exec,
        ..Default::default()
    };
    report(
        TheoremTag::Thm2,
        &sampled,
        f,
        opts,
        vec!["kernel_scale=measure".into()],
        |g| {
            let r = log_kernel_functional(domain, g, scale, &kopts)?;
            let mut extras = BTreeMap::new();
            extras.insert("kernel_scale".into(), scale);
            Ok((r.max_value, extras))
        },
    )
}

/// Planar log-kernel bound with scale `inrad(Ω)^2` on simply connected
/// shapes, compared pointwise with the `|Ω|`-scaled functional.
pub fn verify_corollary(
    domain: &Arc<GridDomain>,
    f: &TestFunction,
    opts: &VerifyOptions,
) -> Result<InequalityReport> {
    if !domain.shape().is_simply_connected() {
        return Err(Error::param(format!(
            "{} is not simply connected",
            domain.shape()
        )));
    }
    let sampled = prepare(domain, f, Some(2))?;
    let inrad = domain.inradius();
    let scale = inrad * inrad;
    let measure = domain.measure();
    let kopts = KernelOptions {
        keep_per_point: true,
        exec: opts.exec,
        ..Default::default()
    };
    report(
        TheoremTag::Corollary,
        &sampled,
        f,
        opts,
        vec!["kernel_scale=inradius_squared".into()],
        |g| {
            let cor = log_kernel_functional(domain, g, scale, &kopts)?;
            let thm2 = log_kernel_functional(domain, g, measure, &kopts)?;
            let (a, b) = (
                cor.per_point_values.as_deref().unwrap_or_default(),
                thm2.per_point_values.as_deref().unwrap_or_default(),
            );
            let max_excess = a
                .iter()
                .zip(b)
                .map(|(x, y)| x - y)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut extras = BTreeMap::new();
            extras.insert("kernel_scale".into(), scale);
            extras.insert("inradius".into(), inrad);
            extras.insert("theorem2_functional".into(), thm2.max_value);
            extras.insert("pointwise_max_excess".into(), max_excess);
            extras.insert(
                "pointwise_holds".into(),
                if max_excess <= 0.0 { 1.0 } else { 0.0 },
            );
            Ok((cor.max_value, extras))
        },
    )
}

/// The logarithmic family `u_ε` on the unit disk.
pub fn sharpness_family(epsilon: f64) -> Result<TestFunction> {
    TestFunction::sharpness(epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRecord {
    pub epsilon: f64,
    /// `1/2 + ln(1/ε)`.
    pub sup_u: f64,
    /// `‖Δu_ε‖_{L¹} = 2π`.
    pub l1_lap: f64,
    /// Grid log-kernel functional with scale `|Ω|`.
    pub log_kernel: f64,
    /// `4π ln(1/ε) + 2π(1 + ln π)`, the functional at the origin.
    pub log_kernel_closed_form: f64,
    pub grid_sup_u: f64,
    pub grid_l1_lap: f64,
    pub ratio_l1: f64,
    pub ratio_kernel: f64,
    pub h: f64,
}

pub const SHARPNESS_EPSILONS: [f64; 5] = [0.2, 0.1, 0.05, 0.02, 0.01];

/// Sharpness quantities for `u_ε` on the unit disk at spacing `h`. `sup_u`
/// and `l1_lap` are closed forms; the log-kernel functional is computed on
/// the grid.
pub fn sharpness_record(epsilon: f64, h: f64, exec: Exec) -> Result<SharpnessRecord> {
    let f = sharpness_family(epsilon)?;
    let domain = Arc::new(build_domain(&Shape::unit_disk(), h)?);
    let (u, _) = sample(&domain, &f)?;
    let lap = sample_laplacian_cell_average(&domain, &f)?;
    let kopts = KernelOptions {
        exec,
        ..Default::default()
    };
    let log_kernel = log_kernel_functional(&domain, &lap.abs(), domain.measure(), &kopts)?.max_value;
    let sup_u = 0.5 + (1.0 / epsilon).ln();
    let l1_lap = 2.0 * PI;
    Ok(SharpnessRecord {
        epsilon,
        sup_u,
        l1_lap,
        log_kernel,
        log_kernel_closed_form: 4.0 * PI * (1.0 / epsilon).ln() + 2.0 * PI * (1.0 + PI.ln()),
        grid_sup_u: extrema(&u).sup_interior,
        grid_l1_lap: lp_norm(&lap, 1.0)?,
        ratio_l1: sup_u / l1_lap,
        ratio_kernel: sup_u / log_kernel,
        h,
    })
}

pub fn sharpness_records(epsilons: &[f64], h: f64, exec: Exec) -> Result<Vec<SharpnessRecord>> {
    epsilons
        .iter()
        .map(|&e| sharpness_record(e, h, exec))
        .collect()
}

pub fn write_sharpness_csv<W: Write>(records: &[SharpnessRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub domain: DomainSpec,
    pub function: TestFunction,
    pub theorem: TheoremTag,
    /// Exponent for the classical bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub version: u32,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteManifest {
    /// SHA-256 of the compact JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn with_h(mut self, h: f64) -> Self {
        for e in &mut self.entries {
            e.domain.h = h;
        }
        self
    }
}

pub const DEFAULT_CLASSICAL_S: f64 = 2.0;

/// Reference point and length scale per planar default domain.
fn planar_defaults() -> Vec<(Shape, f64)> {
    vec![
        (Shape::unit_disk(), 1.0),
        (Shape::unit_square(), 0.5),
        (Shape::default_annulus(), 0.25),
        (Shape::default_l_shape(), 0.25),
        (Shape::thin_rectangle(), 0.25),
    ]
}

fn default_functions(p: Point, ell: f64) -> Vec<TestFunction> {
    vec![
        TestFunction::Paraboloid { center: p },
        TestFunction::Sum {
            terms: vec![
                TestFunction::HarmonicQuadratic { center: p },
                TestFunction::Bump {
                    center: p,
                    radius: 0.25 * ell,
                    amplitude: 0.1,
                },
            ],
        },
        TestFunction::Sharpness {
            epsilon: 0.2 * ell,
            center: p,
        },
        TestFunction::Bump {
            center: [p[0] + 0.4 * ell, p[1] + 0.2 * ell, p[2]],
            radius: 0.5 * ell,
            amplitude: 1.0,
        },
    ]
}

/// The versioned default suite: every planar default domain against four
/// test functions under the classical (`s = 2`), `|Ω|`-scaled and (for
/// simply connected domains) inradius-scaled bounds, plus the unit ball
/// under the Lorentz bound.
pub fn default_manifest(h: f64) -> SuiteManifest {
    let mut entries = Vec::new();
    for (shape, ell) in planar_defaults() {
        let p = shape.reference_point();
        for function in default_functions(p, ell) {
            let mut tags = vec![TheoremTag::Classical, TheoremTag::Thm2];
            if shape.is_simply_connected() {
                tags.push(TheoremTag::Corollary);
            }
            for theorem in tags {
                entries.push(SuiteEntry {
                    domain: DomainSpec::new(shape.clone(), h),
                    function: function.clone(),
                    theorem,
                    s: (theorem == TheoremTag::Classical).then_some(DEFAULT_CLASSICAL_S),
                });
            }
        }
    }
    for function in ball_suite() {
        entries.push(SuiteEntry {
            domain: DomainSpec::new(Shape::unit_ball(), h),
            function,
            theorem: TheoremTag::Thm1,
            s: None,
        });
    }
    SuiteManifest {
        version: MANIFEST_VERSION,
        entries,
    }
}

/// `1 - r^2`, a harmonic polynomial plus a bump, and a concentrated bump on
/// the unit ball.
pub fn ball_suite() -> Vec<TestFunction> {
    let o = [0.0; 3];
    vec![
        TestFunction::Paraboloid { center: o },
        TestFunction::Sum {
            terms: vec![
                TestFunction::HarmonicQuadratic { center: o },
                TestFunction::Bump {
                    center: [0.2, -0.1, 0.1],
                    radius: 0.4,
                    amplitude: 0.5,
                },
            ],
        },
        TestFunction::Bump {
            center: [0.1, 0.1, 0.0],
            radius: 0.15,
            amplitude: 1.0,
        },
    ]
}

pub fn verify_entry(entry: &SuiteEntry, opts: &VerifyOptions) -> Result<InequalityReport> {
    let domain = Arc::new(entry.domain.build()?);
    match entry.theorem {
        TheoremTag::Classical => verify_classical(
            &domain,
            &entry.function,
            entry.s.unwrap_or(DEFAULT_CLASSICAL_S),
            opts,
        ),
        TheoremTag::Thm1 => verify_theorem1(&domain, &entry.function, opts),
        TheoremTag::Thm2 => verify_theorem2(&domain, &entry.function, opts),
        TheoremTag::Corollary => verify_corollary(&domain, &entry.function, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub theorem: TheoremTag,
    pub domain: String,
    pub function: String,
    pub report: Option<InequalityReport>,
    pub error: Option<String>,
    pub suspicious: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub manifest_hash: String,
    pub rows: Vec<SweepRow>,
    /// Per theorem, the largest implied constant among successful rows.
    pub max_implied_constant: BTreeMap<TheoremTag, f64>,
}

impl SweepOutcome {
    pub fn errors(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    pub fn suspicious(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| r.suspicious)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "index",
            "theorem_tag",
            "domain",
            "function",
            "h",
            "lhs_interior_sup",
            "boundary_sup",
            "functional_value",
            "implied_constant",
            "suspicious",
            "error",
        ])?;
        for row in &self.rows {
            let mut rec = vec![
                row.index.to_string(),
                row.theorem.to_string(),
                row.domain.clone(),
                row.function.clone(),
            ];
            match &row.report {
                Some(r) => rec.extend([
                    r.h.to_string(),
                    r.lhs_interior_sup.to_string(),
                    r.boundary_sup.to_string(),
                    r.functional_value.to_string(),
                    r.implied_constant.to_string(),
                ]),
                None => rec.extend(std::iter::repeat_n(String::new(), 5)),
            }
            rec.push(row.suspicious.to_string());
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs every manifest entry. Row failures are recorded, not propagated.
pub fn constant_sweep(manifest: &SuiteManifest, opts: &VerifyOptions) -> Result<SweepOutcome> {
    if manifest.entries.is_empty() {
        return Err(Error::param("empty suite"));
    }
    let inner = VerifyOptions {
        exec: Exec::Sequential,
        ..opts.clone()
    };
    let rows = opts.exec.map(manifest.entries.len(), |i| {
        let entry = &manifest.entries[i];
        let result = verify_entry(entry, &inner);
        let (report, error) = match result {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        SweepRow {
            index: i,
            theorem: entry.theorem,
            domain: entry.domain.shape.to_string(),
            function: entry.function.to_string(),
            suspicious: report.as_ref().is_some_and(|r| r.is_suspicious()),
            report,
            error,
        }
    });
    let mut max_implied_constant = BTreeMap::new();
    for row in &rows {
        if let Some(r) = &row.report {
            let slot = max_implied_constant.entry(row.theorem).or_insert(0.0f64);
            *slot = slot.max(r.implied_constant);
        }
    }
    Ok(SweepOutcome {
        manifest_hash: manifest.hash(),
        rows,
        max_implied_constant,
    })
}
