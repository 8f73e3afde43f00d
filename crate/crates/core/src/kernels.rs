//! Potential-theoretic kernels: the planar logarithmic kernel functional, the
//! Newtonian (Riesz) potential in three dimensions, heat-kernel time
//! integrals, and the exponential-integral bound behind them.
//!
//! Heat kernels use the generator `Δ`, i.e.
//! `p(s, x, y) = (4πs)^{-n/2} exp(-|x - y|^2 / 4s)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::ScalarField;
use crate::geometry::{GridDomain, Point};
pub use crate::special::exp_integral_e1;

/// Which interior cells the functional is evaluated at.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum EvalPoints {
    #[default]
    All,
    /// Linear indices of interior cells, e.g. from [`crate::field::top_k_cells`].
    Cells(Vec<usize>),
}

#[derive(Debug, Clone, Default)]
pub struct KernelOptions {
    pub points: EvalPoints,
    pub keep_per_point: bool,
    pub exec: Exec,
}

impl KernelOptions {
    pub fn at_cells(cells: Vec<usize>) -> Self {
        KernelOptions {
            points: EvalPoints::Cells(cells),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFunctionalResult {
    pub max_value: f64,
    pub argmax: Point,
    pub argmax_index: usize,
    /// Cells the functional was evaluated at, in evaluation order.
    pub evaluated: Vec<usize>,
    /// Per-cell values aligned with `evaluated`, when requested.
    pub per_point_values: Option<Vec<f64>>,
    /// True when evaluation was restricted to a subset of interior cells.
    pub restricted: bool,
}

/// Kernel values tabulated by integer squared displacement `m = |Δi|^2`;
/// entry 0 is the self-cell value with distance clamped to `h/2`.
struct DisplacementTable {
    values: Vec<f64>,
}

impl DisplacementTable {
    fn new(domain: &GridDomain, kernel: impl Fn(f64) -> f64) -> Self {
        let dims = domain.dims();
        let max_m: usize = (0..domain.dimension()).map(|a| (dims[a] - 1).pow(2)).sum();
        let h = domain.h();
        let values = (0..=max_m)
            .map(|m| {
                let d = if m == 0 { 0.5 * h } else { h * (m as f64).sqrt() };
                kernel(d)
            })
            .collect();
        DisplacementTable { values }
    }
}

fn kernel_functional(
    domain: &GridDomain,
    g: &ScalarField,
    table: &DisplacementTable,
    opts: &KernelOptions,
) -> Result<KernelFunctionalResult> {
    if !std::ptr::eq(domain, g.domain().as_ref()) && domain.spec() != g.domain().spec() {
        return Err(Error::param("field does not live on the given domain"));
    }
    let vol = domain.cell_volume();
    let support: Vec<([i64; 3], f64)> = domain
        .interior_cells()
        .iter()
        .zip(g.interior())
        .filter(|(_, v)| **v != 0.0)
        .map(|(&idx, v)| {
            let m = domain.multi_index(idx);
            ([m[0] as i64, m[1] as i64, m[2] as i64], v.abs() * vol)
        })
        .collect();

    let (evaluated, restricted) = match &opts.points {
        EvalPoints::All => (domain.interior_cells().to_vec(), false),
        EvalPoints::Cells(cells) => {
            if cells.is_empty() {
                return Err(Error::param("empty evaluation set"));
            }
            if let Some(&bad) = cells
                .iter()
                .find(|&&c| c >= domain.n_cells() || domain.class(c) != crate::geometry::CellClass::Interior)
            {
                return Err(Error::param(format!("evaluation cell {bad} is not interior")));
            }
            (cells.clone(), true)
        }
    };

    let values = opts.exec.map(evaluated.len(), |e| {
        let m = domain.multi_index(evaluated[e]);
        let x = [m[0] as i64, m[1] as i64, m[2] as i64];
        let mut acc = 0.0;
        for (y, w) in &support {
            let d2 = (x[0] - y[0]).pow(2) + (x[1] - y[1]).pow(2) + (x[2] - y[2]).pow(2);
            acc += table.values[d2 as usize] * w;
        }
        acc
    });

    let mut best = 0usize;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    let argmax_index = evaluated[best];
    Ok(KernelFunctionalResult {
        max_value: values[best],
        argmax: domain.center(argmax_index),
        argmax_index,
        per_point_values: opts.keep_per_point.then(|| values.clone()),
        evaluated,
        restricted,
    })
}

/// `max_x Σ_y max{1, ln(scale / |x - y|^2)} |g(y)| h^2` over the planar
/// evaluation cells; `scale` is `|Ω|` or `inrad(Ω)^2`.
pub fn log_kernel_functional(
    domain: &GridDomain,
    g: &ScalarField,
    scale: f64,
    opts: &KernelOptions,
) -> Result<KernelFunctionalResult> {
    if domain.dimension() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            got: domain.dimension(),
        });
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::param(format!("kernel scale must be positive, got {scale}")));
    }
    let table = DisplacementTable::new(domain, |d| log_kernel(scale, d));
    kernel_functional(domain, g, &table, opts)
}

/// `max{1, ln(scale / d^2)}`.
pub fn log_kernel(scale: f64, d: f64) -> f64 {
    (scale / (d * d)).ln().max(1.0)
}

/// `max_x Σ_y |g(y)| h^3 / |x - y|` over the spatial evaluation cells.
pub fn riesz_functional(
    domain: &GridDomain,
    g: &ScalarField,
    opts: &KernelOptions,
) -> Result<KernelFunctionalResult> {
    if domain.dimension() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: domain.dimension(),
        });
    }
    let table = DisplacementTable::new(domain, |d| 1.0 / d);
    kernel_functional(domain, g, &table, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    /// `a = r^2 / (c2 t)`.
    pub a: f64,
    /// `∫_0^t (c1/s) exp(-r^2 / (c2 s)) ds = c1 E1(a)`.
    pub lhs: f64,
    /// `(1 + max{0, -ln a}) exp(-a)`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Both sides of the logarithmic heat-kernel time bound.
pub fn lemma_bound_check(t: f64, r: f64, c1: f64, c2: f64) -> Result<LemmaCheck> {
    for (name, v) in [("t", t), ("r", r), ("c1", c1), ("c2", c2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::param(format!("{name} must be positive and finite, got {v}")));
        }
    }
    let a = r * r / (c2 * t);
    let lhs = c1 * exp_integral_e1(a)?;
    let rhs = (1.0 + (-a.ln()).max(0.0)) * (-a).exp();
    Ok(LemmaCheck {
        a,
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// The lemma sweep grid `{m 10^k : k = -4..4, m ∈ {1, 2, 5}}`.
pub fn lemma_base_grid() -> Vec<f64> {
    let mut grid = Vec::new();
    for k in -4..=4 {
        for m in [1.0, 2.0, 5.0] {
            grid.push(m * 10f64.powi(k));
        }
    }
    grid
}

/// Log-uniform grid over the span of the base grid with `factor` times as
/// many points, merged with the base points.
pub fn lemma_refined_grid(factor: usize) -> Vec<f64> {
    let base = lemma_base_grid();
    let (lo, hi) = (base[0].ln(), base[base.len() - 1].ln());
    let n = base.len() * factor;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .chain(base)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Lemma checks at every `a` in `grid`, with `c1 = c2 = t = 1`.
pub fn lemma_sweep(grid: &[f64]) -> Result<Vec<LemmaCheck>> {
    grid.iter()
        .map(|&a| lemma_bound_check(1.0, a.sqrt(), 1.0, 1.0))
        .collect()
}

pub fn empirical_lemma_constant(rows: &[LemmaCheck]) -> f64 {
    rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
}

pub fn write_lemma_csv<W: Write>(rows: &[LemmaCheck], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["a", "lhs", "rhs", "ratio"])?;
    for r in rows {
        w.write_record([
            r.a.to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `∫_0^t (4πs)^{-n/2} exp(-r^2/4s) ds`; `t = f64::INFINITY` is allowed for
/// `n = 3` (the Newtonian potential `1/(4πr)`), not for `n = 2`.
pub fn heat_kernel_time_integral(r: f64, t: f64, n: usize) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::param(format!("r must be positive, got {r}")));
    }
    if !(t > 0.0) {
        return Err(Error::param(format!("t must be positive, got {t}")));
    }
    match n {
        2 if t.is_infinite() => Err(Error::param(
            "the planar heat-kernel time integral diverges for t = ∞",
        )),
        2 => Ok(exp_integral_e1(r * r / (4.0 * t))? / (4.0 * PI)),
        3 if t.is_infinite() => Ok(1.0 / (4.0 * PI * r)),
        3 => Ok(crate::special::erfc(r / (2.0 * t.sqrt())) / (4.0 * PI * r)),
        other => Err(Error::Dimension {
            expected: 2,
            got: other,
        }),
    }
}

/// `(1/4π) E1(r^2 / 4T) / max{1, ln(T / r^2)}`: the ratio of the planar
/// heat-kernel time integral up to `T = |Ω|` to the logarithmic kernel.
pub fn kernel_domination_ratio(r: f64, measure: f64) -> Result<f64> {
    let heat = heat_kernel_time_integral(r, measure, 2)?;
    Ok(heat / log_kernel(measure, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::field::{sample, TestFunction};
    use crate::geometry::{build_domain, Shape};

    /// 1D radial oracle: `2π ∫_0^ε r max{1, ln(scale/r^2)} (2/ε^2) dr`
    /// by composite Simpson on `r = ε s^2` (removes the log singularity).
    fn log_kernel_radial_oracle(eps: f64, scale: f64) -> f64 {
        let n = 20_000;
        let f = |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            let r = eps * s * s;
            let dr = 2.0 * eps * s;
            2.0 * PI * r * log_kernel(scale, r) * (2.0 / (eps * eps)) * dr
        };
        let h = 1.0 / n as f64;
        let mut sum = f(0.0) + f(1.0);
        for i in 1..n {
            sum += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        sum * h / 3.0
    }

    fn disk(h: f64) -> Arc<GridDomain> {
        Arc::new(build_domain(&Shape::unit_disk(), h).unwrap())
    }

    #[test]
    fn radial_oracle_matches_closed_form() {
        for eps in [0.1, 0.01] {
            let closed = 4.0 * PI * (1.0 / eps as f64).ln() + 2.0 * PI * (1.0 + PI.ln());
            let oracle = log_kernel_radial_oracle(eps, PI);
            assert!((closed - oracle).abs() < 1e-8, "{closed} vs {oracle}");
        }
    }

    #[test]
    fn log_kernel_on_sharpness_laplacian() {
        let d = disk(1.0 / 256.0);
        for (eps, expected) in [(0.1, 42.41), (0.01, 71.35)] {
            let (_, lap) = sample(&d, &TestFunction::sharpness(eps).unwrap()).unwrap();
            let res = log_kernel_functional(&d, &lap, PI, &KernelOptions::default()).unwrap();
            let oracle = log_kernel_radial_oracle(eps, PI);
            assert!((oracle - expected).abs() < 0.01);
            assert!(
                ((res.max_value - oracle) / oracle).abs() < 0.05,
                "eps {eps}: {} vs {oracle}",
                res.max_value
            );
            assert!(res.argmax[0].abs() < 1e-12 && res.argmax[1].abs() < 1e-12);
            assert!(!res.restricted);
        }
    }

    #[test]
    fn zero_density_gives_zero() {
        let d = disk(0.05);
        let z = ScalarField::zeros(d.clone());
        let res = log_kernel_functional(&d, &z, PI, &KernelOptions::default()).unwrap();
        assert_eq!(res.max_value, 0.0);
        let b = Arc::new(build_domain(&Shape::unit_ball(), 0.1).unwrap());
        let z = ScalarField::zeros(b.clone());
        assert_eq!(riesz_functional(&b, &z, &KernelOptions::default()).unwrap().max_value, 0.0);
    }

    #[test]
    fn dimension_and_scale_checks() {
        let d = disk(0.05);
        let z = ScalarField::zeros(d.clone());
        assert!(matches!(
            riesz_functional(&d, &z, &KernelOptions::default()),
            Err(Error::Dimension { .. })
        ));
        assert!(log_kernel_functional(&d, &z, 0.0, &KernelOptions::default()).is_err());
        let b = Arc::new(build_domain(&Shape::unit_ball(), 0.1).unwrap());
        let zb = ScalarField::zeros(b.clone());
        assert!(log_kernel_functional(&b, &zb, 1.0, &KernelOptions::default()).is_err());
    }

    #[test]
    fn riesz_at_ball_center() {
        let h = 1.0 / 32.0;
        let b = Arc::new(build_domain(&Shape::unit_ball(), h).unwrap());
        let (_, lap) = sample(&b, &TestFunction::Paraboloid { center: [0.0; 3] }).unwrap();
        let center = b.locate(&[0.0; 3]).unwrap();
        let res = riesz_functional(&b, &lap, &KernelOptions::at_cells(vec![center])).unwrap();
        // 6 * 4π ∫_0^1 r dr
        let want = 12.0 * PI;
        assert!(((res.max_value - want) / want).abs() < 0.03, "{}", res.max_value);
        assert!(res.restricted);
    }

    #[test]
    fn riesz_far_field() {
        let h = 1.0 / 16.0;
        let b = Arc::new(build_domain(&Shape::unit_cube(), h).unwrap());
        // indicator of a few cells near one corner, evaluated at the far corner
        let near = [0.1, 0.1, 0.1];
        let g = ScalarField::from_fn(b.clone(), "blob", |p| {
            let d2: f64 = (0..3).map(|a| (p[a] - near[a]).powi(2)).sum();
            if d2 < 0.01 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let mass: f64 = g.interior().iter().sum::<f64>() * b.cell_volume();
        let far = b.locate(&[0.9, 0.9, 0.9]).unwrap();
        let pf = b.center(far);
        let res = riesz_functional(&b, &g, &KernelOptions::at_cells(vec![far])).unwrap();
        let dist = (0..3).map(|a| (pf[a] - near[a]).powi(2)).sum::<f64>().sqrt();
        assert!(((res.max_value - mass / dist) / res.max_value).abs() < 0.05);
    }

    #[test]
    fn evaluation_is_policy_independent() {
        let d = disk(1.0 / 64.0);
        let (_, lap) = sample(&d, &TestFunction::Paraboloid { center: [0.2, 0.0, 0.0] }).unwrap();
        let mut opts = KernelOptions {
            keep_per_point: true,
            exec: Exec::Sequential,
            ..Default::default()
        };
        let a = log_kernel_functional(&d, &lap, PI, &opts).unwrap();
        opts.exec = Exec::Parallel;
        let b = log_kernel_functional(&d, &lap, PI, &opts).unwrap();
        let bits = |r: &KernelFunctionalResult| -> Vec<u64> {
            r.per_point_values.as_ref().unwrap().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let max = a.per_point_values.as_ref().unwrap().iter().cloned().fold(0.0, f64::max);
        assert_eq!(max, a.max_value);
    }

    #[test]
    fn rejects_non_interior_evaluation_cell() {
        let d = disk(0.05);
        let z = ScalarField::zeros(d.clone());
        let b = d.boundary_cells()[0];
        assert!(log_kernel_functional(&d, &z, PI, &KernelOptions::at_cells(vec![b])).is_err());
    }

    #[test]
    fn lemma_examples() {
        let c = lemma_bound_check(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((c.lhs - 0.219_383_934_395_520_3).abs() < 1e-12);
        assert!((c.rhs - (-1f64).exp()).abs() < 1e-15);
        assert!((c.ratio - 0.596_347).abs() < 1e-5, "{}", c.ratio);

        let c = lemma_bound_check(1.0, 1e-2, 1.0, 1.0).unwrap();
        assert!((c.a - 1e-4).abs() < 1e-18);
        assert!((c.lhs - 8.633).abs() < 1e-3, "{}", c.lhs);
        assert!((c.rhs - 10.21).abs() < 1e-2, "{}", c.rhs);
        assert!(c.ratio < 1.0);

        let c = lemma_bound_check(0.01, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.a, 100.0);
        assert!(c.ratio <= 1.0);
        // c1 scales the left side only
        let c3 = lemma_bound_check(1.0, 1.0, 3.0, 1.0).unwrap();
        assert!((c3.lhs - 3.0 * 0.219_383_934_395_520_3).abs() < 1e-12);
        assert!(lemma_bound_check(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn heat_kernel_integrals() {
        let v = heat_kernel_time_integral(1.0, f64::INFINITY, 3).unwrap();
        assert!((v - 0.079_577_471_545_947_67).abs() < 1e-15);
        let v = heat_kernel_time_integral(1.0, 0.25, 2).unwrap();
        assert!((v - 0.219_383_934_395_520_3 / (4.0 * PI)).abs() < 1e-14);
        assert!(heat_kernel_time_integral(1.0, 1e-4, 2).unwrap() < 1e-200);
        assert!(heat_kernel_time_integral(1.0, f64::INFINITY, 2).is_err());
        // finite-time 3D integral increases to the Newtonian potential
        let a = heat_kernel_time_integral(1.0, 10.0, 3).unwrap();
        let b = heat_kernel_time_integral(1.0, 1000.0, 3).unwrap();
        assert!(a < b && b < 1.0 / (4.0 * PI));
    }

    #[test]
    fn kernel_domination_is_bounded() {
        let measure = PI;
        let mut worst = 0.0f64;
        for k in -60..=10 {
            let r = 10f64.powf(k as f64 / 10.0);
            worst = worst.max(kernel_domination_ratio(r, measure).unwrap());
        }
        assert!(worst.is_finite() && worst < 1.0, "{worst}");
    }

    #[test]
    fn lemma_csv() {
        let rows = lemma_sweep(&[1.0]).unwrap();
        let mut buf = Vec::new();
        write_lemma_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("a,lhs,rhs,ratio\n1,"));
    }
}
