//! Scalar fields on grid domains, closed-form test functions, the discrete
//! Laplacian, and extrema.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridDomain, Point, Slot};

/// Closed-form test functions carrying both `u` and `Δu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// `1 - |x - center|^2`.
    Paraboloid {
        center: Point,
    },
    /// `prod_a sin(pi x_a)` over the active coordinates.
    SinProduct,
    /// `gradient . x + offset`.
    Affine {
        gradient: Point,
        offset: f64,
    },
    /// `(x - cx)^2 - (y - cy)^2`, harmonic in every dimension.
    HarmonicQuadratic {
        center: Point,
    },
    /// `amplitude (1 - |x - center|^2 / radius^2)^3` inside the ball, zero
    /// outside; C² across the support boundary.
    Bump {
        center: Point,
        radius: f64,
        amplitude: f64,
    },
    /// Planar logarithmic family: `1/2 - ln ε - r^2 / (2 ε^2)` for `r ≤ ε`,
    /// `-ln r` beyond, with `r = |x - center|`. Only C¹ across `r = ε`.
    Sharpness {
        epsilon: f64,
        center: Point,
    },
    Scaled {
        factor: f64,
        inner: Box<TestFunction>,
    },
    Sum {
        terms: Vec<TestFunction>,
    },
}

fn dist2(x: &Point, c: &Point, dim: usize) -> f64 {
    (0..dim).map(|a| (x[a] - c[a]).powi(2)).sum()
}

impl TestFunction {
    /// The logarithmic family centered at the origin.
    pub fn sharpness(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::param(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(TestFunction::Sharpness {
            epsilon,
            center: [0.0; 3],
        })
    }

    pub fn scaled(self, factor: f64) -> Self {
        TestFunction::Scaled {
            factor,
            inner: Box::new(self),
        }
    }

    pub fn supports_dimension(&self, dim: usize) -> bool {
        match self {
            TestFunction::Sharpness { .. } => dim == 2,
            TestFunction::Scaled { inner, .. } => inner.supports_dimension(dim),
            TestFunction::Sum { terms } => terms.iter().all(|t| t.supports_dimension(dim)),
            _ => dim == 2 || dim == 3,
        }
    }

    pub fn u(&self, x: &Point, dim: usize) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Paraboloid { center } => 1.0 - dist2(x, center, dim),
            TestFunction::SinProduct => (0..dim).map(|a| (PI * x[a]).sin()).product(),
            TestFunction::Affine { gradient, offset } => {
                offset + (0..dim).map(|a| gradient[a] * x[a]).sum::<f64>()
            }
            TestFunction::HarmonicQuadratic { center } => {
                (x[0] - center[0]).powi(2) - (x[1] - center[1]).powi(2)
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let s = dist2(x, center, dim) / (radius * radius);
                if s < 1.0 {
                    amplitude * (1.0 - s).powi(3)
                } else {
                    0.0
                }
            }
            TestFunction::Sharpness { epsilon, center } => {
                let r2 = dist2(x, center, 2);
                if r2 <= epsilon * epsilon {
                    0.5 - epsilon.ln() - 0.5 * r2 / (epsilon * epsilon)
                } else {
                    -0.5 * r2.ln()
                }
            }
            TestFunction::Scaled { factor, inner } => factor * inner.u(x, dim),
            TestFunction::Sum { terms } => terms.iter().map(|t| t.u(x, dim)).sum(),
        }
    }

    pub fn lap_u(&self, x: &Point, dim: usize) -> f64 {
        let n = dim as f64;
        match self {
            TestFunction::Constant { .. } | TestFunction::Affine { .. } => 0.0,
            TestFunction::HarmonicQuadratic { .. } => 0.0,
            TestFunction::Paraboloid { .. } => -2.0 * n,
            TestFunction::SinProduct => -n * PI * PI * self.u(x, dim),
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => {
                let rho2 = radius * radius;
                let s = dist2(x, center, dim) / rho2;
                if s < 1.0 {
                    amplitude * (1.0 - s) / rho2 * (24.0 * s - 6.0 * n * (1.0 - s))
                } else {
                    0.0
                }
            }
            TestFunction::Sharpness { epsilon, center } => {
                if dist2(x, center, 2) < epsilon * epsilon {
                    -2.0 / (epsilon * epsilon)
                } else {
                    0.0
                }
            }
            TestFunction::Scaled { factor, inner } => factor * inner.lap_u(x, dim),
            TestFunction::Sum { terms } => terms.iter().map(|t| t.lap_u(x, dim)).sum(),
        }
    }

    /// Mean of `Δu` over the cell of side `h` centered at `x`. The closed
    /// forms are smooth except for the sharpness family, whose jump across
    /// `r = ε` is resolved on a `CELL_SUBGRID^n` midpoint subgrid when the
    /// cell straddles it; elsewhere the center value is used.
    pub fn lap_cell_average(&self, x: &Point, h: f64, dim: usize) -> f64 {
        match self {
            TestFunction::Sharpness { epsilon, center } => {
                let r = dist2(x, center, dim).sqrt();
                let half_diag = 0.5 * h * (dim as f64).sqrt();
                if (r - epsilon).abs() < half_diag {
                    subgrid_mean(x, h, dim, |p| self.lap_u(p, dim))
                } else {
                    self.lap_u(x, dim)
                }
            }
            TestFunction::Scaled { factor, inner } => factor * inner.lap_cell_average(x, h, dim),
            TestFunction::Sum { terms } => terms
                .iter()
                .map(|t| t.lap_cell_average(x, h, dim))
                .sum(),
            _ => self.lap_u(x, dim),
        }
    }
}

pub const CELL_SUBGRID: usize = 32;

fn subgrid_mean(x: &Point, h: f64, dim: usize, f: impl Fn(&Point) -> f64) -> f64 {
    let n = CELL_SUBGRID;
    let step = h / n as f64;
    let offset = |k: usize| -0.5 * h + (k as f64 + 0.5) * step;
    let nz = if dim == 3 { n } else { 1 };
    let mut acc = 0.0;
    for k in 0..nz {
        for j in 0..n {
            for i in 0..n {
                let mut p = *x;
                p[0] += offset(i);
                p[1] += offset(j);
                if dim == 3 {
                    p[2] += offset(k);
                }
                acc += f(&p);
            }
        }
    }
    acc / (n * n * nz) as f64
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Constant { value } => write!(f, "constant({value})"),
            TestFunction::Paraboloid { center } => write!(f, "paraboloid(center={center:?})"),
            TestFunction::SinProduct => write!(f, "sin_product"),
            TestFunction::Affine { gradient, offset } => {
                write!(f, "affine(gradient={gradient:?}, offset={offset})")
            }
            TestFunction::HarmonicQuadratic { center } => {
                write!(f, "harmonic_quadratic(center={center:?})")
            }
            TestFunction::Bump {
                center,
                radius,
                amplitude,
            } => write!(f, "bump(center={center:?}, radius={radius}, amplitude={amplitude})"),
            TestFunction::Sharpness { epsilon, center } => {
                write!(f, "u_eps(epsilon={epsilon}, center={center:?})")
            }
            TestFunction::Scaled { factor, inner } => write!(f, "{factor}*{inner}"),
            TestFunction::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
                write!(f, "{}", parts.join(" + "))
            }
        }
    }
}

/// Real values on the interior and boundary cells of a domain, index-aligned
/// with [`GridDomain::interior_cells`] and [`GridDomain::boundary_cells`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    interior: Vec<f64>,
    boundary: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, interior: Vec<f64>, boundary: Vec<f64>) -> Result<Self> {
        if interior.len() != domain.interior_cells().len()
            || boundary.len() != domain.boundary_cells().len()
        {
            return Err(Error::param(format!(
                "field arrays ({}, {}) do not match the domain ({}, {})",
                interior.len(),
                boundary.len(),
                domain.interior_cells().len(),
                domain.boundary_cells().len()
            )));
        }
        let field = ScalarField {
            domain,
            interior,
            boundary,
        };
        field.check_finite("field")?;
        Ok(field)
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let interior = vec![0.0; domain.interior_cells().len()];
        let boundary = vec![0.0; domain.boundary_cells().len()];
        ScalarField {
            domain,
            interior,
            boundary,
        }
    }

    /// Pointwise evaluation at interior and boundary cell centers.
    pub fn from_fn(
        domain: Arc<GridDomain>,
        name: &str,
        f: impl Fn(&Point) -> f64,
    ) -> Result<Self> {
        let eval = |cells: &[usize]| -> Result<Vec<f64>> {
            cells
                .iter()
                .map(|&idx| {
                    let p = domain.center(idx);
                    let v = f(&p);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::NonFinite {
                            function: name.to_string(),
                            index: domain.multi_index(idx),
                            point: p,
                            value: v,
                        })
                    }
                })
                .collect()
        };
        let interior = eval(domain.interior_cells())?;
        let boundary = eval(domain.boundary_cells())?;
        Ok(ScalarField {
            domain,
            interior,
            boundary,
        })
    }

    fn check_finite(&self, name: &str) -> Result<()> {
        let cells = self
            .domain
            .interior_cells()
            .iter()
            .zip(&self.interior)
            .chain(self.domain.boundary_cells().iter().zip(&self.boundary));
        for (&idx, &v) in cells {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    function: name.to_string(),
                    index: self.domain.multi_index(idx),
                    point: self.domain.center(idx),
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn boundary(&self) -> &[f64] {
        &self.boundary
    }

    pub fn interior_mut(&mut self) -> &mut [f64] {
        &mut self.interior
    }

    pub fn boundary_mut(&mut self) -> &mut [f64] {
        &mut self.boundary
    }

    /// Value at a grid cell; exterior cells read as zero.
    pub fn value_at(&self, idx: usize) -> f64 {
        match self.domain.slot(idx) {
            Slot::Interior(s) => self.interior[s],
            Slot::Boundary(s) => self.boundary[s],
            Slot::Exterior => 0.0,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            domain: self.domain.clone(),
            interior: self.interior.iter().map(|&v| f(v)).collect(),
            boundary: self.boundary.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    /// `alpha * self + beta * other` on the same domain.
    pub fn combine(&self, alpha: f64, other: &ScalarField, beta: f64) -> Result<Self> {
        if !Arc::ptr_eq(&self.domain, &other.domain) {
            return Err(Error::param("fields live on different domains"));
        }
        let lin = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect();
        Ok(ScalarField {
            domain: self.domain.clone(),
            interior: lin(&self.interior, &other.interior),
            boundary: lin(&self.boundary, &other.boundary),
        })
    }

    /// Writes `ix, iy[, iz], x, y[, z], class, value` rows for interior and
    /// boundary cells in grid order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let dim = self.domain.dimension();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["ix", "iy"];
        if dim == 3 {
            header.push("iz");
        }
        header.extend(["x", "y"]);
        if dim == 3 {
            header.push("z");
        }
        header.extend(["class", "value"]);
        w.write_record(&header)?;
        let mut cells: Vec<usize> = self
            .domain
            .interior_cells()
            .iter()
            .chain(self.domain.boundary_cells())
            .copied()
            .collect();
        cells.sort_unstable();
        for idx in cells {
            let m = self.domain.multi_index(idx);
            let p = self.domain.center(idx);
            let mut row: Vec<String> = (0..dim).map(|a| m[a].to_string()).collect();
            row.extend((0..dim).map(|a| p[a].to_string()));
            row.push(self.domain.class(idx).as_str().to_string());
            row.push(self.value_at(idx).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples `u` and the closed-form `Δu` at cell centers.
pub fn sample(domain: &Arc<GridDomain>, f: &TestFunction) -> Result<(ScalarField, ScalarField)> {
    let dim = domain.dimension();
    if !f.supports_dimension(dim) {
        return Err(Error::param(format!("{f} is not defined in dimension {dim}")));
    }
    let name = f.to_string();
    let u = ScalarField::from_fn(domain.clone(), &name, |p| f.u(p, dim))?;
    let lap = ScalarField::from_fn(domain.clone(), &format!("laplacian of {name}"), |p| {
        f.lap_u(p, dim)
    })?;
    Ok((u, lap))
}

/// Cell averages of the closed-form `Δu` (see
/// [`TestFunction::lap_cell_average`]).
pub fn sample_laplacian_cell_average(domain: &Arc<GridDomain>, f: &TestFunction) -> Result<ScalarField> {
    let dim = domain.dimension();
    if !f.supports_dimension(dim) {
        return Err(Error::param(format!("{f} is not defined in dimension {dim}")));
    }
    let h = domain.h();
    ScalarField::from_fn(domain.clone(), &format!("laplacian of {f}"), |p| {
        f.lap_cell_average(p, h, dim)
    })
}

/// `2n+1`-point Laplacian on interior cells; boundary entries are zero.
pub fn discrete_laplacian(u: &ScalarField) -> ScalarField {
    let domain = u.domain();
    let offsets = domain.neighbor_offsets();
    let inv_h2 = 1.0 / (domain.h() * domain.h());
    let center_weight = offsets.len() as f64;
    let interior = domain
        .interior_cells()
        .iter()
        .zip(u.interior())
        .map(|(&idx, &c)| {
            let nb: f64 = offsets
                .iter()
                .map(|&o| u.value_at((idx as isize + o) as usize))
                .sum();
            (nb - center_weight * c) * inv_h2
        })
        .collect();
    ScalarField {
        domain: domain.clone(),
        interior,
        boundary: vec![0.0; domain.boundary_cells().len()],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub sup_interior: f64,
    pub sup_boundary: f64,
    pub argmax: Point,
    /// Linear grid index of the interior argmax.
    pub argmax_index: usize,
}

/// Sup of `|u|` over interior and boundary cells, with the interior argmax
/// (first cell in grid order on ties).
pub fn extrema(u: &ScalarField) -> Extrema {
    let domain = u.domain();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (s, v) in u.interior().iter().enumerate() {
        if v.abs() > best.1 {
            best = (s, v.abs());
        }
    }
    let sup_boundary = u.boundary().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let argmax_index = domain.interior_cells()[best.0];
    Extrema {
        sup_interior: best.1,
        sup_boundary,
        argmax: domain.center(argmax_index),
        argmax_index,
    }
}

/// Interior cells holding the `k` largest values of `|u|`, in descending
/// order (grid order on ties).
pub fn top_k_cells(u: &ScalarField, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..u.interior().len()).collect();
    order.sort_by(|&a, &b| {
        u.interior()[b]
            .abs()
            .total_cmp(&u.interior()[a].abs())
            .then(a.cmp(&b))
    });
    order
        .into_iter()
        .take(k)
        .map(|s| u.domain().interior_cells()[s])
        .collect()
}
