//! Grid discretizations of planar and spatial test domains.
//!
//! A [`GridDomain`] is a padded axis-aligned lattice of cell centers. Each
//! cell is classified by whether its center lies in the open shape
//! (interior), and if not, whether one of its `2n` axis neighbors is interior
//! (boundary). Everything else is exterior.
//!
//! Round shapes put a lattice point on their center; box-like shapes align
//! cell faces with their corner so that cell counts reproduce the exact area
//! when `h` divides the side lengths.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in R^3; planar domains keep `z = 0`.
pub type Point = [f64; 3];

/// Minimum number of interior cells spanned along each axis.
pub const MIN_CELLS_PER_AXIS: usize = 10;

const PAD: i64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Rectangle {
        corner: [f64; 2],
        widths: [f64; 2],
    },
    Annulus {
        center: [f64; 2],
        r_in: f64,
        r_out: f64,
    },
    /// Square of side `side` at `corner` with its upper-right quadrant removed.
    LShape {
        #[serde(default)]
        corner: [f64; 2],
        #[serde(default = "unit_side")]
        side: f64,
    },
    Ball3d {
        center: [f64; 3],
        radius: f64,
    },
    Box3d {
        corner: [f64; 3],
        widths: [f64; 3],
    },
}

fn unit_side() -> f64 {
    1.0
}

impl Shape {
    pub fn unit_disk() -> Self {
        Shape::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn unit_square() -> Self {
        Shape::Rectangle {
            corner: [0.0, 0.0],
            widths: [1.0, 1.0],
        }
    }

    pub fn thin_rectangle() -> Self {
        Shape::Rectangle {
            corner: [0.0, 0.0],
            widths: [10.0, 0.5],
        }
    }

    pub fn default_annulus() -> Self {
        Shape::Annulus {
            center: [0.0, 0.0],
            r_in: 0.5,
            r_out: 1.0,
        }
    }

    pub fn default_l_shape() -> Self {
        Shape::LShape {
            corner: [0.0, 0.0],
            side: 1.0,
        }
    }

    pub fn unit_ball() -> Self {
        Shape::Ball3d {
            center: [0.0; 3],
            radius: 1.0,
        }
    }

    pub fn unit_cube() -> Self {
        Shape::Box3d {
            corner: [0.0; 3],
            widths: [1.0; 3],
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Shape::Ball3d { .. } | Shape::Box3d { .. } => 3,
            _ => 2,
        }
    }

    pub fn is_simply_connected(&self) -> bool {
        !matches!(self, Shape::Annulus { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Shape::Disk { center, radius } => finite(center) && radius.is_finite() && *radius > 0.0,
            Shape::Rectangle { corner, widths } => {
                finite(corner) && finite(widths) && widths.iter().all(|w| *w > 0.0)
            }
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => finite(center) && r_in.is_finite() && *r_in >= 0.0 && r_out > r_in && r_out.is_finite(),
            Shape::LShape { corner, side } => finite(corner) && side.is_finite() && *side > 0.0,
            Shape::Ball3d { center, radius } => finite(center) && radius.is_finite() && *radius > 0.0,
            Shape::Box3d { corner, widths } => {
                finite(corner) && finite(widths) && widths.iter().all(|w| *w > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShape(self.to_string()))
        }
    }

    /// Membership in the open shape.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Shape::Disk { center, radius } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                dx * dx + dy * dy < radius * radius
            }
            Shape::Rectangle { corner, widths } => (0..2).all(|a| {
                p[a] > corner[a] && p[a] < corner[a] + widths[a]
            }),
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let r2 = dx * dx + dy * dy;
                r2 > r_in * r_in && r2 < r_out * r_out
            }
            Shape::LShape { corner, side } => {
                let (x, y) = (p[0] - corner[0], p[1] - corner[1]);
                let half = 0.5 * side;
                x > 0.0 && x < *side && y > 0.0 && y < *side && !(x >= half && y >= half)
            }
            Shape::Ball3d { center, radius } => {
                let r2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
                r2 < radius * radius
            }
            Shape::Box3d { corner, widths } => (0..3).all(|a| {
                p[a] > corner[a] && p[a] < corner[a] + widths[a]
            }),
        }
    }

    /// Lebesgue measure of the analytic shape.
    pub fn measure(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => PI * radius * radius,
            Shape::Rectangle { widths, .. } => widths[0] * widths[1],
            Shape::Annulus { r_in, r_out, .. } => PI * (r_out * r_out - r_in * r_in),
            Shape::LShape { side, .. } => 0.75 * side * side,
            Shape::Ball3d { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Shape::Box3d { widths, .. } => widths.iter().product(),
        }
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Shape::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius, 0.0],
                [center[0] + radius, center[1] + radius, 0.0],
            ),
            Shape::Annulus { center, r_out, .. } => (
                [center[0] - r_out, center[1] - r_out, 0.0],
                [center[0] + r_out, center[1] + r_out, 0.0],
            ),
            Shape::Rectangle { corner, widths } => (
                [corner[0], corner[1], 0.0],
                [corner[0] + widths[0], corner[1] + widths[1], 0.0],
            ),
            Shape::LShape { corner, side } => (
                [corner[0], corner[1], 0.0],
                [corner[0] + side, corner[1] + side, 0.0],
            ),
            Shape::Ball3d { center, radius } => (
                [center[0] - radius, center[1] - radius, center[2] - radius],
                [center[0] + radius, center[1] + radius, center[2] + radius],
            ),
            Shape::Box3d { corner, widths } => (
                *corner,
                [corner[0] + widths[0], corner[1] + widths[1], corner[2] + widths[2]],
            ),
        }
    }

    /// A representative interior point: the center for round and box shapes,
    /// the middle of the ring for the annulus, the center of the lower-left
    /// quadrant for the L-shape.
    pub fn reference_point(&self) -> Point {
        match self {
            Shape::Disk { center, .. } => [center[0], center[1], 0.0],
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => [center[0] + 0.5 * (r_in + r_out), center[1], 0.0],
            Shape::Rectangle { corner, widths } => {
                [corner[0] + 0.5 * widths[0], corner[1] + 0.5 * widths[1], 0.0]
            }
            Shape::LShape { corner, side } => [corner[0] + 0.25 * side, corner[1] + 0.25 * side, 0.0],
            Shape::Ball3d { center, .. } => *center,
            Shape::Box3d { corner, widths } => [
                corner[0] + 0.5 * widths[0],
                corner[1] + 0.5 * widths[1],
                corner[2] + 0.5 * widths[2],
            ],
        }
    }

    /// Lattice anchor and fractional offset: cell centers sit at
    /// `anchor + (k + offset) h`.
    fn lattice_anchor(&self) -> (Point, f64) {
        match self {
            Shape::Disk { center, .. } | Shape::Annulus { center, .. } => {
                ([center[0], center[1], 0.0], 0.0)
            }
            Shape::Ball3d { center, .. } => (*center, 0.0),
            Shape::Rectangle { corner, .. } | Shape::LShape { corner, .. } => {
                ([corner[0], corner[1], 0.0], 0.5)
            }
            Shape::Box3d { corner, .. } => (*corner, 0.5),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Disk { center, radius } => write!(f, "disk(center={center:?}, radius={radius})"),
            Shape::Rectangle { corner, widths } => {
                write!(f, "rectangle(corner={corner:?}, widths={widths:?})")
            }
            Shape::Annulus {
                center,
                r_in,
                r_out,
            } => write!(f, "annulus(center={center:?}, r_in={r_in}, r_out={r_out})"),
            Shape::LShape { corner, side } => write!(f, "l_shape(corner={corner:?}, side={side})"),
            Shape::Ball3d { center, radius } => {
                write!(f, "ball3d(center={center:?}, radius={radius})")
            }
            Shape::Box3d { corner, widths } => write!(f, "box3d(corner={corner:?}, widths={widths:?})"),
        }
    }
}

/// Shape descriptor plus grid spacing, as read from JSON:
/// `{"shape": "disk", "center": [0,0], "radius": 1.0, "h": 0.01}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub h: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape, h: f64) -> Self {
        DomainSpec { shape, h }
    }

    pub fn build(&self) -> Result<GridDomain> {
        build_domain(&self.shape, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellClass {
    Interior,
    Boundary,
    Exterior,
}

impl CellClass {
    pub fn as_str(self) -> &'static str {
        match self {
            CellClass::Interior => "interior",
            CellClass::Boundary => "boundary",
            CellClass::Exterior => "exterior",
        }
    }
}

/// Position of a grid cell in the interior or boundary value arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Interior(usize),
    Boundary(usize),
    Exterior,
}

const NO_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct GridDomain {
    shape: Shape,
    dimension: usize,
    h: f64,
    /// Center of cell `(0, 0, 0)`.
    origin: Point,
    dims: [usize; 3],
    class: Vec<CellClass>,
    slot: Vec<u32>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
}

/// Discretizes `shape` with spacing `h`.
pub fn build_domain(shape: &Shape, h: f64) -> Result<GridDomain> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidSpacing(h));
    }
    shape.validate()?;
    let dimension = shape.dimension();
    let (lo, hi) = shape.bounding_box();
    let (anchor, offset) = shape.lattice_anchor();

    let mut origin = [0.0; 3];
    let mut dims = [1usize; 3];
    for a in 0..dimension {
        let kmin = ((lo[a] - anchor[a]) / h - offset).floor() as i64 - PAD;
        let kmax = ((hi[a] - anchor[a]) / h - offset).ceil() as i64 + PAD;
        origin[a] = anchor[a] + (kmin as f64 + offset) * h;
        dims[a] = (kmax - kmin + 1) as usize;
    }
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let total = match total {
        Some(t) if t < NO_SLOT as usize => t,
        _ => {
            return Err(Error::param(format!(
                "grid for {shape} at h = {h} has too many cells ({dims:?})"
            )))
        }
    };

    let mut class = vec![CellClass::Exterior; total];
    let center_of = |idx: usize| -> Point {
        let i = idx % dims[0];
        let j = (idx / dims[0]) % dims[1];
        let k = idx / (dims[0] * dims[1]);
        [
            origin[0] + i as f64 * h,
            origin[1] + j as f64 * h,
            if dimension == 3 { origin[2] + k as f64 * h } else { 0.0 },
        ]
    };
    for (idx, c) in class.iter_mut().enumerate() {
        if shape.contains(&center_of(idx)) {
            *c = CellClass::Interior;
        }
    }

    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut interior = Vec::new();
    for (idx, c) in class.iter().enumerate() {
        if *c == CellClass::Interior {
            interior.push(idx);
        }
    }
    if interior.is_empty() {
        return Err(Error::EmptyInterior {
            shape: shape.to_string(),
            h,
        });
    }
    for &idx in &interior {
        for a in 0..dimension {
            for nb in [idx - strides[a], idx + strides[a]] {
                if class[nb] == CellClass::Exterior {
                    class[nb] = CellClass::Boundary;
                }
            }
        }
    }
    let boundary: Vec<usize> = (0..total)
        .filter(|&i| class[i] == CellClass::Boundary)
        .collect();

    let mut slot = vec![NO_SLOT; total];
    for (s, &idx) in interior.iter().enumerate() {
        slot[idx] = s as u32;
    }
    for (s, &idx) in boundary.iter().enumerate() {
        slot[idx] = s as u32;
    }

    let domain = GridDomain {
        shape: shape.clone(),
        dimension,
        h,
        origin,
        dims,
        class,
        slot,
        interior,
        boundary,
    };
    for axis in 0..dimension {
        let (mut lo_i, mut hi_i) = (usize::MAX, 0);
        for &idx in &domain.interior {
            let m = domain.multi_index(idx)[axis];
            lo_i = lo_i.min(m);
            hi_i = hi_i.max(m);
        }
        let cells = hi_i - lo_i + 1;
        if cells < MIN_CELLS_PER_AXIS {
            return Err(Error::TooCoarse {
                shape: shape.to_string(),
                h,
                axis,
                cells,
                min: MIN_CELLS_PER_AXIS,
            });
        }
    }
    Ok(domain)
}

impl GridDomain {
    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn spec(&self) -> DomainSpec {
        DomainSpec::new(self.shape.clone(), self.h)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_cells(&self) -> usize {
        self.class.len()
    }

    /// Volume of one cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dimension as i32)
    }

    /// Linear indices of interior cells, ascending.
    pub fn interior_cells(&self) -> &[usize] {
        &self.interior
    }

    /// Linear indices of boundary cells, ascending.
    pub fn boundary_cells(&self) -> &[usize] {
        &self.boundary
    }

    pub fn class(&self, idx: usize) -> CellClass {
        self.class[idx]
    }

    pub fn slot(&self, idx: usize) -> Slot {
        let s = self.slot[idx];
        match self.class[idx] {
            CellClass::Interior => Slot::Interior(s as usize),
            CellClass::Boundary => Slot::Boundary(s as usize),
            CellClass::Exterior => Slot::Exterior,
        }
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn linear_index(&self, m: [usize; 3]) -> usize {
        m[0] + self.dims[0] * (m[1] + self.dims[1] * m[2])
    }

    pub fn center(&self, idx: usize) -> Point {
        let m = self.multi_index(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dimension {
            p[a] = self.origin[a] + m[a] as f64 * self.h;
        }
        p
    }

    /// Offsets of the `2n` axis neighbors in linear index space.
    pub fn neighbor_offsets(&self) -> Vec<isize> {
        let strides = [1isize, self.dims[0] as isize, (self.dims[0] * self.dims[1]) as isize];
        (0..self.dimension)
            .flat_map(|a| [-strides[a], strides[a]])
            .collect()
    }

    /// Cell whose center is nearest to `p`, if `p` lies within the grid.
    pub fn locate(&self, p: &Point) -> Option<usize> {
        let mut m = [0usize; 3];
        for a in 0..self.dimension {
            let k = ((p[a] - self.origin[a]) / self.h).round();
            if !(k >= 0.0 && k < self.dims[a] as f64) {
                return None;
            }
            m[a] = k as usize;
        }
        Some(self.linear_index(m))
    }

    /// Grid-mask membership: `p` falls in an interior cell.
    pub fn contains_point(&self, p: &Point) -> bool {
        self.locate(p)
            .is_some_and(|idx| self.class[idx] == CellClass::Interior)
    }

    /// `|Omega|` as (interior cell count) x `h^n`.
    pub fn measure(&self) -> f64 {
        self.interior.len() as f64 * self.cell_volume()
    }

    /// Largest Euclidean distance from an interior cell center to the nearest
    /// non-interior cell center, via an exact separable distance transform.
    pub fn inradius(&self) -> f64 {
        let sq = self.squared_distance_transform();
        let max_sq = self
            .interior
            .iter()
            .map(|&i| sq[i])
            .fold(0.0f64, f64::max);
        max_sq.sqrt() * self.h
    }

    /// Squared distance (in cell units) from every cell to the nearest
    /// non-interior cell center.
    pub fn squared_distance_transform(&self) -> Vec<f64> {
        const FAR: f64 = 1e30;
        let mut d: Vec<f64> = self
            .class
            .iter()
            .map(|c| if *c == CellClass::Interior { FAR } else { 0.0 })
            .collect();
        let strides = [1, self.dims[0], self.dims[0] * self.dims[1]];
        let mut line = Vec::new();
        let mut out = Vec::new();
        let mut scratch = EnvelopeScratch::default();
        for axis in 0..self.dimension {
            let len = self.dims[axis];
            let stride = strides[axis];
            for start in 0..d.len() {
                if self.multi_index(start)[axis] != 0 {
                    continue;
                }
                line.clear();
                line.extend((0..len).map(|k| d[start + k * stride]));
                out.resize(len, 0.0);
                lower_envelope_1d(&line, &mut out, &mut scratch);
                for k in 0..len {
                    d[start + k * stride] = out[k];
                }
            }
        }
        d
    }

    /// Largest distance between two interior cell centers.
    ///
    /// Only the first and last interior cell of every grid line along x can
    /// be convex-hull vertices, so pairs are drawn from those; in 2D the
    /// candidates are further reduced to their convex hull.
    pub fn diameter(&self) -> f64 {
        let mut candidates: Vec<[i64; 3]> = Vec::new();
        let nx = self.dims[0];
        for row_start in (0..self.class.len()).step_by(nx) {
            let row = &self.class[row_start..row_start + nx];
            let first = row.iter().position(|c| *c == CellClass::Interior);
            let last = row.iter().rposition(|c| *c == CellClass::Interior);
            if let (Some(a), Some(b)) = (first, last) {
                for i in if a == b { vec![a] } else { vec![a, b] } {
                    let m = self.multi_index(row_start + i);
                    candidates.push([m[0] as i64, m[1] as i64, m[2] as i64]);
                }
            }
        }
        if self.dimension == 2 {
            candidates = convex_hull_2d(candidates);
        }
        let mut best = 0i64;
        for (i, a) in candidates.iter().enumerate() {
            for b in &candidates[i + 1..] {
                let d2 = (0..3).map(|k| (a[k] - b[k]).pow(2)).sum::<i64>();
                best = best.max(d2);
            }
        }
        (best as f64).sqrt() * self.h
    }
}

#[derive(Default)]
struct EnvelopeScratch {
    v: Vec<usize>,
    z: Vec<f64>,
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn lower_envelope_1d(f: &[f64], out: &mut [f64], s: &mut EnvelopeScratch) {
    let n = f.len();
    s.v.clear();
    s.z.clear();
    s.v.resize(n, 0);
    s.z.resize(n + 1, 0.0);
    let mut k = 0usize;
    s.v[0] = 0;
    s.z[0] = f64::NEG_INFINITY;
    s.z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| -> f64 {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for q in 1..n {
        let mut x = inter(q, s.v[k]);
        while x <= s.z[k] {
            k -= 1;
            x = inter(q, s.v[k]);
        }
        k += 1;
        s.v[k] = q;
        s.z[k] = x;
        s.z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while s.z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - s.v[k] as f64;
        *o = d * d + f[s.v[k]];
    }
}

fn convex_hull_2d(mut pts: Vec<[i64; 3]>) -> Vec<[i64; 3]> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[i64; 3], a: &[i64; 3], b: &[i64; 3]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[i64; 3]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[i64; 3]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dom(shape: Shape, h: f64) -> GridDomain {
        build_domain(&shape, h).unwrap()
    }

    #[test]
    fn disk_measure() {
        let d = dom(Shape::unit_disk(), 0.01);
        assert!((d.measure() - PI).abs() < 0.05, "{}", d.measure());
    }

    #[test]
    fn thin_rectangle_measure_and_inradius() {
        let d = dom(Shape::thin_rectangle(), 0.01);
        assert!((d.measure() - 5.0).abs() < 0.05, "{}", d.measure());
        assert!((d.inradius() - 0.25).abs() <= 0.01, "{}", d.inradius());
        let diam = d.diameter();
        assert!((diam - 100.25f64.sqrt()).abs() <= 0.02, "{diam}");
    }

    #[test]
    fn annulus_measure_and_inradius() {
        let d = dom(Shape::default_annulus(), 0.005);
        assert!((d.measure() - 0.75 * PI).abs() < 0.05, "{}", d.measure());
        assert!((d.inradius() - 0.25).abs() <= 0.005, "{}", d.inradius());
    }

    #[test]
    fn disk_inradius_and_diameter() {
        let h = 0.02;
        let d = dom(Shape::unit_disk(), h);
        assert!((d.inradius() - 1.0).abs() <= h, "{}", d.inradius());
        assert!((d.diameter() - 2.0).abs() <= 2.0 * h, "{}", d.diameter());
    }

    #[test]
    fn unit_square_diameter_and_measure() {
        let h = 1.0 / 64.0;
        let d = dom(Shape::unit_square(), h);
        assert!((d.diameter() - 2f64.sqrt()).abs() <= 2.0 * h);
        assert!((d.measure() - 1.0).abs() <= 4.0 * h);
        // cell faces align with the square, so the count is exact
        assert_eq!(d.interior_cells().len(), 64 * 64);
    }

    #[test]
    fn disk_center_is_a_cell_center() {
        let d = dom(Shape::unit_disk(), 0.01);
        let idx = d.locate(&[0.0, 0.0, 0.0]).unwrap();
        let c = d.center(idx);
        assert!(c[0].abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn l_shape_inradius() {
        // largest inscribed disk touches both walls and the reentrant corner
        let expected = 0.5 * 2f64.sqrt() / (1.0 + 2f64.sqrt());
        let h = 1.0 / 128.0;
        let d = dom(Shape::default_l_shape(), h);
        assert!((d.inradius() - expected).abs() <= h, "{}", d.inradius());
        assert!((d.measure() - 0.75).abs() < 4.0 * h);
    }

    #[test]
    fn ball_measure() {
        let d = dom(Shape::unit_ball(), 1.0 / 32.0);
        assert!((d.measure() - 4.0 * PI / 3.0).abs() < 0.02, "{}", d.measure());
        assert!((d.inradius() - 1.0).abs() <= 1.0 / 32.0);
        assert!((d.diameter() - 2.0).abs() <= 2.0 / 32.0);
    }

    #[test]
    fn rejects_bad_spacing_and_empty_shapes() {
        assert!(matches!(
            build_domain(&Shape::unit_disk(), 0.0),
            Err(Error::InvalidSpacing(_))
        ));
        assert!(matches!(
            build_domain(&Shape::unit_disk(), -1.0),
            Err(Error::InvalidSpacing(_))
        ));
        let tiny = Shape::Rectangle {
            corner: [0.01, 0.01],
            widths: [0.02, 0.02],
        };
        assert!(matches!(
            build_domain(&tiny, 0.1),
            Err(Error::EmptyInterior { .. })
        ));
        assert!(matches!(
            build_domain(&Shape::unit_disk(), 0.5),
            Err(Error::TooCoarse { .. })
        ));
        let bad = Shape::Annulus {
            center: [0.0, 0.0],
            r_in: 1.0,
            r_out: 0.5,
        };
        assert!(matches!(build_domain(&bad, 0.01), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn classification_invariants() {
        for shape in [
            Shape::unit_disk(),
            Shape::default_annulus(),
            Shape::default_l_shape(),
        ] {
            let d = dom(shape, 0.03);
            let offs = d.neighbor_offsets();
            for &i in d.interior_cells() {
                for &o in &offs {
                    let nb = (i as isize + o) as usize;
                    assert_ne!(d.class(nb), CellClass::Exterior);
                }
            }
            for &b in d.boundary_cells() {
                let touches = offs
                    .iter()
                    .any(|&o| d.class((b as isize + o) as usize) == CellClass::Interior);
                assert!(touches);
            }
        }
    }

    #[test]
    fn json_descriptor() {
        let spec: DomainSpec =
            serde_json::from_str(r#"{"shape": "disk", "center": [0,0], "radius": 1.0, "h": 0.01}"#)
                .unwrap();
        assert_eq!(spec.shape, Shape::unit_disk());
        assert_eq!(spec.h, 0.01);
        let l: DomainSpec = serde_json::from_str(r#"{"shape": "l_shape", "h": 0.05}"#).unwrap();
        assert_eq!(l.shape, Shape::default_l_shape());
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<DomainSpec>(&back).unwrap(), spec);
    }
}
