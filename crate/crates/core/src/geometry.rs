//! Domains (discs, cylinders, balls) and fracture traces.
//!
//! The cylinder axis is the first coordinate: a point `x = (x1, x')` has axial
//! coordinate `x.x` and cross-section coordinates `(x.y, x.z)`. All domains are
//! open sets, so boundary points are reported as outside.

use std::io::{self, BufRead, Read, Write};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("point has a non-finite coordinate")]
    NonFinite,
    #[error("a trace needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
}

fn check_positive(what: &'static str, value: f64) -> Result<f64, GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(GeometryError::NonPositive { what, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Axial coordinate and cross-section part `x'`.
    pub fn split(self) -> (f64, Point2) {
        (self.x, Point2::new(self.y, self.z))
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn coord(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn min(self, o: Point3) -> Point3 {
        Point3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Point3) -> Point3 {
        Point3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Open disc `D_R` centred at the origin of the cross-section plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscSpec {
    radius: f64,
}

impl DiscSpec {
    pub fn new(radius: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            radius: check_positive("disc radius", radius)?,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Length {
    Finite(f64),
    Infinite,
}

/// Cylinder `(-L/2, L/2) x D_R`, or the infinite cylinder `C_R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderSpec {
    radius: f64,
    length: Length,
}

impl CylinderSpec {
    pub fn finite(length: f64, radius: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            radius: check_positive("cylinder radius", radius)?,
            length: Length::Finite(check_positive("cylinder length", length)?),
        })
    }

    pub fn infinite(radius: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            radius: check_positive("cylinder radius", radius)?,
            length: Length::Infinite,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn length(&self) -> Length {
        self.length
    }

    pub fn finite_length(&self) -> Option<f64> {
        match self.length {
            Length::Finite(l) => Some(l),
            Length::Infinite => None,
        }
    }

    pub fn cross_section(&self) -> DiscSpec {
        DiscSpec {
            radius: self.radius,
        }
    }

    /// Volume, `None` for the infinite cylinder.
    pub fn volume(&self) -> Option<f64> {
        self.finite_length()
            .map(|l| l * std::f64::consts::PI * self.radius * self.radius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    center: Point3,
    radius: f64,
}

impl BallSpec {
    pub fn new(center: Point3, radius: f64) -> Result<Self, GeometryError> {
        if !center.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self {
            center,
            radius: check_positive("ball radius", radius)?,
        })
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Signed distance-like function: `min(R - |x'|, L/2 - |x1|)`.
///
/// Exact Euclidean distance to the boundary for interior points; negative iff
/// `x` lies outside the closed cylinder.
pub fn dist_to_cylinder_boundary(x: Point3, c: &CylinderSpec) -> f64 {
    let (axial, cross) = x.split();
    let lateral = c.radius - cross.norm();
    match c.length {
        Length::Finite(l) => lateral.min(0.5 * l - axial.abs()),
        Length::Infinite => lateral,
    }
}

pub fn dist_to_ball_boundary(x: Point3, b: &BallSpec) -> f64 {
    b.radius - x.distance(b.center)
}

/// Open-set membership.
pub fn contains(x: Point3, c: &CylinderSpec) -> bool {
    dist_to_cylinder_boundary(x, c) > 0.0
}

/// A domain a Brownian path can be run in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Cylinder(CylinderSpec),
    Ball(BallSpec),
}

impl Domain {
    pub fn boundary_distance(&self, x: Point3) -> f64 {
        match self {
            Domain::Cylinder(c) => dist_to_cylinder_boundary(x, c),
            Domain::Ball(b) => dist_to_ball_boundary(x, b),
        }
    }

    pub fn contains(&self, x: Point3) -> bool {
        self.boundary_distance(x) > 0.0
    }

    /// First parameter `s` in `(0, 1]` at which `a + s (b - a)` leaves the domain,
    /// given `a` inside and `b` outside.
    pub fn exit_parameter(&self, a: Point3, b: Point3) -> f64 {
        let d = b - a;
        let s = match self {
            Domain::Ball(ball) => {
                let p = a - ball.center;
                larger_root(d.norm_squared(), p.dot(d), p.norm_squared() - ball.radius * ball.radius)
            }
            Domain::Cylinder(c) => {
                let (a1, ap) = a.split();
                let (d1, dp) = d.split();
                let qa = dp.norm_squared();
                let mut s = if qa > 0.0 {
                    let qb = ap.x * dp.x + ap.y * dp.y;
                    larger_root(qa, qb, ap.norm_squared() - c.radius * c.radius)
                } else {
                    f64::INFINITY
                };
                if let Length::Finite(l) = c.length {
                    if d1 != 0.0 {
                        let face = if d1 > 0.0 { 0.5 * l } else { -0.5 * l };
                        s = s.min((face - a1) / d1);
                    }
                }
                s
            }
        };
        s.clamp(0.0, 1.0)
    }
}

/// Larger root of `qa s^2 + 2 qb s + qc = 0` with `qc <= 0`.
fn larger_root(qa: f64, qb: f64, qc: f64) -> f64 {
    let disc = (qb * qb - qa * qc).max(0.0).sqrt();
    if qb >= 0.0 {
        // Stable form of (-qb + disc) / qa.
        let den = qb + disc;
        if den > 0.0 {
            -qc / den
        } else {
            0.0
        }
    } else {
        (disc - qb) / qa
    }
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn distance(&self, p: Point3) -> f64 {
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(0.0);
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(0.0);
        let dz = (self.min.z - p.z).max(p.z - self.max.z).max(0.0);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }
}

const MAX_GRID_CELLS: usize = 1 << 21;

/// Uniform voxel grid over the segments of a polyline.
///
/// Every non-degenerate segment is registered in each cell its bounding box
/// overlaps, so any point of the segment set lies in a registered cell. Queries
/// search rings of cells around the query cell until the nearest candidate is
/// closer than every unvisited cell.
#[derive(Debug, Clone)]
struct SegmentGrid {
    origin: Point3,
    cell: f64,
    dims: [usize; 3],
    cell_start: Vec<u32>,
    entries: Vec<u32>,
}

impl SegmentGrid {
    fn build(vertices: &[Point3], segments: &[u32], bounds: &Aabb) -> Self {
        let mut total = 0.0;
        for &s in segments {
            let s = s as usize;
            total += vertices[s].distance(vertices[s + 1]);
        }
        let extent = bounds.max - bounds.min;
        let mean = if segments.is_empty() {
            0.0
        } else {
            total / segments.len() as f64
        };
        let largest = extent.x.max(extent.y).max(extent.z);
        let mut cell = 2.0 * mean;
        if cell.is_nan() || cell <= 0.0 {
            cell = if largest > 0.0 { largest } else { 1.0 };
        }
        let dims_for = |cell: f64| {
            [
                ((extent.x / cell).floor() as usize + 1).max(1),
                ((extent.y / cell).floor() as usize + 1).max(1),
                ((extent.z / cell).floor() as usize + 1).max(1),
            ]
        };
        let mut dims = dims_for(cell);
        while dims[0] * dims[1] * dims[2] > MAX_GRID_CELLS {
            cell *= 1.5;
            dims = dims_for(cell);
        }
        let mut grid = SegmentGrid {
            origin: bounds.min,
            cell,
            dims,
            cell_start: Vec::new(),
            entries: Vec::new(),
        };

        let n_cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0u32; n_cells + 1];
        let ranges: Vec<([usize; 3], [usize; 3])> = segments
            .iter()
            .map(|&s| {
                let a = vertices[s as usize];
                let b = vertices[s as usize + 1];
                (grid.cell_of(a.min(b)), grid.cell_of(a.max(b)))
            })
            .collect();
        for (lo, hi) in &ranges {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        counts[grid.flat(i, j, k) + 1] += 1;
                    }
                }
            }
        }
        for c in 1..=n_cells {
            counts[c] += counts[c - 1];
        }
        let mut fill = counts.clone();
        let mut entries = vec![0u32; counts[n_cells] as usize];
        for (&s, (lo, hi)) in segments.iter().zip(&ranges) {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    for k in lo[2]..=hi[2] {
                        let f = grid.flat(i, j, k);
                        entries[fill[f] as usize] = s;
                        fill[f] += 1;
                    }
                }
            }
        }
        grid.cell_start = counts;
        grid.entries = entries;
        grid
    }

    fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    fn axis_cell(&self, v: f64, axis: usize) -> usize {
        let t = ((v - self.origin.coord(axis)) / self.cell).floor();
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.dims[axis] - 1)
        }
    }

    fn cell_of(&self, p: Point3) -> [usize; 3] {
        [
            self.axis_cell(p.x, 0),
            self.axis_cell(p.y, 1),
            self.axis_cell(p.z, 2),
        ]
    }

    fn cell_entries(&self, i: usize, j: usize, k: usize) -> &[u32] {
        let f = self.flat(i, j, k);
        &self.entries[self.cell_start[f] as usize..self.cell_start[f + 1] as usize]
    }

    /// Lower bound on the distance from `p` to any cell outside the index box `[lo, hi]`.
    fn unvisited_bound(&self, p: Point3, lo: [usize; 3], hi: [usize; 3]) -> f64 {
        let mut bound = f64::INFINITY;
        for axis in 0..3 {
            let o = self.origin.coord(axis);
            let v = p.coord(axis);
            if lo[axis] > 0 {
                let face = o + lo[axis] as f64 * self.cell;
                bound = bound.min((v - face).max(0.0));
            }
            if hi[axis] + 1 < self.dims[axis] {
                let face = o + (hi[axis] + 1) as f64 * self.cell;
                bound = bound.min((face - v).max(0.0));
            }
        }
        bound
    }

    /// Nearest segment distance if it is below `cap`, otherwise some value `>= cap`.
    fn nearest(&self, vertices: &[Point3], p: Point3, cap: f64) -> f64 {
        let c = self.cell_of(p);
        let mut best = f64::INFINITY;
        let mut ring = 0usize;
        loop {
            let lo = [
                c[0].saturating_sub(ring),
                c[1].saturating_sub(ring),
                c[2].saturating_sub(ring),
            ];
            let hi = [
                (c[0] + ring).min(self.dims[0] - 1),
                (c[1] + ring).min(self.dims[1] - 1),
                (c[2] + ring).min(self.dims[2] - 1),
            ];
            for i in lo[0]..=hi[0] {
                let i_edge = i.abs_diff(c[0]) == ring;
                for j in lo[1]..=hi[1] {
                    let j_edge = i_edge || j.abs_diff(c[1]) == ring;
                    let mut visit = |k: usize| {
                        for &s in self.cell_entries(i, j, k) {
                            let s = s as usize;
                            let d = point_segment_distance(p, vertices[s], vertices[s + 1]);
                            if d < best {
                                best = d;
                            }
                        }
                    };
                    if j_edge {
                        for k in lo[2]..=hi[2] {
                            visit(k);
                        }
                    } else {
                        if c[2] >= ring && c[2] - ring >= lo[2] {
                            visit(c[2] - ring);
                        }
                        if ring > 0 && c[2] + ring <= hi[2] {
                            visit(c[2] + ring);
                        }
                    }
                }
            }
            let bound = self.unvisited_bound(p, lo, hi);
            if best <= bound || bound == f64::INFINITY {
                return best;
            }
            if bound >= cap {
                return best.min(bound);
            }
            ring += 1;
        }
    }
}

/// Discrete Brownian trace: an ordered polyline with a spatial index.
#[derive(Debug, Clone)]
pub struct TracePolyline {
    vertices: Vec<Point3>,
    step_dt: f64,
    bounds: Aabb,
    grid: SegmentGrid,
}

impl PartialEq for TracePolyline {
    fn eq(&self, other: &Self) -> bool {
        self.step_dt == other.step_dt && self.vertices == other.vertices
    }
}

impl TracePolyline {
    pub fn new(vertices: Vec<Point3>, step_dt: f64) -> Result<Self, GeometryError> {
        let step_dt = check_positive("step_dt", step_dt)?;
        if vertices.len() < 2 {
            return Err(GeometryError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let bounds = vertices.iter().skip(1).fold(
            Aabb {
                min: vertices[0],
                max: vertices[0],
            },
            |b, &v| Aabb {
                min: b.min.min(v),
                max: b.max.max(v),
            },
        );
        let mut segments: Vec<u32> = (0..vertices.len() - 1)
            .filter(|&i| vertices[i] != vertices[i + 1])
            .map(|i| i as u32)
            .collect();
        if segments.is_empty() {
            // Every vertex coincides; keep one point-segment.
            segments.push(0);
        }
        let grid = SegmentGrid::build(&vertices, &segments, &bounds);
        Ok(Self {
            vertices,
            step_dt,
            bounds,
            grid,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn step_dt(&self) -> f64 {
        self.step_dt
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    /// Number of steps times `step_dt`.
    pub fn duration(&self) -> f64 {
        (self.vertices.len() - 1) as f64 * self.step_dt
    }

    /// Range of the axial coordinate.
    pub fn axial_extent(&self) -> (f64, f64) {
        (self.bounds.min.x, self.bounds.max.x)
    }

    /// Radius of the smallest sphere about `center` containing every vertex.
    pub fn circumradius(&self, center: Point3) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.distance(center))
            .fold(0.0, f64::max)
    }

    /// Exact distance from `x` to the union of segments.
    pub fn distance(&self, x: Point3) -> f64 {
        self.grid.nearest(&self.vertices, x, f64::INFINITY)
    }

    /// Exact distance when it is below `cap`; otherwise returns a value `>= cap`.
    pub fn distance_within(&self, x: Point3, cap: f64) -> f64 {
        let outside = self.bounds.distance(x);
        if outside >= cap {
            return outside;
        }
        self.grid.nearest(&self.vertices, x, cap)
    }

    /// Brute-force scan over every segment.
    pub fn distance_brute_force(&self, x: Point3) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| point_segment_distance(x, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Little-endian binary record: `step_dt: f64`, `count: u64`, then `x1 x2 x3` per vertex.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&self.step_dt.to_le_bytes())?;
        w.write_all(&(self.vertices.len() as u64).to_le_bytes())?;
        for v in &self.vertices {
            for c in [v.x, v.y, v.z] {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> io::Result<Self> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let step_dt = f64::from_le_bytes(buf);
        r.read_exact(&mut buf)?;
        let n = u64::from_le_bytes(buf) as usize;
        let mut vertices = Vec::with_capacity(n.min(1 << 24));
        for _ in 0..n {
            let mut c = [0.0; 3];
            for slot in &mut c {
                r.read_exact(&mut buf)?;
                *slot = f64::from_le_bytes(buf);
            }
            vertices.push(Point3::new(c[0], c[1], c[2]));
        }
        Self::new(vertices, step_dt).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Text record: a `step_dt <value>` line, then one `x1 x2 x3` line per vertex.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "step_dt {:?}", self.step_dt)?;
        for v in &self.vertices {
            writeln!(w, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty trace file".into()))??;
        let step_dt = header
            .strip_prefix("step_dt")
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| bad(format!("bad header line: {header:?}")))?;
        let mut vertices = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| bad(format!("line {}: {e}", lineno + 2)))?;
            if c.len() != 3 {
                return Err(bad(format!("line {}: expected 3 coordinates", lineno + 2)));
            }
            vertices.push(Point3::new(c[0], c[1], c[2]));
        }
        Self::new(vertices, step_dt).map_err(|e| bad(e.to_string()))
    }

    /// Reads either format, detecting text by its `step_dt` header.
    pub fn read_any(bytes: &[u8]) -> io::Result<Self> {
        if bytes.starts_with(b"step_dt") {
            Self::read_text(bytes)
        } else {
            Self::read_binary(bytes)
        }
    }
}

/// Distance from `x` to a trace.
pub fn dist_to_trace(x: Point3, t: &TracePolyline) -> f64 {
    t.distance(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c21() -> CylinderSpec {
        CylinderSpec::finite(2.0, 1.0).unwrap()
    }

    #[test]
    fn cylinder_boundary_distance_examples() {
        assert_eq!(dist_to_cylinder_boundary(Point3::ORIGIN, &c21()), 1.0);
        let d = dist_to_cylinder_boundary(Point3::new(0.9, 0.0, 0.0), &c21());
        assert!((d - 0.1).abs() < 1e-15);
        let inf = CylinderSpec::infinite(1.0).unwrap();
        let d = dist_to_cylinder_boundary(Point3::new(0.0, 0.6, 0.8), &inf);
        assert!(d.abs() < 1e-15);
        assert!(dist_to_cylinder_boundary(Point3::new(0.0, 2.0, 0.0), &inf) < 0.0);
    }

    #[test]
    fn contains_is_open() {
        assert!(contains(Point3::ORIGIN, &c21()));
        assert!(!contains(Point3::new(1.1, 0.0, 0.0), &c21()));
        assert!(!contains(Point3::new(1.0, 0.0, 0.0), &c21()));
        assert!(!contains(Point3::new(0.0, 1.0, 0.0), &c21()));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CylinderSpec::finite(0.0, 1.0).is_err());
        assert!(CylinderSpec::finite(1.0, -1.0).is_err());
        assert!(DiscSpec::new(f64::NAN).is_err());
        assert!(BallSpec::new(Point3::ORIGIN, 0.0).is_err());
        assert_eq!(
            TracePolyline::new(vec![Point3::ORIGIN], 1.0).unwrap_err(),
            GeometryError::TooFewVertices(1)
        );
    }

    #[test]
    fn single_segment_distances() {
        let t = TracePolyline::new(
            vec![Point3::new(-1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)],
            1.0,
        )
        .unwrap();
        assert_eq!(dist_to_trace(Point3::ORIGIN, &t), 0.0);
        assert!((dist_to_trace(Point3::new(0.0, 1.0, 0.0), &t) - 1.0).abs() < 1e-15);
        assert!((dist_to_trace(Point3::new(3.0, 0.0, 4.0), &t) - 20f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn degenerate_polylines() {
        let p = Point3::new(0.5, 0.5, 0.5);
        let t = TracePolyline::new(vec![p, p, p], 0.1).unwrap();
        assert!((t.distance(Point3::ORIGIN) - p.norm()).abs() < 1e-15);

        let t = TracePolyline::new(
            vec![Point3::ORIGIN, Point3::ORIGIN, Point3::new(1.0, 0.0, 0.0)],
            0.1,
        )
        .unwrap();
        assert!((t.distance(Point3::new(-1.0, 0.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    fn random_walk(rng: &mut ChaCha8Rng, n: usize, step: f64) -> TracePolyline {
        let mut v = vec![Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )];
        for _ in 1..n {
            let last = *v.last().unwrap();
            v.push(
                last + Point3::new(
                    rng.random_range(-step..step),
                    rng.random_range(-step..step),
                    rng.random_range(-step..step),
                ),
            );
        }
        TracePolyline::new(v, 1e-4).unwrap()
    }

    #[test]
    fn grid_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.random_range(2..1000);
            let t = random_walk(&mut rng, n, 0.05);
            let x = Point3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let fast = t.distance(x);
            let slow = t.distance_brute_force(x);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn capped_query_is_exact_below_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = random_walk(&mut rng, 1000, 0.03);
        for _ in 0..500 {
            let x = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let cap = rng.random_range(0.0..0.5);
            let exact = t.distance_brute_force(x);
            let got = t.distance_within(x, cap);
            if exact < cap {
                assert!((got - exact).abs() < 1e-12);
            } else {
                assert!(got >= cap - 1e-12 && got <= exact + 1e-12);
            }
        }
    }

    #[test]
    fn boundary_distance_is_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = CylinderSpec::finite(3.0, 1.0).unwrap();
        for _ in 0..200 {
            let a = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let b = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            let pts: Vec<Point3> = (0..10).map(|i| a + (b - a) * (i as f64 / 9.0)).collect();
            for w in pts.windows(2) {
                let slope = (dist_to_cylinder_boundary(w[1], &c) - dist_to_cylinder_boundary(w[0], &c))
                    .abs()
                    / w[0].distance(w[1]);
                assert!(slope <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn contains_agrees_with_distance_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = c21();
        for _ in 0..10_000 {
            let x = Point3::new(
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            );
            assert_eq!(contains(x, &c), dist_to_cylinder_boundary(x, &c) > 0.0);
        }
    }

    #[test]
    fn exit_parameter_lands_on_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let domains = [
            Domain::Cylinder(CylinderSpec::finite(2.0, 1.0).unwrap()),
            Domain::Cylinder(CylinderSpec::infinite(0.7).unwrap()),
            Domain::Ball(BallSpec::new(Point3::new(0.1, 0.0, -0.2), 0.8).unwrap()),
        ];
        for dom in domains {
            let mut done = 0;
            while done < 500 {
                let a = Point3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                let b = a + Point3::new(
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                );
                if !dom.contains(a) || dom.contains(b) {
                    continue;
                }
                let s = dom.exit_parameter(a, b);
                let p = a + (b - a) * s;
                assert!(dom.boundary_distance(p).abs() < 1e-12, "{dom:?} {s}");
                done += 1;
            }
        }
    }

    #[test]
    fn binary_and_text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = random_walk(&mut rng, 50, 0.1);
        let mut bin = Vec::new();
        t.write_binary(&mut bin).unwrap();
        assert_eq!(bin.len(), 16 + 50 * 24);
        assert_eq!(TracePolyline::read_any(&bin).unwrap(), t);
        let mut txt = Vec::new();
        t.write_text(&mut txt).unwrap();
        assert_eq!(TracePolyline::read_any(&txt).unwrap(), t);
        assert!(TracePolyline::read_text(&b"step_dt 0.1\n1 2\n"[..]).is_err());
    }
}
