//! Domains, direction sets and line samples.
//!
//! Domains are closed-form shapes in the plane; the one-dimensional interval is
//! embedded on the `x` axis. The signed distance is positive inside.

use nalgebra::{Point2, Vector2};
use rand::{Rng, RngExt};

use crate::error::{Error, Result};

pub type Point = Point2<f64>;
pub type Vector = Vector2<f64>;

const UNIT_TOL: f64 = 1e-9;

/// Open parameter interval `(lo, hi)` along a line.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Reflection `t ↦ −t`.
    pub fn reflected(&self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// One-dimensional interval `(a, b)` on the `x` axis.
    Interval { a: f64, b: f64 },
    Ball { center: Point, radius: f64 },
    /// Axis-aligned ellipse.
    Ellipse { center: Point, semi_axes: (f64, f64) },
    Square { center: Point, half_width: f64 },
    /// Two balls joined by a rectangular neck along the segment between centers.
    Dumbbell { left: Point, right: Point, radius: f64, neck_half_height: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidGeometry(format!("interval ({a}, {b}) is empty")));
        }
        Ok(Domain::Interval { a, b })
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidGeometry(format!("ball radius {radius} must be positive")));
        }
        Ok(Domain::Ball { center, radius })
    }

    pub fn unit_disk() -> Self {
        Domain::Ball { center: Point::origin(), radius: 1.0 }
    }

    pub fn ellipse(center: Point, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidGeometry("ellipse semi-axes must be positive".into()));
        }
        Ok(Domain::Ellipse { center, semi_axes: (a, b) })
    }

    pub fn square(center: Point, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidGeometry("square half-width must be positive".into()));
        }
        Ok(Domain::Square { center, half_width })
    }

    pub fn dumbbell(left: Point, right: Point, radius: f64, neck_half_height: f64) -> Result<Self> {
        if !(radius > 0.0 && neck_half_height > 0.0 && neck_half_height < radius) {
            return Err(Error::InvalidGeometry(
                "dumbbell needs 0 < neck half-height < radius".into(),
            ));
        }
        if (right - left).norm() <= 0.0 {
            return Err(Error::InvalidGeometry("dumbbell centers coincide".into()));
        }
        Ok(Domain::Dumbbell { left, right, radius, neck_half_height })
    }

    /// Unit balls at `(±1.5, 0)` joined by a neck of half-height 0.2.
    pub fn canonical_dumbbell() -> Self {
        Domain::Dumbbell {
            left: Point::new(-1.5, 0.0),
            right: Point::new(1.5, 0.0),
            radius: 1.0,
            neck_half_height: 0.2,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn strictly_convex(&self) -> bool {
        matches!(self, Domain::Interval { .. } | Domain::Ball { .. } | Domain::Ellipse { .. })
    }

    /// Axis-aligned bounding box `(min, max)`; degenerate in `y` for intervals.
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Domain::Interval { a, b } => (Point::new(a, 0.0), Point::new(b, 0.0)),
            Domain::Ball { center, radius } => (
                center - Vector::new(radius, radius),
                center + Vector::new(radius, radius),
            ),
            Domain::Ellipse { center, semi_axes: (a, b) } => {
                (center - Vector::new(a, b), center + Vector::new(a, b))
            }
            Domain::Square { center, half_width } => (
                center - Vector::new(half_width, half_width),
                center + Vector::new(half_width, half_width),
            ),
            Domain::Dumbbell { left, right, radius, .. } => {
                let r = Vector::new(radius, radius);
                let (l0, l1) = (left - r, left + r);
                let (r0, r1) = (right - r, right + r);
                (
                    Point::new(l0.x.min(r0.x), l0.y.min(r0.y)),
                    Point::new(l1.x.max(r1.x), l1.y.max(r1.y)),
                )
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    /// Positive inside, negative outside, zero on the boundary.
    pub fn signed_distance(&self, p: &Point) -> f64 {
        match *self {
            Domain::Interval { a, b } => (p.x - a).min(b - p.x),
            Domain::Ball { center, radius } => radius - (p - center).norm(),
            Domain::Ellipse { center, semi_axes: (a, b) } => {
                let d = p - center;
                let dist = ellipse_distance(a, b, d.x, d.y);
                let inside = (d.x / a).powi(2) + (d.y / b).powi(2) < 1.0;
                if inside {
                    dist
                } else {
                    -dist
                }
            }
            Domain::Square { center, half_width } => {
                box_signed_distance(p, &center, half_width, half_width)
            }
            Domain::Dumbbell { left, right, radius, neck_half_height } => {
                let (mid, half_len, axis) = neck_frame(&left, &right);
                let d = p - mid;
                let local = Point::new(d.dot(&axis), d.perp(&axis));
                let neck = box_signed_distance(&local, &Point::origin(), half_len, neck_half_height);
                let bl = radius - (p - left).norm();
                let br = radius - (p - right).norm();
                bl.max(br).max(neck)
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Domain::Ellipse { center, semi_axes: (a, b) } => {
                let d = p - center;
                (d.x / a).powi(2) + (d.y / b).powi(2) < 1.0
            }
            _ => self.signed_distance(p) > 0.0,
        }
    }

    /// Uniform sample from the interior by rejection in the bounding box.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let x = rng.random_range(lo.x..=hi.x);
            let y = if self.dimension() == 1 { 0.0 } else { rng.random_range(lo.y..=hi.y) };
            let p = Point::new(x, y);
            if self.contains(&p) {
                return p;
            }
        }
    }

    /// Whether the closed segment `[x, y]` lies in `Ω̄` with its relative
    /// interior in `Ω`.
    pub fn contains_segment(&self, x: &Point, y: &Point) -> bool {
        let d = y - x;
        let len = d.norm();
        if len == 0.0 {
            return self.contains(x);
        }
        let z = d / len;
        match clip_line(self, x, &z) {
            Ok(intervals) => intervals
                .iter()
                .any(|iv| iv.lo <= 1e-12 * len.max(1.0) && iv.hi >= len * (1.0 - 1e-12)),
            Err(_) => false,
        }
    }
}

fn neck_frame(left: &Point, right: &Point) -> (Point, f64, Vector) {
    let d = right - left;
    let len = d.norm();
    (nalgebra::center(left, right), 0.5 * len, d / len)
}

fn box_signed_distance(p: &Point, c: &Point, hx: f64, hy: f64) -> f64 {
    let qx = (p.x - c.x).abs() - hx;
    let qy = (p.y - c.y).abs() - hy;
    let outside = Vector::new(qx.max(0.0), qy.max(0.0)).norm();
    let inside = qx.max(qy).min(0.0);
    -(outside + inside)
}

/// Euclidean distance from `(y0, y1)` to the ellipse with semi-axes `(a, b)`.
fn ellipse_distance(a: f64, b: f64, y0: f64, y1: f64) -> f64 {
    // work in the first quadrant with the major axis first
    let (e0, e1, y0, y1) = if a >= b {
        (a, b, y0.abs(), y1.abs())
    } else {
        (b, a, y1.abs(), y0.abs())
    };
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1).powi(2);
            let n0 = r0 * z0;
            let mut s0 = z1 - 1.0;
            let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
            let mut s = 0.0;
            for _ in 0..200 {
                s = 0.5 * (s0 + s1);
                if s == s0 || s == s1 {
                    break;
                }
                let ratio0 = n0 / (s + r0);
                let ratio1 = z1 / (s + 1.0);
                let gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
                if gs > 0.0 {
                    s0 = s;
                } else if gs < 0.0 {
                    s1 = s;
                } else {
                    break;
                }
            }
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer0 = e0 * y0;
        let denom0 = e0 * e0 - e1 * e1;
        if numer0 < denom0 {
            let xde0 = numer0 / denom0;
            let x0 = e0 * xde0;
            let x1 = e1 * (1.0 - xde0 * xde0).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn check_unit(z: &Vector) -> Result<()> {
    let n = z.norm();
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitDirection(n));
    }
    Ok(())
}

/// Roots of `|d + t v|² = 1` as an open interval, if any.
fn unit_quadric(d: Vector, v: Vector) -> Option<Interval> {
    let a = v.norm_squared();
    let b = d.dot(&v);
    let c = d.norm_squared() - 1.0;
    let disc = b * b - a * c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // stable root pair
    let q = -(b + b.signum() * sq);
    let (t1, t2) = if q != 0.0 { (q / a, c / q) } else { (-sq / a, sq / a) };
    Some(Interval::new(t1.min(t2), t1.max(t2)))
}

fn slab(x: f64, z: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if z == 0.0 {
        if lo < x && x < hi {
            Some((f64::NEG_INFINITY, f64::INFINITY))
        } else {
            None
        }
    } else {
        let (t1, t2) = ((lo - x) / z, (hi - x) / z);
        Some((t1.min(t2), t1.max(t2)))
    }
}

fn clip_box(x: &Point, z: &Vector, c: &Point, hx: f64, hy: f64) -> Option<Interval> {
    let (a0, a1) = slab(x.x, z.x, c.x - hx, c.x + hx)?;
    let (b0, b1) = slab(x.y, z.y, c.y - hy, c.y + hy)?;
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    (lo < hi).then(|| Interval::new(lo, hi))
}

fn merge(mut parts: Vec<Interval>) -> Vec<Interval> {
    parts.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(parts.len());
    for iv in parts {
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi + 1e-12 => last.hi = last.hi.max(iv.hi),
            _ => out.push(iv),
        }
    }
    out
}

/// Parameter intervals `{t : x + t z ∈ Ω}`, ordered and disjoint.
///
/// Returns an empty list when `x` is outside `Ω̄`. For the interval domain the
/// direction must be `±e₁`.
pub fn clip_line(domain: &Domain, x: &Point, z: &Vector) -> Result<Vec<Interval>> {
    check_unit(z)?;
    if domain.signed_distance(x) < -1e-12 {
        return Ok(Vec::new());
    }
    let out = match *domain {
        Domain::Interval { a, b } => {
            if z.y.abs() > 1e-12 {
                return Err(Error::InvalidGeometry(
                    "lines in a one-dimensional domain must follow the x axis".into(),
                ));
            }
            let (t1, t2) = ((a - x.x) / z.x, (b - x.x) / z.x);
            vec![Interval::new(t1.min(t2), t1.max(t2))]
        }
        Domain::Ball { center, radius } => {
            unit_quadric((x - center) / radius, z / radius).into_iter().collect()
        }
        Domain::Ellipse { center, semi_axes: (a, b) } => {
            let d = x - center;
            unit_quadric(Vector::new(d.x / a, d.y / b), Vector::new(z.x / a, z.y / b))
                .into_iter()
                .collect()
        }
        Domain::Square { center, half_width } => {
            clip_box(x, z, &center, half_width, half_width).into_iter().collect()
        }
        Domain::Dumbbell { left, right, radius, neck_half_height } => {
            let (mid, half_len, axis) = neck_frame(&left, &right);
            let d = x - mid;
            let lx = Point::new(d.dot(&axis), d.perp(&axis));
            let lz = Vector::new(z.dot(&axis), z.perp(&axis));
            let parts: Vec<Interval> = [
                unit_quadric((x - left) / radius, z / radius),
                unit_quadric((x - right) / radius, z / radius),
                clip_box(&lx, &lz, &Point::origin(), half_len, neck_half_height),
            ]
            .into_iter()
            .flatten()
            .collect();
            merge(parts)
        }
    };
    Ok(out)
}

/// The interval containing `t = 0`.
pub fn connected_component(intervals: &[Interval]) -> Result<Interval> {
    intervals.iter().copied().find(|iv| iv.contains(0.0)).ok_or(Error::NoComponent)
}

/// Unit directions covering a half sphere; antipodes are dropped because the
/// kernel is even.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    dimension: usize,
    directions: Vec<Vector>,
    angular_spacing: f64,
}

impl DirectionSet {
    /// `θ_k = kπ/m`, `k = 0..m`.
    pub fn half_circle(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGeometry("direction count must be positive".into()));
        }
        let spacing = std::f64::consts::PI / m as f64;
        let directions = (0..m)
            .map(|k| {
                let th = k as f64 * spacing;
                let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
                Vector::new(snap(th.cos()), snap(th.sin()))
            })
            .collect();
        Ok(Self { dimension: 2, directions, angular_spacing: spacing })
    }

    pub fn one_dimensional() -> Self {
        Self {
            dimension: 1,
            directions: vec![Vector::new(1.0, 0.0)],
            angular_spacing: std::f64::consts::PI,
        }
    }

    /// The natural set for a domain: `±e₁` in one dimension, `m` directions otherwise.
    pub fn for_domain(domain: &Domain, m: usize) -> Result<Self> {
        if domain.dimension() == 1 {
            Ok(Self::one_dimensional())
        } else {
            Self::half_circle(m)
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn angular_spacing(&self) -> f64 {
        self.angular_spacing
    }

    /// Angle of direction `k`.
    pub fn angle(&self, k: usize) -> f64 {
        let z = self.directions[k];
        z.y.atan2(z.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum NodeKind {
    Inside,
    Outside,
    /// Carries no kernel mass (localized operators).
    Excluded,
}

/// Values of `t ↦ u(x + t z)` at `t = t_start + j h`.
#[derive(Debug, Clone)]
pub struct LineSample {
    origin: Point,
    direction: Vector,
    h: f64,
    t_start: f64,
    values: Vec<f64>,
    kinds: Vec<NodeKind>,
}

impl LineSample {
    pub fn new(
        origin: Point,
        direction: Vector,
        h: f64,
        t_start: f64,
        values: Vec<f64>,
        kinds: Vec<NodeKind>,
    ) -> Result<Self> {
        check_unit(&direction)?;
        if values.len() != kinds.len() {
            return Err(Error::InvalidGeometry("values and node kinds differ in length".into()));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidGeometry("line spacing must be positive".into()));
        }
        Ok(Self { origin, direction, h, t_start, values, kinds })
    }

    /// A purely one-dimensional profile on the `x` axis; every node is inside.
    pub fn from_profile(h: f64, t_start: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|j| f(t_start + j as f64 * h)).collect();
        Self {
            origin: Point::origin(),
            direction: Vector::new(1.0, 0.0),
            h,
            t_start,
            values,
            kinds: vec![NodeKind::Inside; n],
        }
    }

    /// Profile on `[lo, hi]` with nodes classified by membership in `inside`.
    pub fn classified(
        h: f64,
        t_start: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
        inside: impl Fn(f64) -> bool,
    ) -> Self {
        let mut s = Self::from_profile(h, t_start, n, f);
        for j in 0..n {
            if !inside(s.parameter(j)) {
                s.kinds[j] = NodeKind::Outside;
            }
        }
        s
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn direction(&self) -> Vector {
        self.direction
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn inside_mask(&self) -> Vec<bool> {
        self.kinds.iter().map(|k| *k == NodeKind::Inside).collect()
    }

    pub fn parameter(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.h
    }

    pub fn point(&self, j: usize) -> Point {
        self.origin + self.direction * self.parameter(j)
    }

    /// Parameter range `[t_start, t_end]` covered by the nodes.
    pub fn window(&self) -> (f64, f64) {
        (self.t_start, self.parameter(self.len().saturating_sub(1)))
    }

    /// Mirror image `t ↦ −t`; node `j` maps to `len − 1 − j`.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        let mut kinds = self.kinds.clone();
        values.reverse();
        kinds.reverse();
        Self {
            origin: self.origin,
            direction: -self.direction,
            h: self.h,
            t_start: -self.window().1,
            values,
            kinds,
        }
    }
}
