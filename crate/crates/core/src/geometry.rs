//! Planar geometry primitives shared by the scene and the ray tracer.
//!
//! All coordinates are meters in a right-handed frame; azimuths are degrees
//! measured counter-clockwise from the +x axis.

use std::ops::{Add, Mul, Neg, Sub};

/// Distance below which a point counts as lying on a line.
pub const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Azimuth of this vector in degrees, wrapped to `[0, 360)`.
    pub fn azimuth_deg(self) -> f64 {
        normalize_azimuth(self.y.atan2(self.x).to_degrees())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Wraps an angular difference in degrees to `(-180, 180]`.
pub fn wrap_offset(deg: f64) -> f64 {
    let r = normalize_azimuth(deg);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            min: Point2::new(x0.min(x1), y0.min(y1)),
            max: Point2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        (self.min + self.max) * 0.5
    }

    /// Bounding box of a point set. Panics on an empty slice.
    pub fn bounding(points: &[Point2]) -> Rect {
        let mut r = Rect {
            min: points[0],
            max: points[0],
        };
        for p in &points[1..] {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        r
    }

    fn overlaps_segment_box(&self, a: Point2, b: Point2) -> bool {
        a.x.max(b.x) >= self.min.x
            && a.x.min(b.x) <= self.max.x
            && a.y.max(b.y) >= self.min.y
            && a.y.min(b.y) <= self.max.y
    }
}

/// Reflects `p` across the infinite line through `a` and `b`.
pub fn mirror_across(p: Point2, a: Point2, b: Point2) -> Point2 {
    let d = b - a;
    let t = (p - a).dot(d) / d.dot(d);
    let foot = a + d * t;
    foot * 2.0 - p
}

/// Intersection of segment `p→q` with segment `a→b`.
///
/// Returns `(t, u)` with the hit at `p + t(q-p) = a + u(b-a)`, or `None`
/// when the segments are parallel. The caller decides which parameter
/// ranges count as a hit.
pub fn segment_params(p: Point2, q: Point2, a: Point2, b: Point2) -> Option<(f64, f64)> {
    let r = q - p;
    let s = b - a;
    let denom = r.cross(s);
    if denom.abs() < 1e-300 {
        return None;
    }
    let ap = a - p;
    let t = ap.cross(s) / denom;
    let u = ap.cross(r) / denom;
    Some((t, u))
}

/// Convex polygon with counter-clockwise vertices.
///
/// Interior tests are strict: a point closer than [`GEOM_EPS`] to any edge
/// line is on the boundary, not inside.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
    bbox: Rect,
}

impl ConvexPolygon {
    /// Wraps vertices that are already known to be CCW and convex.
    pub fn new_unchecked(vertices: Vec<Point2>) -> Self {
        let bbox = Rect::bounding(&vertices);
        ConvexPolygon { vertices, bbox }
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    /// Edges as `(start, end)` pairs in CCW order.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Signed distance from the line of edge `a→b`, positive on the interior side.
    fn inward_distance(a: Point2, b: Point2, p: Point2) -> f64 {
        (b - a).cross(p - a) / (b - a).norm()
    }

    pub fn contains_strict(&self, p: Point2) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        self.edges()
            .all(|(a, b)| Self::inward_distance(a, b, p) > GEOM_EPS)
    }

    /// True iff some point of the segment `p→q` lies strictly inside.
    ///
    /// Along the segment each inward distance is affine in the segment
    /// parameter, so the strictly-interior set is an open interval; the
    /// segment is blocked when that interval has positive length.
    pub fn segment_crosses_interior(&self, p: Point2, q: Point2) -> bool {
        if !self.bbox.overlaps_segment_box(p, q) {
            return false;
        }
        let len = p.distance(q);
        if len == 0.0 {
            return self.contains_strict(p);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (a, b) in self.edges() {
            let d0 = Self::inward_distance(a, b, p) - GEOM_EPS;
            let d1 = Self::inward_distance(a, b, q) - GEOM_EPS;
            let slope = d1 - d0;
            if slope == 0.0 {
                if d0 <= 0.0 {
                    return false;
                }
                continue;
            }
            let root = -d0 / slope;
            if slope > 0.0 {
                lo = lo.max(root);
            } else {
                hi = hi.min(root);
            }
            if (hi - lo) * len <= GEOM_EPS {
                return false;
            }
        }
        (hi - lo) * len > GEOM_EPS
    }
}

/// Checks the CCW-convex invariant: every turn is non-negative, no
/// zero-length edges, and the boundary winds exactly once.
pub fn is_ccw_convex(vertices: &[Point2]) -> Result<(), String> {
    let n = vertices.len();
    if n < 3 {
        return Err(format!("needs at least 3 vertices, found {n}"));
    }
    let mut turning = 0.0;
    let mut area2 = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let c = vertices[(i + 2) % n];
        let e0 = b - a;
        let e1 = c - b;
        if e0.norm() <= GEOM_EPS {
            return Err(format!("zero-length edge at vertex {i}"));
        }
        let cross = e0.cross(e1);
        if cross < -GEOM_EPS * e0.norm() * e1.norm().max(1.0) {
            return Err(format!(
                "not convex/counter-clockwise at vertex {}",
                (i + 1) % n
            ));
        }
        turning += cross.atan2(e0.dot(e1));
        area2 += a.cross(b);
    }
    if area2 <= 0.0 {
        return Err("vertices are not in counter-clockwise order".into());
    }
    if (turning - std::f64::consts::TAU).abs() > 1e-6 {
        return Err("boundary is self-intersecting".into());
    }
    Ok(())
}
