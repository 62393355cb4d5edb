//! Small planar-geometry and interval primitives shared across the crate.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A point or vector in the world plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the cross product; positive when `o` is counterclockwise
    /// from `self`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction; `None` for (near-)zero vectors.
    pub fn try_normalize(self) -> Option<Vec2> {
        let n = self.norm();
        if n < 1e-12 {
            None
        } else {
            Some(self / n)
        }
    }

    /// Rotation by -90 degrees: for a driving direction this points to the
    /// driver's right.
    pub fn perp_right(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn from_angle(angle: f64) -> Vec2 {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Unsigned angle between two vectors, in `[0, pi]`.
    pub fn angle_between(self, o: Vec2) -> f64 {
        let d = self.norm() * o.norm();
        if d < 1e-12 {
            return 0.0;
        }
        (self.dot(o) / d).clamp(-1.0, 1.0).acos()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// A closed acceleration (or generic scalar) interval `[lo, hi]`.
///
/// Intervals with `lo > hi` are empty; emptiness is an ordinary, queryable
/// state rather than an error so that constraint aggregation can surface
/// infeasibility without aborting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    /// The degenerate single-point interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        Interval::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    /// Nearest point of the interval to `x`; `x` itself when contained.
    /// Empty intervals clamp to their midpoint.
    pub fn clamp(&self, x: f64) -> f64 {
        if self.is_empty() {
            0.5 * (self.lo + self.hi)
        } else {
            x.clamp(self.lo, self.hi)
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn of_points(pts: impl IntoIterator<Item = Vec2>) -> Self {
        let mut b = Aabb::empty();
        for p in pts {
            b.expand(p);
        }
        b
    }

    pub fn expand(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn merge(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn inflate(&self, r: f64) -> Aabb {
        Aabb {
            min: self.min - Vec2::new(r, r),
            max: self.max + Vec2::new(r, r),
        }
    }

    /// Distance between two boxes (0 when they overlap or touch).
    pub fn distance(&self, o: &Aabb) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        dx.hypot(dy)
    }

    pub fn overlaps(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }
}

/// Squared distance from a point to a segment.
pub fn point_segment_dist2(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm2();
    if len2 < 1e-24 {
        return (p - a).norm2();
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm2()
}

/// Minimal distance between two segments.
pub fn segment_segment_dist(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> f64 {
    if segments_intersect(a0, a1, b0, b1) {
        return 0.0;
    }
    point_segment_dist2(a0, b0, b1)
        .min(point_segment_dist2(a1, b0, b1))
        .min(point_segment_dist2(b0, a0, a1))
        .min(point_segment_dist2(b1, a0, a1))
        .sqrt()
}

/// Proper or touching intersection test for two segments.
pub fn segments_intersect(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> bool {
    let d1 = (a1 - a0).cross(b0 - a0);
    let d2 = (a1 - a0).cross(b1 - a0);
    let d3 = (b1 - b0).cross(a0 - b0);
    let d4 = (b1 - b0).cross(a1 - b0);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |d: f64, p: Vec2, q0: Vec2, q1: Vec2| {
        d == 0.0
            && p.x >= q0.x.min(q1.x)
            && p.x <= q0.x.max(q1.x)
            && p.y >= q0.y.min(q1.y)
            && p.y <= q0.y.max(q1.y)
    };
    on(d1, b0, a0, a1) || on(d2, b1, a0, a1) || on(d3, a0, b0, b1) || on(d4, a1, b0, b1)
}

/// A convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Builds a polygon, reorienting clockwise input to counterclockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        ConvexPolygon { vertices }
    }

    /// Oriented rectangle helper: `center`, half extents along `axis` (unit
    /// vector) and its right perpendicular.
    pub fn oriented_box(center: Vec2, axis: Vec2, half_long: f64, half_wide: f64) -> Self {
        let u = axis * half_long;
        let v = axis.perp_right() * half_wide;
        ConvexPolygon::new(vec![center + u + v, center + u - v, center - u - v, center - u + v])
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::of_points(self.vertices.iter().copied())
    }

    /// Point containment (boundary counts as inside).
    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (b - a).cross(p - a) < -1e-12 {
                return false;
            }
        }
        true
    }

    /// Convex-convex overlap via the separating-axis test (touching counts
    /// as overlap).
    pub fn overlaps(&self, o: &ConvexPolygon) -> bool {
        let axes = |poly: &ConvexPolygon, out: &mut Vec<Vec2>| {
            let n = poly.vertices.len();
            for i in 0..n {
                let e = poly.vertices[(i + 1) % n] - poly.vertices[i];
                if let Some(u) = e.perp_right().try_normalize() {
                    out.push(u);
                }
            }
        };
        let mut candidates = Vec::with_capacity(self.vertices.len() + o.vertices.len());
        axes(self, &mut candidates);
        axes(o, &mut candidates);
        for axis in candidates {
            let proj = |poly: &ConvexPolygon| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in &poly.vertices {
                    let d = v.dot(axis);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
                (lo, hi)
            };
            let (a_lo, a_hi) = proj(self);
            let (b_lo, b_hi) = proj(o);
            if a_hi < b_lo || b_hi < a_lo {
                return false;
            }
        }
        true
    }

    /// Minimal distance between two convex polygons (0 when overlapping).
    pub fn distance(&self, o: &ConvexPolygon) -> f64 {
        if self.overlaps(o) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let n = self.vertices.len();
        let m = o.vertices.len();
        for i in 0..n {
            let a0 = self.vertices[i];
            let a1 = self.vertices[(i + 1) % n];
            for j in 0..m {
                let b0 = o.vertices[j];
                let b1 = o.vertices[(j + 1) % m];
                best = best.min(segment_segment_dist(a0, a1, b0, b1));
            }
        }
        best
    }

    /// Portion of the segment `[p, q]` lying strictly inside the polygon,
    /// as a parameter length in `[0, 1]`. Zero for grazing contact.
    pub fn segment_interior_overlap(&self, p: Vec2, q: Vec2) -> f64 {
        // Liang-Barsky style clipping against each edge half-plane.
        let d = q - p;
        let mut t_enter: f64 = 0.0;
        let mut t_exit: f64 = 1.0;
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let edge = b - a;
            // Inside is where cross(edge, x - a) >= 0.
            let denom = edge.cross(d);
            let num = edge.cross(p - a);
            if denom.abs() < 1e-15 {
                if num < 1e-9 {
                    // Parallel and outside, or running along the boundary
                    // itself: no strict interior overlap.
                    return 0.0;
                }
            } else {
                let t = -num / denom;
                if denom > 0.0 {
                    t_enter = t_enter.max(t);
                } else {
                    t_exit = t_exit.min(t);
                }
            }
        }
        (t_exit - t_enter).max(0.0)
    }
}

/// Twice the signed area of a polygon (positive for counterclockwise).
pub fn signed_area(vertices: &[Vec2]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += vertices[i].cross(vertices[(i + 1) % n]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_intersection_and_emptiness() {
        let a = Interval::new(-2.0, 1.0);
        let b = Interval::new(0.0, 3.0);
        let c = a.intersect(&b);
        assert_eq!(c, Interval::new(0.0, 1.0));
        assert!(!c.is_empty());
        let d = Interval::new(2.0, 3.0).intersect(&Interval::new(-1.0, 1.0));
        assert!(d.is_empty());
    }

    #[test]
    fn perp_right_points_right_of_travel() {
        // Driving along +y, the driver's right is +x.
        let t = Vec2::new(0.0, 1.0);
        assert_eq!(t.perp_right(), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn polygon_overlap_and_distance() {
        let a = ConvexPolygon::oriented_box(Vec2::ZERO, Vec2::new(1.0, 0.0), 2.0, 1.0);
        let b = ConvexPolygon::oriented_box(Vec2::new(5.0, 0.0), Vec2::new(1.0, 0.0), 2.0, 1.0);
        assert!(!a.overlaps(&b));
        assert!((a.distance(&b) - 1.0).abs() < 1e-12);
        let c = ConvexPolygon::oriented_box(Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0), 2.0, 1.0);
        assert!(a.overlaps(&c));
        assert_eq!(a.distance(&c), 0.0);
    }

    #[test]
    fn segment_clipping_through_box() {
        let b = ConvexPolygon::oriented_box(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 1.0, 1.0);
        // Straight through: half of the [-2, 2] segment is inside.
        let f = b.segment_interior_overlap(Vec2::new(-2.0, 0.0), Vec2::new(2.0, 0.0));
        assert!((f - 0.5).abs() < 1e-12);
        // Grazing along the top edge: no interior overlap.
        let g = b.segment_interior_overlap(Vec2::new(-2.0, 1.0), Vec2::new(2.0, 1.0));
        assert!(g.abs() < 1e-12);
        // Fully outside.
        let h = b.segment_interior_overlap(Vec2::new(-2.0, 2.0), Vec2::new(2.0, 2.0));
        assert_eq!(h, 0.0);
    }
}
