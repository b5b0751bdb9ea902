//! Planar and spatial primitives: vectors, monotone-chain convex hull,
//! rotating-calipers minimum-area rectangle, separating-axis overlap.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this (per coordinate) are merged before hulling.
pub const DEDUP_TOLERANCE: f64 = 1e-12;

/// Penetration depth below which two boxes are considered touching, not overlapping.
pub const OVERLAP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counterclockwise quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn extend(self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
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
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const UNIT_Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn xy(self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Simple polygon given by its vertex loop (no repeated closing vertex).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon2D {
    pub vertices: Vec<Vec2>,
}

impl Polygon2D {
    /// Shoelace area, positive for counterclockwise loops.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
            / 2.0
    }
}

/// Rectangle with `half_extents.0 >= half_extents.1`; `yaw` is the direction
/// of the long axis in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox2D {
    pub center: Vec2,
    pub half_extents: (f64, f64),
    pub yaw: f64,
}

impl OrientedBox2D {
    /// Builds a canonical box from an arbitrary axis assignment: `ext_u` is
    /// the half extent along `angle_u`, `ext_v` the one perpendicular to it.
    pub fn canonical(center: Vec2, ext_u: f64, ext_v: f64, angle_u: f64) -> Self {
        let (a, b, yaw) = if ext_u >= ext_v {
            (ext_u, ext_v, angle_u)
        } else {
            (ext_v, ext_u, angle_u + FRAC_PI_2)
        };
        let mut yaw = normalize_half_turn(yaw);
        if a - b <= 1e-12 * a {
            // square: both axes qualify, keep the smaller angle
            yaw = yaw.min(normalize_half_turn(yaw + FRAC_PI_2));
        }
        Self {
            center,
            half_extents: (a, b),
            yaw,
        }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.0 * self.half_extents.1
    }

    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.yaw);
        (u, u.perp())
    }

    /// Corners in counterclockwise order.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let (a, b) = self.half_extents;
        let c = self.center;
        [
            c + u * a + v * b,
            c - u * a + v * b,
            c - u * a - v * b,
            c + u * a - v * b,
        ]
    }

    /// Signed distance from `p` to the boundary (negative inside).
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        let (u, v) = self.axes();
        let d = p - self.center;
        let du = d.dot(u).abs() - self.half_extents.0;
        let dv = d.dot(v).abs() - self.half_extents.1;
        if du > 0.0 && dv > 0.0 {
            du.hypot(dv)
        } else {
            du.max(dv)
        }
    }
}

/// Wraps an angle into `[0, π)`.
pub fn normalize_half_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Rigid rotation of `p` about `center`.
pub fn rotate_about(p: Vec2, center: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    let d = p - center;
    center + Vec2::new(c * d.x - s * d.y, s * d.x + c * d.y)
}

/// Monotone-chain convex hull. Output is strictly convex, counterclockwise,
/// starting from the lexicographically smallest point.
pub fn convex_hull_2d(points: &[Vec2]) -> Result<Polygon2D> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "hull needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|b, a| (a.x - b.x).abs() <= DEDUP_TOLERANCE && (a.y - b.y).abs() <= DEDUP_TOLERANCE);

    // drops the middle point of any left-turn-free triple, so collinear points go too
    let turns_left = |o: Vec2, a: Vec2, b: Vec2| {
        let (u, v) = (a - o, b - o);
        u.cross(v) > DEDUP_TOLERANCE * u.norm() * v.norm()
    };

    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && !turns_left(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && !turns_left(hull[hull.len() - 2], hull[hull.len() - 1], p) {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();

    if hull.len() < 3 {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    Ok(Polygon2D { vertices: hull })
}

/// Minimum-area enclosing rectangle of a convex polygon by rotating calipers.
///
/// One side of the result is flush with a hull edge. The three remaining
/// support vertices (far end along the edge, near end, and the farthest
/// vertex from the edge) only ever advance counterclockwise as the edge
/// index increases, so the sweep is linear in the vertex count.
pub fn min_area_obb(hull: &Polygon2D) -> Result<OrientedBox2D> {
    let v = &hull.vertices;
    let n = v.len();
    if n < 3 {
        return Err(Error::DegenerateInput(format!(
            "hull needs at least 3 vertices, got {n}"
        )));
    }

    let edge_dir = |i: usize| {
        let d = v[(i + 1) % n] - v[i];
        d * (1.0 / d.norm())
    };
    let advance = |mut k: usize, dir: Vec2| {
        for _ in 0..n {
            let next = (k + 1) % n;
            if v[next].dot(dir) > v[k].dot(dir) {
                k = next;
            } else {
                break;
            }
        }
        k
    };
    let argmax = |dir: Vec2| {
        (0..n)
            .max_by(|&a, &b| v[a].dot(dir).total_cmp(&v[b].dot(dir)))
            .unwrap_or(0)
    };

    let e0 = edge_dir(0);
    let (mut far, mut top, mut near) = (argmax(e0), argmax(e0.perp()), argmax(-e0));

    let mut best: Option<(f64, OrientedBox2D)> = None;
    for i in 0..n {
        let e = edge_dir(i);
        let up = e.perp();
        far = advance(far, e);
        top = advance(top, up);
        near = advance(near, -e);

        let origin = v[i];
        let max_e = (v[far] - origin).dot(e);
        let min_e = (v[near] - origin).dot(e);
        let max_n = (v[top] - origin).dot(up);
        let area = (max_e - min_e) * max_n;
        if best.as_ref().is_none_or(|(a, _)| area < *a) {
            let center = origin + e * (0.5 * (max_e + min_e)) + up * (0.5 * max_n);
            let obb = OrientedBox2D::canonical(center, 0.5 * (max_e - min_e), 0.5 * max_n, e.angle());
            best = Some((area, obb));
        }
    }
    best.map(|(_, b)| b)
        .ok_or_else(|| Error::DegenerateInput("empty hull".into()))
}

/// Separating-axis test over the four edge normals. Boxes that only touch
/// (penetration below [`OVERLAP_TOLERANCE`]) do not overlap.
pub fn obb_overlap(a: &OrientedBox2D, b: &OrientedBox2D) -> bool {
    let (au, av) = a.axes();
    let (bu, bv) = b.axes();
    let d = b.center - a.center;
    [au, av, bu, bv].iter().all(|&axis| {
        let ra = a.half_extents.0 * au.dot(axis).abs() + a.half_extents.1 * av.dot(axis).abs();
        let rb = b.half_extents.0 * bu.dot(axis).abs() + b.half_extents.1 * bv.dot(axis).abs();
        d.dot(axis).abs() < ra + rb - OVERLAP_TOLERANCE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vec2 {
        Vec2::new(x, y)
    }

    #[test]
    fn hull_drops_interior_point() {
        let pts = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0), v(0.5, 0.5)];
        let hull = convex_hull_2d(&pts).unwrap();
        assert_eq!(hull.vertices, vec![v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]);
        assert!(hull.signed_area() > 0.0);
    }

    #[test]
    fn hull_rejects_collinear_and_short_input() {
        let collinear = [v(0.0, 0.0), v(1.0, 0.0), v(2.0, 0.0)];
        assert!(matches!(convex_hull_2d(&collinear), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            convex_hull_2d(&collinear[..2]),
            Err(Error::DegenerateInput(_))
        ));
        // duplicates collapse to two distinct points
        let dup = [v(0.0, 0.0), v(1.0, 1.0), v(1.0, 1.0 + 1e-13)];
        assert!(convex_hull_2d(&dup).is_err());
    }

    #[test]
    fn hull_removes_collinear_edge_points() {
        let pts = [v(0.0, 0.0), v(0.5, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)];
        assert_eq!(convex_hull_2d(&pts).unwrap().vertices.len(), 4);
    }

    #[test]
    fn box_of_rectangle_is_itself() {
        let rect = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 0.5), v(0.0, 0.5)];
        let obb = min_area_obb(&convex_hull_2d(&rect).unwrap()).unwrap();
        assert!((obb.center.x - 0.5).abs() < 1e-15 && (obb.center.y - 0.25).abs() < 1e-15);
        assert!((obb.half_extents.0 - 0.5).abs() < 1e-15);
        assert!((obb.half_extents.1 - 0.25).abs() < 1e-15);
        assert_eq!(obb.yaw, 0.0);
    }

    #[test]
    fn box_of_rotated_rectangle_reports_rotation() {
        let rho = PI / 6.0;
        let rect: Vec<_> = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 0.5), v(0.0, 0.5)]
            .iter()
            .map(|&p| rotate_about(p, Vec2::ZERO, rho))
            .collect();
        let obb = min_area_obb(&convex_hull_2d(&rect).unwrap()).unwrap();
        assert!((obb.yaw - 0.523_598_775_598_298_8).abs() < 1e-12);
        assert!((obb.half_extents.0 - 0.5).abs() < 1e-12);
        assert!((obb.half_extents.1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn square_prefers_smaller_yaw() {
        let sq: Vec<_> = [v(0.0, 0.0), v(1.0, 0.0), v(1.0, 1.0), v(0.0, 1.0)]
            .iter()
            .map(|&p| rotate_about(p, Vec2::ZERO, 2.0))
            .collect();
        let obb = min_area_obb(&convex_hull_2d(&sq).unwrap()).unwrap();
        assert!(obb.yaw < FRAC_PI_2);
        assert!((obb.yaw - (2.0 - FRAC_PI_2)).abs() < 1e-9);
    }

    #[test]
    fn overlap_cases() {
        let unit = |x: f64| OrientedBox2D {
            center: v(x, 0.0),
            half_extents: (0.5, 0.5),
            yaw: 0.0,
        };
        assert!(!obb_overlap(&unit(0.0), &unit(3.0)));
        assert!(obb_overlap(&unit(0.0), &unit(0.0)));
        assert!(!obb_overlap(&unit(0.0), &unit(1.0)));
        assert!(obb_overlap(&unit(0.0), &unit(0.9)));
        // diamond next to a square: axis-aligned projections overlap but a diagonal axis separates
        let diamond = OrientedBox2D {
            center: v(1.2, 1.2),
            half_extents: (0.5, 0.5),
            yaw: PI / 4.0,
        };
        assert!(!obb_overlap(&unit(0.0), &diamond));
    }

    #[test]
    fn rotation_examples() {
        let p = rotate_about(v(1.0, 0.0), Vec2::ZERO, FRAC_PI_2);
        assert!((p.x).abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15);
        let q = v(0.3, -2.0);
        assert_eq!(rotate_about(q, q, 1.234), q);
        let r = rotate_about(v(2.0, 1.0), v(1.0, 1.0), PI);
        assert!((r.x).abs() < 1e-15 && (r.y - 1.0).abs() < 1e-15);
    }

    #[test]
    fn signed_distance_sign() {
        let b = OrientedBox2D {
            center: Vec2::ZERO,
            half_extents: (1.0, 0.5),
            yaw: 0.0,
        };
        assert_eq!(b.signed_distance(Vec2::ZERO), -0.5);
        assert_eq!(b.signed_distance(v(2.0, 0.0)), 1.0);
        assert!((b.signed_distance(v(4.0, 4.5)) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn angle_wrapping() {
        assert_eq!(normalize_half_turn(-0.1), PI - 0.1);
        assert!((normalize_half_turn(PI + 0.2) - 0.2).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-15);
        assert_eq!(wrap_angle(PI), PI);
    }
}
