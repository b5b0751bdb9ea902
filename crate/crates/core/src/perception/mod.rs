//! Conveyor brick pose estimation from depth frames.
//!
//! The pipeline mirrors what a depth camera over a conveyor would run:
//! back-project the frame through the pinhole model, fit and remove the
//! conveyor plane with MLESAC, keep the points in a height band above it,
//! and read the brick pose off the minimum-area rectangle of their convex
//! hull. [`render_depth`] provides the synthetic frames.

pub mod io;
mod mlesac;
mod render;

pub use mlesac::{least_squares_plane, mlesac_plane, MlesacParams, PlaneFit, INLIER_BAND};
pub use render::{backproject, render_depth, Scene};

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::column::{BrickDims, BrickPose};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull_2d, min_area_obb, normalize_half_turn, OrientedBox2D, Vec2, Vec3};

/// Footprint extents may deviate this much (relative) from the brick before
/// the estimate is rejected.
pub const EXTENT_TOLERANCE: f64 = 0.25;

/// Camera-to-world rigid transform, rotation stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: Vec3,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Vec3::ZERO,
    };

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.rotate(v) + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub pose: RigidTransform,
}

impl CameraModel {
    /// 640×480, 525 px focal length, principal point at the image center,
    /// `height` meters above `(center, plane_z)` looking straight down.
    /// Image `u` follows world +x and image `v` world -y.
    pub fn looking_down(center: Vec2, plane_z: f64, height: f64) -> Self {
        Self::looking_down_with(CameraIntrinsics::default(), center, plane_z, height)
    }

    pub fn looking_down_with(k: CameraIntrinsics, center: Vec2, plane_z: f64, height: f64) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: (k.width as f64 - 1.0) / 2.0,
            cy: (k.height as f64 - 1.0) / 2.0,
            width: k.width,
            height: k.height,
            pose: RigidTransform {
                rotation: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
                translation: center.extend(plane_z + height),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(vec![format!("invalid camera intrinsics {self:?}")]))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fx: 525.0,
            fy: 525.0,
        }
    }
}

/// Row-major depth frame in meters; 0 marks a missing return.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub depths: Vec<f64>,
}

impl DepthImage {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            depths: vec![0.0; width as usize * height as usize],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

/// Plane `normal · x = d` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneModel {
    pub normal: Vec3,
    pub d: f64,
}

impl PlaneModel {
    /// Normal is normalized and oriented so its first non-zero component,
    /// checked z first, is positive.
    pub fn from_normal_point(normal: Vec3, point: Vec3) -> Self {
        let mut n = normal.normalized().unwrap_or(Vec3::UNIT_Z);
        let key = [n.z, n.y, n.x].into_iter().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if key < 0.0 {
            n = -n;
        }
        Self {
            normal: n,
            d: n.dot(point),
        }
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p) - self.d
    }

    /// Orthonormal in-plane axes; the first follows world x where possible.
    pub fn chart(&self) -> (Vec3, Vec3) {
        let n = self.normal;
        let seed = if n.x.abs() < 0.9 {
            Vec3::new(1.0, 0.0, 0.0)
        } else {
            Vec3::new(0.0, 1.0, 0.0)
        };
        let e1 = (seed - n * seed.dot(n))
            .normalized()
            .expect("seed not parallel to normal");
        (e1, n.cross(e1))
    }

    pub fn origin(&self) -> Vec3 {
        self.normal * self.d
    }
}

/// Keeps the points whose signed height above `plane` lies in `band`.
pub fn filter_roi(cloud: &PointCloud, plane: &PlaneModel, band: (f64, f64)) -> Result<PointCloud> {
    let points: Vec<Vec3> = cloud
        .points
        .iter()
        .copied()
        .filter(|&p| {
            let h = plane.distance(p);
            h >= band.0 && h <= band.1
        })
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyResult(format!(
            "no points between {} and {} m above the conveyor",
            band.0, band.1
        )));
    }
    Ok(PointCloud { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPose {
    /// Footprint in the plane chart (world x/y for a horizontal conveyor).
    #[serde(rename = "box")]
    pub footprint: OrientedBox2D,
    /// Brick top height above the plane.
    pub z: f64,
    /// Brick center in world coordinates.
    pub position: Vec3,
    /// Milliseconds spent producing the estimate.
    pub timestamp_ms: f64,
}

impl EstimatedPose {
    /// The estimate as a brick pose, yaw measured along the brick's `l` axis
    /// and reported in `[0, π)`.
    pub fn brick_pose(&self, dims: &BrickDims) -> BrickPose {
        let yaw = if dims.w > dims.l {
            self.footprint.yaw + FRAC_PI_2
        } else {
            self.footprint.yaw
        };
        BrickPose {
            position: self.position,
            yaw: normalize_half_turn(yaw),
        }
    }
}

/// Minimum-area footprint of the brick points above `plane`.
///
/// Points are projected into the plane chart and reduced to their largest
/// connected cluster first, so stray noise returns in the height band
/// cannot stretch the hull.
pub fn estimate_brick_pose(cloud: &PointCloud, plane: &PlaneModel, dims: &BrickDims) -> Result<EstimatedPose> {
    let start = Instant::now();
    if cloud.points.len() < 3 {
        return Err(Error::EmptyResult(format!(
            "{} points are not enough for a footprint",
            cloud.points.len()
        )));
    }
    let (e1, e2) = plane.chart();
    let origin = plane.origin();
    let flat: Vec<Vec2> = cloud
        .points
        .iter()
        .map(|&p| {
            let d = p - origin;
            Vec2::new(d.dot(e1), d.dot(e2))
        })
        .collect();
    // cell size from the sparser of the expected and the observed density
    let (mut lo, mut hi) = (flat[0], flat[0]);
    for p in &flat {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let area = (dims.l * dims.w).max((hi.x - lo.x) * (hi.y - lo.y));
    let spacing = (area / flat.len() as f64).sqrt();
    let keep = largest_cluster(&flat, 3.0 * spacing);
    let kept: Vec<Vec2> = keep.iter().map(|&i| flat[i]).collect();

    let hull = convex_hull_2d(&kept).map_err(|e| Error::EmptyResult(e.to_string()))?;
    let footprint = min_area_obb(&hull)?;
    let (ea, eb) = dims.half_extents();
    let (a, b) = footprint.half_extents;
    if (a - ea).abs() > EXTENT_TOLERANCE * ea || (b - eb).abs() > EXTENT_TOLERANCE * eb {
        return Err(Error::ShapeMismatch {
            found_a: a,
            found_b: b,
            expected_a: ea,
            expected_b: eb,
        });
    }

    let top = keep.iter().map(|&i| plane.distance(cloud.points[i])).sum::<f64>() / keep.len() as f64;
    let position = origin + e1 * footprint.center.x + e2 * footprint.center.y + plane.normal * (top - dims.h / 2.0);
    Ok(EstimatedPose {
        footprint,
        z: top,
        position,
        timestamp_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Indices of the largest 8-connected cluster of occupied grid cells.
fn largest_cluster(points: &[Vec2], cell: f64) -> Vec<usize> {
    let key = |p: Vec2| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let mut seen: HashMap<(i64, i64), usize> = HashMap::with_capacity(cells.len());
    let mut best: (usize, Vec<(i64, i64)>) = (0, Vec::new());
    let mut starts: Vec<_> = cells.keys().copied().collect();
    starts.sort_unstable();
    for start in starts {
        if seen.contains_key(&start) {
            continue;
        }
        let mut members = vec![start];
        let mut count = 0;
        seen.insert(start, 0);
        let mut head = 0;
        while head < members.len() {
            let (cx, cy) = members[head];
            head += 1;
            count += cells[&(cx, cy)].len();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let n = (cx + dx, cy + dy);
                    if cells.contains_key(&n) && !seen.contains_key(&n) {
                        seen.insert(n, 0);
                        members.push(n);
                    }
                }
            }
        }
        if count > best.0 {
            best = (count, members);
        }
    }
    let mut idx: Vec<usize> = best.1.iter().flat_map(|c| cells[c].iter().copied()).collect();
    idx.sort_unstable();
    idx
}

/// Perception settings shared by the estimator and the assembly loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub camera: CameraIntrinsics,
    /// Camera height above the conveyor.
    pub mount_height: f64,
    /// Additive Gaussian depth noise, meters.
    pub noise_sigma: f64,
    pub mlesac: MlesacParams,
    /// Height band above the plane kept as brick points; defaults to `(0.4·h, 2·h)`.
    pub band: Option<(f64, f64)>,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            camera: CameraIntrinsics::default(),
            mount_height: 1.0,
            noise_sigma: 0.002,
            mlesac: MlesacParams::default(),
            band: None,
        }
    }
}

impl PerceptionConfig {
    pub fn band_for(&self, dims: &BrickDims) -> (f64, f64) {
        self.band.unwrap_or((0.4 * dims.h, 2.0 * dims.h))
    }

    pub fn camera_over(&self, center: Vec2, plane_z: f64) -> CameraModel {
        CameraModel::looking_down_with(self.camera, center, plane_z, self.mount_height)
    }
}

/// Full estimate from one depth frame: back-projection, plane removal,
/// band filter and footprint. `timestamp_ms` covers all four stages.
pub fn estimate_from_depth(
    depth: &DepthImage,
    camera: &CameraModel,
    dims: &BrickDims,
    cfg: &PerceptionConfig,
    seed: u64,
) -> Result<EstimatedPose> {
    let start = Instant::now();
    let cloud = backproject(depth, camera);
    let params = MlesacParams { seed, ..cfg.mlesac };
    let fit = mlesac_plane(&cloud, &params)?;
    let roi = filter_roi(&cloud, &fit.plane, cfg.band_for(dims))?;
    let mut pose = estimate_brick_pose(&roi, &fit.plane, dims)?;
    pose.timestamp_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(pose)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIMS: BrickDims = BrickDims::STANDARD;

    fn brick_at(x: f64, y: f64, yaw: f64) -> BrickPose {
        BrickPose {
            position: Vec3::new(x, y, DIMS.h / 2.0),
            yaw,
        }
    }

    fn run(pose: BrickPose, camera_center: Vec2, noise: f64) -> Result<EstimatedPose> {
        let cfg = PerceptionConfig {
            noise_sigma: noise,
            ..Default::default()
        };
        let cam = cfg.camera_over(camera_center, 0.0);
        let scene = Scene {
            plane_z: 0.0,
            brick: Some((pose, DIMS)),
        };
        let depth = render_depth(&scene, &cam, noise, 1)?;
        estimate_from_depth(&depth, &cam, &DIMS, &cfg, 2)
    }

    #[test]
    fn roi_band_examples() {
        let plane = PlaneModel::from_normal_point(Vec3::UNIT_Z, Vec3::ZERO);
        let floor = PointCloud {
            points: vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
        };
        assert!(matches!(
            filter_roi(&floor, &plane, (0.005, 0.1)),
            Err(Error::EmptyResult(_))
        ));
        let tops = PointCloud {
            points: vec![Vec3::new(0.0, 0.0, 0.025), Vec3::new(0.2, 0.1, 0.025)],
        };
        assert_eq!(filter_roi(&tops, &plane, (0.005, 0.1)).unwrap().points.len(), 2);
        assert!(filter_roi(&PointCloud::default(), &plane, (0.005, 0.1)).is_err());
    }

    #[test]
    fn round_trip_recovers_rotated_brick() {
        let truth = brick_at(0.4, -0.3, 0.6);
        let est = run(truth, Vec2::new(0.4, -0.3), 0.0).unwrap();
        let got = est.brick_pose(&DIMS);
        assert!((got.position - truth.position).norm() < 1e-3, "{got:?}");
        let dyaw = normalize_half_turn(got.yaw - truth.yaw);
        assert!(dyaw.min(std::f64::consts::PI - dyaw) < 0.01);
        assert!((est.z - DIMS.h).abs() < 1e-9);
    }

    #[test]
    fn axis_aligned_brick_has_zero_yaw() {
        // long side along x: l axis along y
        let est = run(brick_at(0.0, 0.0, FRAC_PI_2), Vec2::ZERO, 0.0).unwrap();
        assert_eq!(est.footprint.yaw, 0.0);
        assert!(est.position.xy().norm() < 1e-9);
    }

    #[test]
    fn oversized_footprint_is_rejected() {
        let plane = PlaneModel::from_normal_point(Vec3::UNIT_Z, Vec3::ZERO);
        let side = 3.0 * DIMS.w;
        let n = 60;
        let points = (0..n)
            .flat_map(|i| (0..n).map(move |j| Vec3::new(side * i as f64 / n as f64, side * j as f64 / n as f64, 0.025)))
            .collect();
        let err = estimate_brick_pose(&PointCloud { points }, &plane, &DIMS).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn missing_brick_is_empty_result() {
        let cfg = PerceptionConfig::default();
        let cam = cfg.camera_over(Vec2::ZERO, 0.0);
        let depth = render_depth(
            &Scene {
                plane_z: 0.0,
                brick: None,
            },
            &cam,
            0.0,
            1,
        )
        .unwrap();
        let err = estimate_from_depth(&depth, &cam, &DIMS, &cfg, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyResult(_)));
    }

    #[test]
    fn stray_points_do_not_stretch_the_hull() {
        let plane = PlaneModel::from_normal_point(Vec3::UNIT_Z, Vec3::ZERO);
        let mut points: Vec<Vec3> = (0..50)
            .flat_map(|i| (0..10).map(move |j| Vec3::new(0.01 * i as f64, 0.01 * j as f64, 0.025)))
            .collect();
        points.push(Vec3::new(0.3, 0.4, 0.02));
        let est = estimate_brick_pose(&PointCloud { points }, &plane, &DIMS).unwrap();
        assert!((est.footprint.half_extents.0 - 0.245).abs() < 1e-9);
    }

    #[test]
    fn chart_follows_world_axes() {
        let plane = PlaneModel::from_normal_point(-Vec3::UNIT_Z, Vec3::new(0.0, 0.0, 0.5));
        assert_eq!(plane.normal, Vec3::UNIT_Z);
        assert_eq!(plane.d, 0.5);
        let (e1, e2) = plane.chart();
        assert_eq!(e1, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(e2, Vec3::new(0.0, 1.0, 0.0));
    }
}
