use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{CameraModel, DepthImage, PointCloud};
use crate::column::{BrickDims, BrickPose};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Conveyor plane `z = plane_z` with at most one brick resting on it.
#[derive(Debug, Clone, Copy)]
pub struct Scene {
    pub plane_z: f64,
    pub brick: Option<(BrickPose, BrickDims)>,
}

/// Ray casts every pixel against the conveyor plane and the brick cuboid.
/// Stored values are camera-frame z depths; pixels without a hit read 0.
pub fn render_depth(scene: &Scene, camera: &CameraModel, noise_sigma: f64, seed: u64) -> Result<DepthImage> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Geometry(format!(
            "noise sigma must be non-negative, got {noise_sigma}"
        )));
    }
    let origin = camera.pose.translation;
    let axis = camera.pose.rotate(Vec3::UNIT_Z);
    let plane_hit = |dir: Vec3| {
        let s = (scene.plane_z - origin.z) / dir.z;
        (s.is_finite() && s > 0.0).then_some(s)
    };
    if plane_hit(axis).is_none() {
        return Err(Error::Geometry(
            "camera optical axis does not reach the conveyor plane".into(),
        ));
    }

    let (width, height) = (camera.width as usize, camera.height as usize);
    let mut depths = vec![0.0; width * height];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("valid sigma"));

    let cuboid = scene.brick.map(|(pose, dims)| Cuboid::new(&pose, &dims));
    for v in 0..height {
        for u in 0..width {
            // camera ray with unit z component, so the hit parameter is the depth
            let local = Vec3::new(
                (u as f64 - camera.cx) / camera.fx,
                (v as f64 - camera.cy) / camera.fy,
                1.0,
            );
            let dir = camera.pose.rotate(local);
            let mut depth = plane_hit(dir).unwrap_or(f64::INFINITY);
            if let Some(s) = cuboid.as_ref().and_then(|c| c.hit(origin, dir)) {
                depth = depth.min(s);
            }
            if depth.is_finite() {
                if let Some(n) = &noise {
                    depth += n.sample(&mut rng);
                }
                depths[v * width + u] = depth.max(0.0);
            }
        }
    }
    Ok(DepthImage {
        width: camera.width,
        height: camera.height,
        depths,
    })
}

/// Pinhole back-projection of every non-zero pixel into the world frame.
pub fn backproject(depth: &DepthImage, camera: &CameraModel) -> PointCloud {
    let width = depth.width as usize;
    let points = depth
        .depths
        .iter()
        .enumerate()
        .filter(|(_, &z)| z > 0.0)
        .map(|(i, &z)| {
            let (u, v) = ((i % width) as f64, (i / width) as f64);
            let local = Vec3::new((u - camera.cx) * z / camera.fx, (v - camera.cy) * z / camera.fy, z);
            camera.pose.apply(local)
        })
        .collect();
    PointCloud { points }
}

struct Cuboid {
    center: Vec3,
    cos: f64,
    sin: f64,
    half: Vec3,
}

impl Cuboid {
    fn new(pose: &BrickPose, dims: &BrickDims) -> Self {
        let (sin, cos) = pose.yaw.sin_cos();
        Self {
            center: pose.position,
            cos,
            sin,
            half: Vec3::new(dims.l / 2.0, dims.w / 2.0, dims.h / 2.0),
        }
    }

    fn to_local(&self, v: Vec3) -> Vec3 {
        Vec3::new(self.cos * v.x + self.sin * v.y, -self.sin * v.x + self.cos * v.y, v.z)
    }

    /// Entry parameter of the ray, slab method.
    fn hit(&self, origin: Vec3, dir: Vec3) -> Option<f64> {
        let o = self.to_local(origin - self.center);
        let d = self.to_local(dir);
        let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
        for (o, d, h) in [
            (o.x, d.x, self.half.x),
            (o.y, d.y, self.half.y),
            (o.z, d.z, self.half.z),
        ] {
            if d.abs() < 1e-300 {
                if o.abs() > h {
                    return None;
                }
                continue;
            }
            let (a, b) = ((-h - o) / d, (h - o) / d);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}
