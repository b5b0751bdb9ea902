//! Maximum-likelihood sample consensus plane fitting.
//!
//! Each random three-point hypothesis is scored by the negative log
//! likelihood of the residuals under a two-component mixture: zero-mean
//! Gaussian inliers with spread `inlier_sigma`, and outliers uniform over a
//! band of width `outlier_width`. The inlier weight `γ` is re-estimated per
//! hypothesis with a few expectation-maximisation steps.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PlaneModel, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlesacParams {
    pub iterations: u32,
    pub inlier_sigma: f64,
    pub outlier_width: f64,
    pub em_steps: u32,
    pub seed: u64,
    /// Hypotheses are scored on a fixed random subset of at most this many points.
    pub score_points: usize,
}

impl Default for MlesacParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_sigma: 0.002,
            outlier_width: 0.5,
            em_steps: 5,
            seed: 0,
            score_points: 4096,
        }
    }
}

impl MlesacParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.iterations == 0 {
            problems.push("iterations must be at least 1".to_string());
        }
        if !(self.inlier_sigma.is_finite() && self.inlier_sigma > 0.0) {
            problems.push(format!("inlier_sigma must be positive, got {}", self.inlier_sigma));
        }
        if !(self.outlier_width.is_finite() && self.outlier_width > 0.0) {
            problems.push(format!("outlier_width must be positive, got {}", self.outlier_width));
        }
        if self.score_points < 3 {
            problems.push("score_points must be at least 3".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: PlaneModel,
    pub inliers: Vec<bool>,
    /// Negative log likelihood of the winning hypothesis over the scoring subset.
    pub score: f64,
    pub mixing: f64,
}

impl PlaneFit {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

/// Inlier band as a multiple of `inlier_sigma` (two-sided 95 %).
pub const INLIER_BAND: f64 = 1.96;

pub fn mlesac_plane(cloud: &PointCloud, params: &MlesacParams) -> Result<PlaneFit> {
    params.validate()?;
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fit needs 3 points, got {}",
            pts.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let subset: Vec<usize> = if pts.len() > params.score_points {
        let mut idx = index::sample(&mut rng, pts.len(), params.score_points).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..pts.len()).collect()
    };

    let scale = extent(pts).max(f64::MIN_POSITIVE);
    let sigma = params.inlier_sigma;
    let gauss_norm = 1.0 / (sigma * (2.0 * PI).sqrt());
    let uniform = 1.0 / params.outlier_width;
    let mut residuals = vec![0.0; subset.len()];

    let mut best: Option<(f64, f64, PlaneModel)> = None;
    for _ in 0..params.iterations {
        let sample = index::sample(&mut rng, pts.len(), 3);
        let (a, b, c) = (pts[sample.index(0)], pts[sample.index(1)], pts[sample.index(2)]);
        let n = (b - a).cross(c - a);
        if n.norm() <= 1e-12 * scale * scale {
            continue;
        }
        let plane = PlaneModel::from_normal_point(n, a);

        for (r, &i) in residuals.iter_mut().zip(&subset) {
            let d = plane.distance(pts[i]);
            *r = gauss_norm * (-0.5 * d * d / (sigma * sigma)).exp();
        }
        let mut gamma = 0.5;
        for _ in 0..params.em_steps {
            let total: f64 = residuals
                .iter()
                .map(|&g| {
                    let inl = gamma * g;
                    inl / (inl + (1.0 - gamma) * uniform)
                })
                .sum();
            gamma = total / residuals.len() as f64;
        }
        let score: f64 = -residuals
            .iter()
            .map(|&g| (gamma * g + (1.0 - gamma) * uniform).ln())
            .sum::<f64>();
        if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
            best = Some((score, gamma, plane));
        }
    }

    let (score, mixing, hypothesis) =
        best.ok_or_else(|| Error::DegenerateInput("every sampled triple was collinear".into()))?;
    let band = INLIER_BAND * sigma;
    let mask = |plane: &PlaneModel| pts.iter().map(|&p| plane.distance(p).abs() <= band).collect::<Vec<_>>();
    let first = mask(&hypothesis);
    let plane = least_squares_plane(pts.iter().zip(&first).filter(|(_, &m)| m).map(|(p, _)| *p)).unwrap_or(hypothesis);
    Ok(PlaneFit {
        inliers: mask(&plane),
        plane,
        score,
        mixing,
    })
}

fn extent(pts: &[Vec3]) -> f64 {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    (hi - lo).norm()
}

/// Total least squares plane: through the centroid, normal along the
/// smallest-eigenvalue axis of the scatter matrix.
pub fn least_squares_plane(points: impl Iterator<Item = Vec3> + Clone) -> Option<PlaneModel> {
    let (sum, count) = points.clone().fold((Vec3::ZERO, 0usize), |(s, n), p| (s + p, n + 1));
    if count < 3 {
        return None;
    }
    let centroid = sum * (1.0 / count as f64);
    let mut scatter = Matrix3::<f64>::zeros();
    for p in points {
        let d = p - centroid;
        let v = nalgebra::Vector3::new(d.x, d.y, d.z);
        scatter += v * v.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (k, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let col = eig.eigenvectors.column(k);
    // the two larger eigenvalues must span a plane
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-24 * sorted[2].max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(PlaneModel::from_normal_point(
        Vec3::new(col[0], col[1], col[2]),
        centroid,
    ))
}
