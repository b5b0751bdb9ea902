//! Parametric spiral brick columns.
//!
//! A column is one base layer of bricks, repeated `layers` times, each copy
//! turned by `phi` about the base centroid and lifted by one brick height.
//! Three base families are supported:
//!
//! * **segments** – `s` straight runs joined at a constant turn `theta`
//!   (`π` gives two antiparallel rows, `π/2` a rectangle),
//! * **polygon** – one run per polygon edge, described by its exterior
//!   turning angles, so regular and concave outlines share one code path,
//! * **polynomial** – bricks marched along the closed loop formed by `f`
//!   and `-f` over a fixed domain.
//!
//! For the first two families consecutive run anchors are one segment pitch
//! apart (see [`segment_margin`]). A run lies on the outer side of its edge
//! line and fills the pitch except for a `τ·w` clearance. Runs meeting at a
//! left turn diverge and need no clearance there, so the clearance sits at
//! the run's start unless only its end vertex is a right (reflex) turn, in
//! which case it moves to the end.

mod export;
pub mod presets;
mod validate;

pub use export::{export_obj, export_svg_topview, obj_string, svg_topview_string, LayerSelection};
pub use presets::{preset, preset_base, PRESET_NAMES};
pub use validate::{validate_column, OverlapFinding, ValidationReport};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate_about, wrap_angle, OrientedBox2D, Vec2, Vec3};

/// Layer twist used when a spec leaves `phi` out: 4° per layer.
pub const DEFAULT_PHI: f64 = PI / 45.0;

/// Maximum distance between the end of the anchor walk and its start.
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

const ANGLE_EPS: f64 = 1e-12;

/// Brick size. `l` runs along the laying direction, `w` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrickDims {
    pub l: f64,
    pub w: f64,
    pub h: f64,
}

impl BrickDims {
    /// 0.1 × 0.5 × 0.025 m.
    pub const STANDARD: BrickDims = BrickDims {
        l: 0.1,
        w: 0.5,
        h: 0.025,
    };

    pub fn validate(&self) -> Result<()> {
        if [self.l, self.w, self.h].iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "brick dimensions must be positive, got l={} w={} h={}",
                self.l, self.w, self.h
            )))
        }
    }

    /// Footprint half extents sorted long first.
    pub fn half_extents(&self) -> (f64, f64) {
        let (a, b) = (self.l.max(self.w), self.l.min(self.w));
        (a / 2.0, b / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentBaseSpec {
    /// Number of segments.
    pub s: usize,
    /// Bricks per segment, `s` entries.
    pub blocks: Vec<u32>,
    /// Turn between consecutive segment directions.
    pub theta: f64,
    /// Gap between neighbouring bricks of one segment, meters.
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonBaseSpec {
    /// Exterior turn at the start vertex of each edge; negative at reflex vertices.
    pub turning_angles: Vec<f64>,
    /// Bricks on every edge.
    pub blocks: u32,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBaseSpec {
    /// `f(x) = Σ c_i x^i`, lowest order first.
    pub coefficients: Vec<f64>,
    pub domain: (f64, f64),
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BaseSpec {
    Segments(SegmentBaseSpec),
    Polygon(PolygonBaseSpec),
    Polynomial(PolynomialBaseSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub base: BaseSpec,
    pub dims: BrickDims,
    pub layers: u32,
    #[serde(default = "default_phi")]
    pub phi: f64,
}

fn default_phi() -> f64 {
    DEFAULT_PHI
}

/// Brick center plus the heading of its `l` axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrickPose {
    pub position: Vec3,
    pub yaw: f64,
}

impl BrickPose {
    pub fn footprint(&self, dims: &BrickDims) -> OrientedBox2D {
        OrientedBox2D::canonical(self.position.xy(), dims.l / 2.0, dims.w / 2.0, self.yaw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub layer: u32,
    pub index_in_layer: u32,
    pub pose: BrickPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnModel {
    pub spec: ColumnSpec,
    /// Gap between the end and the start of the base anchor walk (0 for polynomial bases).
    pub closure_residual: f64,
    pub placements: Vec<Placement>,
}

impl ColumnModel {
    pub fn bricks_per_layer(&self) -> usize {
        match self.spec.layers {
            0 => 0,
            l => self.placements.len() / l as usize,
        }
    }

    pub fn layer(&self, k: u32) -> impl Iterator<Item = &Placement> {
        self.placements.iter().filter(move |p| p.layer == k)
    }
}

/// `1 / tan(θ/2)`, with the limit value 0 at `θ = π`.
pub fn angle_factor(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::Domain(format!("angle factor needs 0 < θ ≤ π, got {theta}")));
    }
    if theta == PI {
        return Ok(0.0);
    }
    // half-angle identities; each is free of cancellation on its half of the range
    let (s, c) = theta.sin_cos();
    Ok(if theta <= FRAC_PI_2 {
        (1.0 + c) / s
    } else {
        s / (1.0 - c)
    })
}

/// Segment pitch `B·l + τ(θ)·w + λ·(B − 1)`.
pub fn segment_margin(blocks: u32, dims: &BrickDims, theta: f64, lambda: f64) -> Result<f64> {
    if blocks == 0 {
        return Err(Error::Domain("segment needs at least one brick".into()));
    }
    let b = blocks as f64;
    Ok(b * dims.l + angle_factor(theta)? * dims.w + lambda * (b - 1.0))
}

/// Center spacing of two curve bricks whose headings differ by `theta`:
/// `w·sin((π − θ)/2) + κ`.
pub fn polynomial_margin(theta: f64, w: f64, kappa: f64) -> Result<f64> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("brick angle must lie in [0, π], got {theta}")));
    }
    Ok(w * ((PI - theta) / 2.0).sin() + kappa)
}

impl SegmentBaseSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.s < 2 {
            problems.push(format!("need at least 2 segments, got {}", self.s));
        }
        if self.blocks.len() != self.s {
            problems.push(format!(
                "{} block counts given for {} segments",
                self.blocks.len(),
                self.s
            ));
        }
        if self.blocks.contains(&0) {
            problems.push("every segment needs at least one brick".to_string());
        }
        if !(self.theta > 0.0 && self.theta <= PI) {
            problems.push(format!("theta must lie in (0, π], got {}", self.theta));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            problems.push(format!("lambda must be non-negative, got {}", self.lambda));
        }
        let all_equal = self.blocks.windows(2).all(|w| w[0] == w[1]);
        if (self.theta - PI).abs() <= ANGLE_EPS && !all_equal {
            problems.push(format!(
                "parallel segments need equal block counts, got {:?}",
                self.blocks
            ));
        }
        if (self.theta - FRAC_PI_2).abs() <= ANGLE_EPS && !self.blocks.is_empty() {
            let n = self.blocks.len();
            if (0..n).any(|i| self.blocks[i] != self.blocks[(i + 2) % n]) {
                problems.push(format!(
                    "orthogonal segments need equal block counts on opposite sides, got {:?}",
                    self.blocks
                ));
            }
        }
        join_problems(problems)
    }
}

impl PolygonBaseSpec {
    /// Regular convex polygon with `n` edges.
    pub fn regular(n: usize, blocks: u32, lambda: f64) -> Self {
        Self {
            turning_angles: vec![2.0 * PI / n as f64; n],
            blocks,
            lambda,
        }
    }

    /// Five-pointed star outline: ten edges alternating 144° tips and
    /// -72° reflex turns.
    pub fn star_decagon(blocks: u32, lambda: f64) -> Self {
        let turns = [4.0 * PI / 5.0, -2.0 * PI / 5.0];
        Self {
            turning_angles: turns.iter().copied().cycle().take(10).collect(),
            blocks,
            lambda,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let n = self.turning_angles.len();
        if n < 3 {
            problems.push(format!("polygon needs at least 3 edges, got {n}"));
        }
        if self.blocks == 0 {
            problems.push("every edge needs at least one brick".to_string());
        }
        if self.turning_angles.iter().any(|a| !(a.is_finite() && a.abs() < PI)) {
            problems.push("turning angles must lie strictly between -π and π".to_string());
        }
        let total: f64 = self.turning_angles.iter().sum();
        if (total - 2.0 * PI).abs() > 1e-9 {
            problems.push(format!("turning angles sum to {total}, expected 2π"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            problems.push(format!("lambda must be non-negative, got {}", self.lambda));
        }
        join_problems(problems)
    }
}

impl PolynomialBaseSpec {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let (x0, x1) = self.domain;
        if self.coefficients.is_empty() || self.coefficients.iter().any(|c| !c.is_finite()) {
            problems.push("coefficients must be a non-empty list of finite numbers".to_string());
        }
        if !(x0.is_finite() && x1.is_finite() && x0 < x1) {
            problems.push(format!("domain must satisfy x_min < x_max, got [{x0}, {x1}]"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            problems.push(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if problems.is_empty() {
            let (f0, f1) = (self.eval(x0), self.eval(x1));
            if f0.abs() > 1e-9 || f1.abs() > 1e-9 {
                problems.push(format!(
                    "f must vanish at both domain ends, got f(x_min)={f0}, f(x_max)={f1}"
                ));
            }
            let interior: Vec<f64> = (1..1000)
                .map(|i| self.eval(x0 + (x1 - x0) * i as f64 / 1000.0))
                .collect();
            let positive = interior.iter().all(|&y| y > 0.0);
            let negative = interior.iter().all(|&y| y < 0.0);
            if !(positive || negative) {
                problems.push("f must keep one strict sign inside the domain".to_string());
            }
        }
        join_problems(problems)
    }
}

fn join_problems(problems: Vec<String>) -> Result<()> {
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(problems.join("; ")))
    }
}

impl BaseSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseSpec::Segments(s) => s.validate(),
            BaseSpec::Polygon(p) => p.validate(),
            BaseSpec::Polynomial(p) => p.validate(),
        }
    }
}

impl ColumnSpec {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        self.base.validate()?;
        if self.layers == 0 {
            return Err(Error::InvalidSpec("a column needs at least one layer".into()));
        }
        if !self.phi.is_finite() {
            return Err(Error::InvalidSpec(format!("phi must be finite, got {}", self.phi)));
        }
        Ok(())
    }
}

/// Base layer poses (centroid at the origin, `z = h/2`) and the closure residual.
#[derive(Debug, Clone)]
pub struct BaseLayer {
    pub poses: Vec<BrickPose>,
    pub closure_residual: f64,
}

/// Lays out one layer of the given base family.
pub fn build_base_layer(base: &BaseSpec, dims: &BrickDims) -> Result<BaseLayer> {
    dims.validate()?;
    base.validate()?;
    let (mut poses, residual) = match base {
        BaseSpec::Segments(spec) => {
            let tau = angle_factor(spec.theta)?;
            let runs: Vec<Run> = spec
                .blocks
                .iter()
                .map(|&b| {
                    Ok(Run {
                        turn: spec.theta,
                        blocks: b,
                        tau,
                        pitch: segment_margin(b, dims, spec.theta, spec.lambda)?,
                    })
                })
                .collect::<Result<_>>()?;
            lay_runs(&runs, dims, spec.lambda)
        }
        BaseSpec::Polygon(spec) => {
            let runs: Vec<Run> = spec
                .turning_angles
                .iter()
                .map(|&turn| {
                    let theta = PI - turn.abs();
                    Ok(Run {
                        turn,
                        blocks: spec.blocks,
                        tau: angle_factor(theta)?,
                        pitch: segment_margin(spec.blocks, dims, theta, spec.lambda)?,
                    })
                })
                .collect::<Result<_>>()?;
            lay_runs(&runs, dims, spec.lambda)
        }
        BaseSpec::Polynomial(spec) => (march_polynomial(spec, dims)?, 0.0),
    };
    if residual > CLOSURE_TOLERANCE {
        return Err(Error::Closure { residual });
    }

    let n = poses.len() as f64;
    let centroid = poses.iter().fold(Vec2::ZERO, |acc, p| acc + p.position.xy()) * (1.0 / n);
    for p in &mut poses {
        p.position = (p.position.xy() - centroid).extend(dims.h / 2.0);
    }
    Ok(BaseLayer {
        poses,
        closure_residual: residual,
    })
}

struct Run {
    /// Turn taken at this run's start vertex.
    turn: f64,
    blocks: u32,
    tau: f64,
    pitch: f64,
}

/// Walks the anchor loop and returns brick poses plus the closure gap.
fn lay_runs(runs: &[Run], dims: &BrickDims, lambda: f64) -> (Vec<BrickPose>, f64) {
    let mut poses = Vec::new();
    let mut anchor = Vec2::ZERO;
    let mut heading = 0.0;
    for (i, run) in runs.iter().enumerate() {
        if i > 0 {
            heading += run.turn;
        }
        let dir = Vec2::from_angle(heading);
        let outward = -dir.perp();
        let end_turn = runs[(i + 1) % runs.len()].turn;
        let lead = match (run.turn < 0.0, end_turn < 0.0) {
            (false, true) => 0.0,
            (true, true) => 0.5 * run.tau * dims.w,
            _ => run.tau * dims.w,
        };
        for j in 0..run.blocks {
            let along = lead + dims.l / 2.0 + j as f64 * (dims.l + lambda);
            let center = anchor + dir * along + outward * (dims.w / 2.0);
            poses.push(BrickPose {
                position: center.extend(0.0),
                yaw: wrap_angle(heading),
            });
        }
        anchor = anchor + dir * run.pitch;
    }
    (poses, anchor.norm())
}

/// Closed loop traced by `-f` left to right, then `f` right to left.
struct PolyLoop<'a> {
    spec: &'a PolynomialBaseSpec,
    /// +1 when `f` is positive inside the domain, so the loop runs counterclockwise.
    sign: f64,
}

impl PolyLoop<'_> {
    const PERIOD: f64 = 2.0;

    fn point(&self, t: f64) -> (Vec2, f64) {
        let (x0, x1) = self.spec.domain;
        let span = x1 - x0;
        let t = t.rem_euclid(Self::PERIOD);
        let (x, y_sign, dx) = if t <= 1.0 {
            (x0 + t * span, -self.sign, span)
        } else {
            (x1 - (t - 1.0) * span, self.sign, -span)
        };
        let y = y_sign * self.spec.eval(x);
        let dy = y_sign * self.spec.derivative(x) * dx;
        (Vec2::new(x, y), dy.atan2(dx))
    }
}

fn march_polynomial(spec: &PolynomialBaseSpec, dims: &BrickDims) -> Result<Vec<BrickPose>> {
    let mid = 0.5 * (spec.domain.0 + spec.domain.1);
    let curve = PolyLoop {
        spec,
        sign: spec.eval(mid).signum(),
    };
    let margin = |from: f64, to: f64| polynomial_margin(wrap_angle(to - from).abs(), dims.w, spec.kappa);

    // start mid-way along the lower branch, away from the junction corners
    let t_start = 0.5;
    let t_end = t_start + PolyLoop::PERIOD;
    let (p_first, tan_first) = curve.point(t_start);
    let mut placed = vec![(p_first, tan_first)];
    let mut t = t_start;
    let step = PolyLoop::PERIOD / 20_000.0;

    loop {
        let (p_cur, tan_cur) = *placed.last().expect("non-empty");
        let gap = |s: f64| -> Result<f64> {
            let (p, tan) = curve.point(s);
            Ok((p - p_cur).norm() - margin(tan_cur, tan)?)
        };
        // bracket the first parameter where the chord reaches the margin
        let mut lo = t;
        let mut hi = t + step;
        while hi < t_end && gap(hi)? < 0.0 {
            lo = hi;
            hi += step;
        }
        if hi >= t_end {
            break;
        }
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if gap(m)? < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let (p_next, tan_next) = curve.point(hi);
        // the loop closes on the first brick; stop before crowding it
        if (p_first - p_next).norm() < margin(tan_next, tan_first)? {
            break;
        }
        placed.push((p_next, tan_next));
        t = hi;
    }

    if placed.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "polynomial loop too short for more than {} bricks",
            placed.len()
        )));
    }
    Ok(placed
        .into_iter()
        .map(|(p, tangent)| BrickPose {
            position: p.extend(0.0),
            // curve bricks lie with their width along the curve
            yaw: wrap_angle(tangent + FRAC_PI_2),
        })
        .collect())
}

/// Stacks `layers` copies of the base layer, layer `k` turned by `k·phi`.
pub fn build_column(spec: &ColumnSpec) -> Result<ColumnModel> {
    spec.validate()?;
    let base = build_base_layer(&spec.base, &spec.dims)?;
    let mut placements = Vec::with_capacity(base.poses.len() * spec.layers as usize);
    for k in 0..spec.layers {
        let angle = k as f64 * spec.phi;
        let z = (k as f64 + 0.5) * spec.dims.h;
        for (i, pose) in base.poses.iter().enumerate() {
            placements.push(Placement {
                layer: k,
                index_in_layer: i as u32,
                pose: BrickPose {
                    position: rotate_about(pose.position.xy(), Vec2::ZERO, angle).extend(z),
                    yaw: wrap_angle(pose.yaw + angle),
                },
            });
        }
    }
    Ok(ColumnModel {
        spec: spec.clone(),
        closure_residual: base.closure_residual,
        placements,
    })
}
