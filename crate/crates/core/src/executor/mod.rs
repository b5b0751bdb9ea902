//! Pick-and-place sequencing for a free-flying gripper in a kinematic world.
//!
//! Every brick follows the same six-phase plan: hover over the conveyor
//! brick, grasp, lift, carry in a straight line to the hover point above the
//! target, place, then retreat to the home pose over the conveyor. Segment
//! times come from a trapezoidal velocity profile.

mod assembly;

pub use assembly::{run_assembly, AssemblyLog, AssemblySettings, ASSEMBLY_SCHEMA};

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::column::{BrickDims, BrickPose};
use crate::error::{Error, Result};
use crate::geometry::{obb_overlap, wrap_angle, Vec2, Vec3};
use crate::perception::EstimatedPose;

/// Height tolerance for the layer safety check.
const LAYER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Hover height above grasp and place points.
    pub eta: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub omega_max: f64,
    /// Gap the carried brick must keep above the tallest placed brick while
    /// it travels to the target.
    pub descend_clearance: f64,
    /// Axis-aligned reachable box, `(min, max)` corners.
    pub workspace: (Vec3, Vec3),
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            eta: 1.25,
            v_max: 4.0,
            a_max: 10.0,
            omega_max: 2.0,
            descend_clearance: 0.05,
            workspace: (Vec3::new(-5.0, -5.0, 0.0), Vec3::new(5.0, 5.0, 3.0)),
        }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("eta", self.eta),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.descend_clearance.is_finite() && self.descend_clearance >= 0.0) {
            problems.push(format!(
                "descend_clearance must be non-negative, got {}",
                self.descend_clearance
            ));
        }
        let (lo, hi) = self.workspace;
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            problems.push("workspace min corner must lie below the max corner".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn contains(&self, p: Vec3) -> bool {
        let (lo, hi) = self.workspace;
        (lo.x..=hi.x).contains(&p.x) && (lo.y..=hi.y).contains(&p.y) && (lo.z..=hi.z).contains(&p.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreGrasp,
    Grasp,
    Lift,
    Transit,
    Place,
    Retreat,
}

/// Gripper frame: position and rotation about the vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperPose {
    pub position: Vec3,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub phase: Phase,
    pub pose: GripperPose,
    pub gripper: Gripper,
}

/// Waypoints joined by straight Cartesian segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPlan {
    pub waypoints: Vec<Waypoint>,
    pub target: BrickPose,
}

impl WaypointPlan {
    /// Waypoints of one phase, in order.
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter().filter(move |w| w.phase == phase)
    }

    /// Point at fraction `t` of the straight segment ending at waypoint `i`.
    pub fn interpolate(&self, i: usize, t: f64) -> Vec3 {
        let (a, b) = (self.waypoints[i - 1].pose.position, self.waypoints[i].pose.position);
        a + (b - a) * t
    }
}

/// Gripper yaw that closes on the midpoints of a brick's long sides, i.e.
/// the direction of the long axis.
pub fn grasp_yaw(pose: &BrickPose, dims: &BrickDims) -> f64 {
    if dims.w > dims.l {
        wrap_angle(pose.yaw + FRAC_PI_2)
    } else {
        wrap_angle(pose.yaw)
    }
}

/// Six-phase plan from the estimated conveyor brick to `target`, ending at
/// `home`.
pub fn plan_pick_place(
    estimated: &EstimatedPose,
    target: &BrickPose,
    home: GripperPose,
    dims: &BrickDims,
    cfg: &ExecutorConfig,
) -> Result<WaypointPlan> {
    cfg.validate()?;
    let lift = Vec3::UNIT_Z * cfg.eta;
    let p = estimated.position;
    let q = p + lift;
    // the footprint's first axis is the long one
    let pick_yaw = estimated.footprint.yaw;
    let place_yaw = grasp_yaw(target, dims);
    let above = target.position + lift;

    for (what, point) in [
        ("target", target.position),
        ("hover point above target", above),
        ("pre-grasp point", q),
    ] {
        if !cfg.contains(point) {
            return Err(Error::UnreachableTarget(format!(
                "{what} ({:.4}, {:.4}, {:.4}) lies outside the workspace",
                point.x, point.y, point.z
            )));
        }
    }

    let wp = |phase, position, yaw, gripper| Waypoint {
        phase,
        pose: GripperPose { position, yaw },
        gripper,
    };
    use Gripper::{Closed, Open};
    Ok(WaypointPlan {
        waypoints: vec![
            wp(Phase::PreGrasp, q, pick_yaw, Open),
            wp(Phase::Grasp, p, pick_yaw, Closed),
            wp(Phase::Lift, q, pick_yaw, Closed),
            wp(Phase::Transit, above, place_yaw, Closed),
            wp(Phase::Place, target.position, place_yaw, Open),
            wp(Phase::Retreat, above, place_yaw, Open),
            wp(Phase::Retreat, home.position, home.yaw, Open),
        ],
        target: *target,
    })
}

/// Time to cover `distance` with a trapezoidal (or triangular) speed
/// profile, or to turn by `angle` at constant rate, whichever is longer.
pub fn segment_duration(distance: f64, angle: f64, cfg: &ExecutorConfig) -> f64 {
    let (v, a) = (cfg.v_max, cfg.a_max);
    let translation = if distance >= v * v / a {
        distance / v + v / a
    } else {
        2.0 * (distance / a).sqrt()
    };
    translation.max(angle / cfg.omega_max)
}

/// Smallest gripper rotation between two yaws. A parallel-jaw grasp is
/// symmetric under a half turn, so the result lies in `[0, π/2]`.
pub fn gripper_rotation(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(PI);
    d.min(PI - d)
}

/// Rectangle on the conveyor in which bricks appear, camera centered above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConveyorConfig {
    pub center: Vec2,
    pub half_size: Vec2,
    pub plane_z: f64,
}

impl Default for ConveyorConfig {
    fn default() -> Self {
        Self {
            center: Vec2::new(3.0, 0.0),
            half_size: Vec2::new(0.3, 0.15),
            plane_z: 0.0,
        }
    }
}

impl ConveyorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.center.is_finite()
            && self.plane_z.is_finite()
            && self.half_size.x.is_finite()
            && self.half_size.y.is_finite()
            && self.half_size.x >= 0.0
            && self.half_size.y >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(vec![format!("invalid conveyor region {self:?}")]))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub brick_id: usize,
    pub commanded_target: BrickPose,
    /// Where the kinematic world put the brick.
    pub achieved: BrickPose,
    /// Ground-truth pose the brick was spawned at on the conveyor.
    pub spawn: BrickPose,
    /// Pose the perception pipeline reported for the spawned brick.
    pub estimate: BrickPose,
    pub trajectory_time_s: f64,
    pub pose_estimate_time_s: f64,
}

/// Conveyor, placed bricks and gripper; bricks are moved, never simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicWorld {
    pub conveyor: ConveyorConfig,
    pub dims: BrickDims,
    pub placed: Vec<BrickPose>,
    /// Brick currently waiting on the conveyor.
    pub pending: Option<BrickPose>,
    pub gripper: GripperPose,
}

impl KinematicWorld {
    /// Empty world with the gripper at [`KinematicWorld::home`].
    pub fn new(conveyor: ConveyorConfig, dims: BrickDims, cfg: &ExecutorConfig) -> Self {
        let mut world = Self {
            conveyor,
            dims,
            placed: Vec::new(),
            pending: None,
            gripper: GripperPose {
                position: Vec3::ZERO,
                yaw: 0.0,
            },
        };
        world.gripper = world.home(cfg);
        world
    }

    /// Watch pose: the pre-grasp hover height over the conveyor center.
    pub fn home(&self, cfg: &ExecutorConfig) -> GripperPose {
        GripperPose {
            position: self
                .conveyor
                .center
                .extend(self.conveyor.plane_z + self.dims.h / 2.0 + cfg.eta),
            yaw: 0.0,
        }
    }

    /// Top of the tallest placed brick whose footprint meets `pose`'s.
    pub fn stack_top_under(&self, pose: &BrickPose) -> Option<f64> {
        let fp = pose.footprint(&self.dims);
        self.placed
            .iter()
            .filter(|b| obb_overlap(&b.footprint(&self.dims), &fp))
            .map(|b| b.position.z + self.dims.h / 2.0)
            .reduce(f64::max)
    }
}

/// Runs `plan` in `world`: the pending brick leaves the conveyor and lands
/// exactly on the commanded target; the gripper ends at the last waypoint.
pub fn execute_plan(
    plan: &WaypointPlan,
    world: &mut KinematicWorld,
    estimate: &EstimatedPose,
    cfg: &ExecutorConfig,
) -> Result<ExecutionRecord> {
    let spawn = world
        .pending
        .ok_or_else(|| Error::UnreachableTarget("no brick waiting on the conveyor".into()))?;
    let target = plan.target;
    let bottom = target.position.z - world.dims.h / 2.0;
    if let Some(top) = world.stack_top_under(&target) {
        if bottom + LAYER_TOLERANCE < top {
            return Err(Error::UnreachableTarget(format!(
                "target bottom {bottom:.4} m lies below the placed bricks' top {top:.4} m"
            )));
        }
    }
    let tallest = world
        .placed
        .iter()
        .map(|b| b.position.z + world.dims.h / 2.0)
        .fold(world.conveyor.plane_z, f64::max);
    for w in plan.phase(Phase::Transit) {
        let carried_bottom = w.pose.position.z - world.dims.h / 2.0;
        if carried_bottom < tallest + cfg.descend_clearance {
            return Err(Error::UnreachableTarget(format!(
                "carried brick bottom {carried_bottom:.4} m does not clear the column top {tallest:.4} m"
            )));
        }
    }

    let mut time = 0.0;
    let mut at = world.gripper;
    for w in &plan.waypoints {
        time += segment_duration(
            (w.pose.position - at.position).norm(),
            gripper_rotation(at.yaw, w.pose.yaw),
            cfg,
        );
        at = w.pose;
    }
    world.gripper = at;
    world.pending = None;
    world.placed.push(target);
    Ok(ExecutionRecord {
        brick_id: world.placed.len() - 1,
        commanded_target: target,
        achieved: target,
        spawn,
        estimate: estimate.brick_pose(&world.dims),
        trajectory_time_s: time,
        pose_estimate_time_s: estimate.timestamp_ms / 1e3,
    })
}
