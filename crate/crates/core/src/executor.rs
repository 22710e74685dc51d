//! Execution of a manipulation blueprint: mapping to the world frame and
//! Cartesian waypoint synthesis for a flying parallel gripper.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{AssetInstance, AssetKind, RegionKind};
use crate::geom::{minimal_rotation_index, Rotation3, Transform3, Vec3};
use crate::manipulation::{
    find_rule, symmetry_axis, symmetry_orbit, FramedJoint, GraspPose, ManipError, ManipulationBlueprint,
    ManipulationType, MAX_GRIPPER_OPENING,
};
use crate::blueprint::JointKind;

/// Distance from the fingertip midpoint back to the palm along the approach axis.
pub const PALM_DEPTH: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("approach blocked by part `{part}`")]
    Blocked { part: String },
    #[error("grasp unreachable: {0}")]
    Unreachable(String),
    #[error(transparent)]
    Manip(#[from] ManipError),
}

/// A part's solid placed in the world; `eval` is non-positive inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConstraint {
    pub part_id: String,
    pub instance: AssetInstance,
    pub pose: Transform3,
}

impl WorldConstraint {
    pub fn eval(&self, x: &Vec3) -> f64 {
        self.instance.constraint(&self.pose.invert().apply_point(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldPlan {
    pub part_id: String,
    pub asset: AssetKind,
    pub rule_id: String,
    pub manipulation_type: ManipulationType,
    pub grasp: GraspPose,
    pub force: Vec3,
    pub joint: FramedJoint,
    /// Point and unit axis of the part's own rotational symmetry.
    pub symmetry: Option<(Vec3, Vec3)>,
    pub constraints: Vec<WorldConstraint>,
    pub approach_offset: f64,
}

/// Maps `mb` (expressed in the task part's frame) into the world with the
/// part pose `m`. For parts with a discrete symmetry the grasp is the orbit
/// member whose orientation is closest to `current`, when given.
pub fn to_world(mb: &ManipulationBlueprint, m: &Transform3, current: Option<&Rotation3>) -> Result<WorldPlan, PlanError> {
    let rule = mb.rule()?;
    let task = mb.constraints.iter().find(|c| c.part_id == mb.part_id);
    let asset = AssetKind::from_id(&mb.asset_id).ok_or_else(|| ManipError::UnknownFamily(mb.asset_id.clone()))?;
    let mut grasp = mb.grasp.transformed(m);
    if let (Some(current), Some(task)) = (current, task) {
        let orbit: Vec<GraspPose> = symmetry_orbit(&task.instance, &mb.grasp).iter().map(|g| g.transformed(m)).collect();
        let rotations: Vec<Rotation3> = orbit.iter().map(|g| g.pose.rotation).collect();
        if let Ok(i) = minimal_rotation_index(&rotations, current) {
            grasp = orbit[i];
        }
    }
    let joint = mb.joint.transformed(m);
    let symmetry = symmetry_axis(asset).map(|b| (m.translation, m.apply_dir(&b)));
    // The orbit only permutes contacts of a symmetric part, so the local force
    // still applies after rotating it with the chosen grasp.
    let force = if grasp == mb.grasp.transformed(m) {
        m.apply_dir(&mb.force)
    } else {
        let delta = grasp.pose.compose(&mb.grasp.transformed(m).pose.invert());
        delta.apply_dir(&m.apply_dir(&mb.force))
    };
    Ok(WorldPlan {
        part_id: mb.part_id.clone(),
        asset,
        rule_id: rule.rule_id,
        manipulation_type: rule.manipulation_type,
        grasp,
        force,
        joint,
        symmetry,
        constraints: mb
            .constraints
            .iter()
            .map(|c| WorldConstraint { part_id: c.part_id.clone(), instance: c.instance.clone(), pose: m.compose(&c.pose) })
            .collect(),
        approach_offset: 0.08,
    })
}

impl WorldPlan {
    /// Force direction re-evaluated at contact point `p` of the current grasp.
    pub fn direction_at(&self, p: &Vec3) -> Result<Vec3, ManipError> {
        match self.manipulation_type {
            ManipulationType::Pull | ManipulationType::Slide => self.joint.opening_direction(p),
            ManipulationType::Push => self.joint.opening_direction(p).map(|f| -f),
            ManipulationType::Rotate => match self.symmetry {
                Some((c, b)) => {
                    let r = p - c;
                    let t = b.cross(&(r - b * r.dot(&b)));
                    if t.norm() < 1e-12 {
                        return Err(ManipError::OnAxis);
                    }
                    let sense = if b.dot(&self.joint.axis) < 0.0 { -self.joint.opening_sign } else { self.joint.opening_sign };
                    Ok(t.normalize() * sense)
                }
                None => self.joint.opening_direction(p),
            },
        }
    }

    /// Most violated constraint at `x` among parts other than `skip`.
    pub fn deepest(&self, x: &Vec3, skip: Option<&str>) -> Option<(f64, &str)> {
        self.constraints
            .iter()
            .filter(|c| Some(c.part_id.as_str()) != skip)
            .map(|c| (c.eval(x), c.part_id.as_str()))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Five points standing in for the gripper: both fingertips, both finger
/// roots and the palm center.
pub fn gripper_proxy(pose: &Transform3, width: f64) -> [Vec3; 5] {
    let local = [
        Vec3::new(0.0, 0.5 * width, 0.0),
        Vec3::new(0.0, -0.5 * width, 0.0),
        Vec3::new(-PALM_DEPTH, 0.5 * width, 0.0),
        Vec3::new(-PALM_DEPTH, -0.5 * width, 0.0),
        Vec3::new(-PALM_DEPTH, 0.0, 0.0),
    ];
    local.map(|p| pose.apply_point(&p))
}

/// Opening used while approaching a grasp.
pub fn open_width(grasp: &GraspPose) -> f64 {
    match grasp.contact {
        RegionKind::Grasp => (grasp.width + 0.02).min(MAX_GRIPPER_OPENING),
        RegionKind::Push => grasp.width,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Grasp,
    Interact,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Approach => "approach",
            Phase::Grasp => "grasp",
            Phase::Interact => "interact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub pose: Transform3,
    pub width: f64,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
}

impl Trajectory {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter().filter(move |w| w.phase == phase)
    }

    pub fn phases_ordered(&self) -> bool {
        self.waypoints.windows(2).all(|w| w[0].phase <= w[1].phase)
    }

    /// Largest translation and rotation between consecutive waypoints.
    pub fn max_step(&self) -> (f64, f64) {
        self.waypoints.windows(2).fold((0.0, 0.0), |(t, r), w| {
            let (angle, dist) = w[0].pose.distance_to(&w[1].pose);
            (f64::max(t, dist), f64::max(r, angle))
        })
    }

    /// One line per waypoint: phase, translation, roll-pitch-yaw, width.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# phase x y z roll pitch yaw width\n");
        for w in &self.waypoints {
            let t = w.pose.translation;
            let [a, b, c] = w.pose.rpy();
            let _ = writeln!(out, "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}", w.phase.name(), t.x, t.y, t.z, a, b, c, w.width);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Translation bound between waypoints, meters.
    pub max_step: f64,
    /// Rotation bound between waypoints, radians.
    pub max_rotation: f64,
    /// Spacing of collision samples along the approach, meters.
    pub check_spacing: f64,
    /// Penetration depth tolerated by the collision check, meters.
    pub tolerance: f64,
    /// Contact travel of the interaction phase, meters.
    pub interact_travel: f64,
    /// Grasps farther than this from the world origin are unreachable.
    pub workspace_radius: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            max_step: 0.01,
            max_rotation: 5f64.to_radians(),
            check_spacing: 0.01,
            tolerance: 1e-3,
            interact_travel: 0.15,
            workspace_radius: 3.0,
        }
    }
}

/// Checks the gripper proxy at `pose` against every part except the target.
pub fn check_pose(plan: &WorldPlan, pose: &Transform3, width: f64, tolerance: f64) -> Result<(), PlanError> {
    for p in gripper_proxy(pose, width) {
        if let Some((v, part)) = plan.deepest(&p, Some(&plan.part_id)) {
            if v < -tolerance {
                return Err(PlanError::Blocked { part: part.to_string() });
            }
        }
    }
    Ok(())
}

/// Joint change of the interaction phase, signed in joint units.
fn interact_delta(plan: &WorldPlan, travel: f64) -> f64 {
    let j = &plan.joint;
    let p = plan.grasp.contact_point();
    let closing = plan.manipulation_type == ManipulationType::Push;
    let dir = if closing { -j.opening_sign } else { j.opening_sign };
    let limit = if dir > 0.0 { j.range[1] - j.q } else { j.q - j.range[0] };
    let wanted = match j.kind {
        JointKind::Revolute => travel / (p - j.project(&p)).norm().max(1e-6),
        JointKind::Prismatic => travel,
    };
    dir * wanted.min(limit.max(0.0))
}

/// Straight approach from the pre-grasp pose, finger closing, then the
/// interaction motion following the estimated joint.
pub fn plan_motion(plan: &WorldPlan, cfg: &PlanConfig) -> Result<Trajectory, PlanError> {
    let g = plan.grasp;
    let t = g.pose.translation;
    if !t.iter().all(|c| c.is_finite()) || t.norm() > cfg.workspace_radius {
        return Err(PlanError::Unreachable(format!("grasp at {:.3?} outside the workspace", t.as_slice())));
    }
    if g.width <= 0.0 || g.width > MAX_GRIPPER_OPENING + 1e-12 {
        return Err(PlanError::Unreachable(format!("opening {:.4} m", g.width)));
    }
    let approach = g.approach_axis();
    let open = open_width(&g);
    let mut waypoints = Vec::new();

    let n = ((plan.approach_offset / cfg.max_step).ceil() as usize).max(1);
    let checks = ((plan.approach_offset / cfg.check_spacing).ceil() as usize).max(n);
    for k in 0..=checks {
        let back = plan.approach_offset * (1.0 - k as f64 / checks as f64);
        let pose = Transform3::new(g.pose.rotation, t - approach * back);
        check_pose(plan, &pose, open, cfg.tolerance)?;
    }
    check_pose(plan, &g.pose, g.width, cfg.tolerance)?;
    for k in 0..=n {
        let back = plan.approach_offset * (1.0 - k as f64 / n as f64);
        waypoints.push(Waypoint { pose: Transform3::new(g.pose.rotation, t - approach * back), width: open, phase: Phase::Approach });
    }
    for k in 1..=2 {
        let w = open + (g.width - open) * k as f64 / 2.0;
        waypoints.push(Waypoint { pose: g.pose, width: w, phase: Phase::Grasp });
    }

    match (plan.manipulation_type, plan.symmetry) {
        (ManipulationType::Rotate, Some((c, b))) => {
            let rim = g.contact_point() + g.closing_axis() * (0.5 * g.width);
            let sense = plan.direction_at(&rim)?.dot(&b.cross(&(rim - c))).signum();
            let total = std::f64::consts::FRAC_PI_2 * sense;
            let steps = ((total.abs() / cfg.max_rotation).ceil() as usize).max(1);
            for k in 1..=steps {
                let r = Rotation3::about_axis(&b, total * k as f64 / steps as f64);
                let m = Transform3::new(r, c - r.apply(&c));
                waypoints.push(Waypoint { pose: m.compose(&g.pose), width: g.width, phase: Phase::Interact });
            }
        }
        _ => {
            let dq = interact_delta(plan, cfg.interact_travel);
            let p = g.contact_point();
            let steps = match plan.joint.kind {
                JointKind::Revolute => {
                    let r = (p - plan.joint.project(&p)).norm();
                    (dq.abs() * r / cfg.max_step).max(dq.abs() / cfg.max_rotation).ceil() as usize
                }
                JointKind::Prismatic => (dq.abs() / cfg.max_step).ceil() as usize,
            };
            for k in 1..=steps {
                let m = plan.joint.motion(dq * k as f64 / steps as f64);
                waypoints.push(Waypoint { pose: m.compose(&g.pose), width: g.width, phase: Phase::Interact });
            }
        }
    }
    Ok(Trajectory { waypoints })
}

/// Rule lookup shared by callers that only hold a rule id.
pub fn manipulation_type(rule_id: &str) -> Result<ManipulationType, ManipError> {
    find_rule(rule_id).map(|r| r.manipulation_type)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blueprint::{builtin_blueprint, instantiate, StructuralInstance};
    use crate::geom::{rot_rpy, translate};
    use std::collections::BTreeMap;

    fn microwave() -> StructuralInstance {
        let bp = builtin_blueprint("microwave").unwrap();
        instantiate(&bp, &bp.nominal_params(), Transform3::identity(), &BTreeMap::new()).unwrap()
    }

    fn handle_mb(inst: &StructuralInstance, rule: &str) -> ManipulationBlueprint {
        ManipulationBlueprint::build(inst, "handle", "curve_pull_grasp", 0.0, rule).unwrap()
    }

    #[test]
    fn identity_and_translation() {
        let inst = microwave();
        let mb = handle_mb(&inst, "hinge_pull");
        let plan = to_world(&mb, &Transform3::identity(), None).unwrap();
        assert_eq!(plan.grasp, mb.grasp);
        assert_eq!(plan.force, mb.force);
        let plan = to_world(&mb, &translate(1.0, 2.0, 3.0), None).unwrap();
        assert!((plan.grasp.pose.translation - mb.grasp.pose.translation - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
        assert!((plan.force - mb.force).norm() < 1e-15);
    }

    #[test]
    fn microwave_plan_is_clear_and_follows_the_hinge() {
        let inst = microwave();
        let mb = handle_mb(&inst, "hinge_pull");
        let m = inst.part_pose("handle").unwrap();
        let plan = to_world(&mb, &m, None).unwrap();
        assert!((plan.force.norm() - 1.0).abs() < 1e-12);
        let cfg = PlanConfig { interact_travel: 0.5, ..PlanConfig::default() };
        let traj = plan_motion(&plan, &cfg).unwrap();
        assert!(traj.phases_ordered());
        let (dt, dr) = traj.max_step();
        assert!(dt <= cfg.max_step + 1e-9 && dr <= cfg.max_rotation + 1e-9);
        let first = traj.waypoints[0];
        let expected = plan.grasp.pose.translation - plan.grasp.approach_axis() * 0.08;
        assert!((first.pose.translation - expected).norm() < 1e-12);
        for w in traj.phase(Phase::Approach) {
            for p in gripper_proxy(&w.pose, w.width) {
                assert!(plan.deepest(&p, Some("handle")).unwrap().0 >= -cfg.tolerance);
            }
        }
        let p0 = plan.grasp.contact_point();
        let radius = (p0 - plan.joint.project(&p0)).norm();
        let interact: Vec<_> = traj.phase(Phase::Interact).collect();
        assert!(!interact.is_empty());
        let mut prev = p0;
        for w in interact {
            let p = w.pose.translation;
            assert!(((p - plan.joint.project(&p)).norm() - radius).abs() < 2e-3);
            let d = (p - prev).normalize();
            assert!(d.dot(&plan.direction_at(&prev).unwrap()) >= 0.99);
            prev = p;
        }
    }

    #[test]
    fn grasp_inside_another_part_is_blocked() {
        let inst = microwave();
        let mb = handle_mb(&inst, "hinge_pull");
        let mut plan = to_world(&mb, &inst.part_pose("handle").unwrap(), None).unwrap();
        // Move the grasp into the middle of the body.
        plan.grasp.pose.translation = Vec3::new(0.0, 0.15, 0.15);
        assert_eq!(plan_motion(&plan, &PlanConfig::default()), Err(PlanError::Blocked { part: "body".into() }));
        plan.grasp.pose.translation = Vec3::new(10.0, 0.0, 0.0);
        assert!(matches!(plan_motion(&plan, &PlanConfig::default()), Err(PlanError::Unreachable(_))));
    }

    #[test]
    fn knob_grasp_takes_the_closest_orbit_member() {
        let bp = builtin_blueprint("knob_door").unwrap();
        let inst = instantiate(&bp, &bp.nominal_params(), Transform3::identity(), &BTreeMap::new()).unwrap();
        let mb = ManipulationBlueprint::build(&inst, "knob", "knob_pinch_grasp", 0.0, "hinge_pull").unwrap();
        let m = inst.part_pose("knob").unwrap();
        let free = to_world(&mb, &m, None).unwrap();
        let current = rot_rpy(0.3, 0.0, 0.0) * free.grasp.pose.rotation;
        let plan = to_world(&mb, &m, Some(&current)).unwrap();
        let n = inst.part("knob").unwrap().instance.get("n");
        let step = 2.0 * std::f64::consts::PI / n;
        assert!(plan.grasp.pose.rotation.geodesic_angle(&current) <= 0.5 * step + 1e-9);
        assert!((plan.grasp.contact_point() - free.grasp.contact_point()).norm() < 1e-9);
        assert!((plan.force.norm() - 1.0).abs() < 1e-12);
    }
}
