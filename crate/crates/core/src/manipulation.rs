//! Manipulation knowledge attached to structural instances: grasp-pose
//! families per asset and force-direction rules per joint kind.
//!
//! Gripper frame: origin at the fingertip midpoint, fingers close along the
//! gripper y axis and the gripper moves forward along its +x axis. Every
//! family aligns the gripper with `R(pi/2, 0, pi/2)`, which turns gripper +x
//! into the asset's +y (the canonical approach direction) and the closing
//! axis into the asset's z.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprint::{BlueprintError, Expr, JointKind, StructuralInstance};
use crate::concepts::{AssetInstance, AssetKind, RegionKind, DOOR_EDGE_STRIP, DRAWER_FACE_THICKNESS};
use crate::geom::{rot_rpy, Rotation3, Transform3, Vec3};

/// Widest opening of the parallel gripper, meters.
pub const MAX_GRIPPER_OPENING: f64 = 0.08;
/// Extra opening beyond the pinched thickness, split between both fingers.
pub const FINGER_CLEARANCE: f64 = 0.01;
/// Opening used for fingertip pushes.
pub const PUSH_WIDTH: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManipError {
    #[error("unknown grasp family `{0}`")]
    UnknownFamily(String),
    #[error("unknown force rule `{0}`")]
    UnknownRule(String),
    #[error("family `{family}` applies to `{expected}`, not `{got}`")]
    WrongAsset { family: String, expected: String, got: String },
    #[error("{name} = {value} outside [{lower}, {upper}]")]
    OutOfRange { name: String, value: f64, lower: f64, upper: f64 },
    #[error("family `{family}` has an empty range for this instance")]
    DegenerateRange { family: String },
    #[error("gripper cannot open to {0:.4} m")]
    TooWide(f64),
    #[error("rule `{rule}` does not apply to a {kind:?} joint")]
    Incompatible { rule: String, kind: JointKind },
    #[error("part `{0}` is not moved by any joint")]
    NoJoint(String),
    #[error("contact point lies on the rotation axis")]
    OnAxis,
    #[error(transparent)]
    Blueprint(#[from] BlueprintError),
}

/// A gripper pose in some frame together with the finger opening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub pose: Transform3,
    pub width: f64,
    /// Pinch between the fingers or fingertip push.
    #[serde(default = "default_contact")]
    pub contact: RegionKind,
}

fn default_contact() -> RegionKind {
    RegionKind::Grasp
}

impl GraspPose {
    pub fn approach_axis(&self) -> Vec3 {
        self.pose.rotation.column(0)
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.pose.rotation.column(1)
    }

    /// Fingertip midpoint, used as the contact point for forces.
    pub fn contact_point(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn transformed(&self, t: &Transform3) -> GraspPose {
        GraspPose { pose: t.compose(&self.pose), ..*self }
    }
}

/// Gripper alignment shared by every family.
pub fn canonical_alignment() -> Rotation3 {
    rot_rpy(FRAC_PI_2, 0.0, FRAC_PI_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspFamily {
    pub family_id: String,
    pub asset_id: String,
    pub synopsis: String,
    pub contact: RegionKind,
    /// Name of the single free parameter.
    pub param: String,
    /// Range bounds as expressions over the asset's parameters.
    pub range: [Expr; 2],
    /// Generator as a product of primitive motions, for display.
    pub formula: String,
}

fn family(id: &str, asset: AssetKind, synopsis: &str, contact: RegionKind, param: &str, range: [&str; 2], formula: &str) -> GraspFamily {
    GraspFamily {
        family_id: id.into(),
        asset_id: asset.id().into(),
        synopsis: synopsis.into(),
        contact,
        param: param.into(),
        range: range.map(|s| Expr::parse(s).unwrap_or_else(|e| panic!("family range `{s}`: {e}"))),
        formula: formula.into(),
    }
}

/// Every builtin grasp family.
pub fn grasp_families() -> Vec<GraspFamily> {
    use AssetKind::*;
    use RegionKind::*;
    let edge = format!("l/2 - {}", DOOR_EDGE_STRIP / 2.0);
    let edge_range = [format!("-(w/2 - {DOOR_EDGE_STRIP})"), format!("w/2 - {DOOR_EDGE_STRIP}")];
    let edge_range = [edge_range[0].as_str(), edge_range[1].as_str()];
    let mut out = vec![
        family(
            "curve_pull_grasp",
            CurveHandle,
            "pull-type grasp on curve handle",
            Grasp,
            "theta",
            ["-theta_c/2", "theta_c/2"],
            "Rz(theta) T(0, -R_o, 0) R(pi/2, 0, pi/2) G*",
        ),
        family(
            "ring_rim_grasp",
            RingHandle,
            "pinch grasp on the outer rim of a ring handle",
            Grasp,
            "theta",
            ["-pi/3", "pi/3"],
            "Rz(theta) T(0, -(R_i + 2 R_o)/3, 0) R(pi/2, 0, pi/2) G*",
        ),
        family(
            "bar_pull_grasp",
            BarHandle,
            "pull-type grasp around bar handle",
            Grasp,
            "s",
            ["-(length/2 - width)", "length/2 - width"],
            "T(s, 0, 0) R(pi/2, 0, pi/2) G*",
        ),
        family(
            "knob_pinch_grasp",
            Knob,
            "pinch grasp across the knob rim, usable for pulling or turning",
            Grasp,
            "theta",
            ["-pi/n", "pi/n"],
            "Ry(theta) T(0, -depth/2, 0) R(pi/2, 0, pi/2) G*",
        ),
        family(
            "lever_tip_grasp",
            Lever,
            "pinch grasp near the lever tip",
            Grasp,
            "s",
            ["length/2", "length - width/2"],
            "T(s, 0, 0) R(pi/2, 0, pi/2) G*",
        ),
        family(
            "lever_tip_push",
            Lever,
            "fingertip push on the underside of the lever tip",
            Push,
            "s",
            ["length/2", "length - width/2"],
            "T(s, 0, -width/2) Ry(-pi/2) G*",
        ),
        family(
            "drawer_front_push",
            DrawerFace,
            "push on drawer front",
            Push,
            "u",
            ["-(w/2 - 0.02)", "w/2 - 0.02"],
            "T(u, -t_f/2, 0) R(pi/2, 0, pi/2) G*",
        ),
    ];
    for kind in [DoorPanel, SunkenDoor] {
        for (side, sign) in [("left", "-"), ("right", "")] {
            out.push(family(
                &format!("{}_edge_push_{side}", kind.id()),
                kind,
                &format!("push at door edge ({side} side)"),
                Push,
                "t",
                edge_range,
                &format!("T({sign}({edge}), -h/2, t) R(pi/2, 0, pi/2) G*"),
            ));
        }
    }
    out
}

pub fn find_family(family_id: &str) -> Result<GraspFamily, ManipError> {
    grasp_families()
        .into_iter()
        .find(|f| f.family_id == family_id)
        .ok_or_else(|| ManipError::UnknownFamily(family_id.to_string()))
}

pub fn families_for(kind: AssetKind) -> Vec<GraspFamily> {
    grasp_families().into_iter().filter(|f| f.asset_id == kind.id()).collect()
}

impl GraspFamily {
    fn check_asset(&self, inst: &AssetInstance) -> Result<(), ManipError> {
        if inst.asset_id() != self.asset_id {
            return Err(ManipError::WrongAsset {
                family: self.family_id.clone(),
                expected: self.asset_id.clone(),
                got: inst.asset_id().to_string(),
            });
        }
        Ok(())
    }

    /// Bound range of the free parameter for `inst`.
    pub fn range(&self, inst: &AssetInstance) -> Result<[f64; 2], ManipError> {
        self.check_asset(inst)?;
        let lo = self.range[0].eval(&inst.params)?;
        let hi = self.range[1].eval(&inst.params)?;
        if !(hi > lo) {
            return Err(ManipError::DegenerateRange { family: self.family_id.clone() });
        }
        Ok([lo, hi])
    }
}

/// Grasp pose of `family` at parameter value `value`, in the part frame.
pub fn grasp_pose(inst: &AssetInstance, family: &GraspFamily, value: f64) -> Result<GraspPose, ManipError> {
    let [lo, hi] = family.range(inst)?;
    if !(value >= lo - 1e-12 && value <= hi + 1e-12) {
        return Err(ManipError::OutOfRange { name: family.param.clone(), value, lower: lo, upper: hi });
    }
    let g = |n: &str| inst.get(n);
    let align = Transform3::from_rotation(canonical_alignment());
    let t = |x: f64, y: f64, z: f64| Transform3::new(Rotation3::identity(), Vec3::new(x, y, z));
    let rz = |a: f64| Transform3::from_rotation(Rotation3::about_z(a));
    let (pose, width) = match family.family_id.as_str() {
        "curve_pull_grasp" => (rz(value) * t(0.0, -g("R_o"), 0.0) * align, 2.0 * g("r_t") + FINGER_CLEARANCE),
        "ring_rim_grasp" => {
            let rho = (g("R_i") + 2.0 * g("R_o")) / 3.0;
            (rz(value) * t(0.0, -rho, 0.0) * align, g("thickness") + FINGER_CLEARANCE)
        }
        "bar_pull_grasp" | "lever_tip_grasp" => (t(value, 0.0, 0.0) * align, g("width") + FINGER_CLEARANCE),
        "knob_pinch_grasp" => (
            Transform3::from_rotation(Rotation3::about_y(value)) * t(0.0, -0.5 * g("depth"), 0.0) * align,
            2.0 * g("radius") + FINGER_CLEARANCE,
        ),
        "lever_tip_push" => {
            (t(value, 0.0, -0.5 * g("width")) * Transform3::from_rotation(Rotation3::about_y(-FRAC_PI_2)), PUSH_WIDTH)
        }
        "drawer_front_push" => (t(value, -0.5 * DRAWER_FACE_THICKNESS, 0.0) * align, PUSH_WIDTH),
        id if id.ends_with("_edge_push_left") || id.ends_with("_edge_push_right") => {
            let sign = if id.ends_with("left") { -1.0 } else { 1.0 };
            let x = sign * (0.5 * g("l") - 0.5 * DOOR_EDGE_STRIP);
            (t(x, -0.5 * g("h"), value) * align, PUSH_WIDTH)
        }
        other => return Err(ManipError::UnknownFamily(other.to_string())),
    };
    if width > MAX_GRIPPER_OPENING + 1e-12 {
        return Err(ManipError::TooWide(width));
    }
    Ok(GraspPose { pose, width, contact: family.contact })
}

/// `n` grasps with the free parameter drawn uniformly over its range.
pub fn sample_grasps(inst: &AssetInstance, family: &GraspFamily, n: usize, seed: u64) -> Result<Vec<(f64, GraspPose)>, ManipError> {
    let [lo, hi] = family.range(inst)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = rng.random_range(lo..=hi);
            grasp_pose(inst, family, v).map(|g| (v, g))
        })
        .collect()
}

/// Grasps related to `grasp` by the rotational symmetry of the part, the
/// original first. Only the knob has a discrete symmetry about its axis.
pub fn symmetry_orbit(inst: &AssetInstance, grasp: &GraspPose) -> Vec<GraspPose> {
    match inst.kind {
        AssetKind::Knob => {
            let n = inst.get("n").round().max(1.0) as usize;
            (0..n)
                .map(|k| grasp.transformed(&Transform3::from_rotation(Rotation3::about_y(2.0 * PI * k as f64 / n as f64))))
                .collect()
        }
        _ => vec![*grasp],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulationType {
    Pull,
    Push,
    Rotate,
    Slide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRule {
    pub rule_id: String,
    pub manipulation_type: ManipulationType,
    pub joint_kinds: Vec<JointKind>,
    pub synopsis: String,
    pub formula: String,
}

/// Every builtin force rule, one record per (joint kind, verb).
pub fn force_rules() -> Vec<ForceRule> {
    use JointKind::*;
    use ManipulationType::*;
    let rule = |id: &str, t: ManipulationType, kinds: Vec<JointKind>, synopsis: &str, formula: &str| ForceRule {
        rule_id: id.into(),
        manipulation_type: t,
        joint_kinds: kinds,
        synopsis: synopsis.into(),
        formula: formula.into(),
    };
    vec![
        rule("hinge_pull", Pull, vec![Revolute], "pull along the opening arc of a hinged part", "s * unit(a x (p - proj(p)))"),
        rule("hinge_push", Push, vec![Revolute], "push along the closing arc of a hinged part", "-s * unit(a x (p - proj(p)))"),
        rule("slide_pull", Pull, vec![Prismatic], "pull straight out along the slide", "s * a"),
        rule("slide_push", Push, vec![Prismatic], "push straight in along the slide", "-s * a"),
        rule("slide_open", Slide, vec![Prismatic], "slide along the rail toward open", "s * a"),
        rule(
            "turn_about_axis",
            Rotate,
            vec![Revolute],
            "rotate about the part's own symmetry axis (knob or faucet handle)",
            "unit(b x (p - proj_b(p))), b the symmetry axis",
        ),
    ]
}

pub fn find_rule(rule_id: &str) -> Result<ForceRule, ManipError> {
    force_rules()
        .into_iter()
        .find(|r| r.rule_id == rule_id)
        .ok_or_else(|| ManipError::UnknownRule(rule_id.to_string()))
}

/// Joint data expressed in some frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramedJoint {
    pub joint_id: String,
    pub kind: JointKind,
    pub anchor: Vec3,
    /// Unit axis.
    pub axis: Vec3,
    pub opening_sign: f64,
    pub range: [f64; 2],
    /// Joint value at which the frame was taken.
    pub q: f64,
}

impl FramedJoint {
    pub fn transformed(&self, t: &Transform3) -> FramedJoint {
        FramedJoint { anchor: t.apply_point(&self.anchor), axis: t.apply_dir(&self.axis), ..self.clone() }
    }

    /// Projection of `p` onto the joint line.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        self.anchor + self.axis * (p - self.anchor).dot(&self.axis)
    }

    /// Motion of the moving side for a joint change `dq`, in this frame.
    pub fn motion(&self, dq: f64) -> Transform3 {
        match self.kind {
            JointKind::Revolute => {
                let r = Rotation3::about_axis(&self.axis, dq);
                Transform3::new(r, self.anchor - r.apply(&self.anchor))
            }
            JointKind::Prismatic => Transform3::new(Rotation3::identity(), self.axis * dq),
        }
    }

    /// Unit direction of motion at `p` when the joint opens.
    pub fn opening_direction(&self, p: &Vec3) -> Result<Vec3, ManipError> {
        match self.kind {
            JointKind::Revolute => {
                let t = self.axis.cross(&(p - self.project(p)));
                let n = t.norm();
                if n < 1e-12 {
                    return Err(ManipError::OnAxis);
                }
                Ok(t / n * self.opening_sign)
            }
            JointKind::Prismatic => Ok(self.axis * self.opening_sign),
        }
    }
}

/// The joint moving `part_id`, expressed in that part's frame.
pub fn joint_in_part_frame(inst: &StructuralInstance, part_id: &str) -> Result<FramedJoint, ManipError> {
    let (joint_part, spec) = inst.governing_joint(part_id)?.ok_or_else(|| ManipError::NoJoint(part_id.to_string()))?;
    let (anchor, axis) = inst.joint_world(joint_part).expect("governing part carries the joint");
    let world = FramedJoint {
        joint_id: spec.joint_id.clone(),
        kind: spec.kind,
        anchor,
        axis,
        opening_sign: spec.opening_sign,
        range: spec.range,
        q: inst.joint_state[&spec.joint_id],
    };
    Ok(world.transformed(&inst.part_pose(part_id)?.invert()))
}

/// Symmetry axis of an asset in its canonical frame, through the origin.
pub fn symmetry_axis(kind: AssetKind) -> Option<Vec3> {
    match kind {
        AssetKind::Knob => Some(Vec3::y()),
        _ => None,
    }
}

/// Force direction in the part frame for `rule` applied at `grasp`.
pub fn force_direction(
    inst: &StructuralInstance,
    part_id: &str,
    rule: &ForceRule,
    grasp: &GraspPose,
) -> Result<Vec3, ManipError> {
    let joint = joint_in_part_frame(inst, part_id)?;
    let asset = inst.part(part_id)?.instance.kind;
    force_from_joint(&joint, asset, rule, grasp)
}

/// Force direction for a joint already expressed in the grasp's frame.
pub fn force_from_joint(joint: &FramedJoint, asset: AssetKind, rule: &ForceRule, grasp: &GraspPose) -> Result<Vec3, ManipError> {
    if !rule.joint_kinds.contains(&joint.kind) {
        return Err(ManipError::Incompatible { rule: rule.rule_id.clone(), kind: joint.kind });
    }
    let p = grasp.contact_point();
    match rule.manipulation_type {
        ManipulationType::Pull | ManipulationType::Slide => joint.opening_direction(&p),
        ManipulationType::Push => joint.opening_direction(&p).map(|f| -f),
        ManipulationType::Rotate => match symmetry_axis(asset) {
            Some(b) => {
                // Turn at the finger contact on the rim, in the sense that
                // opens the joint when the two axes are aligned.
                let contact = p + grasp.closing_axis() * (0.5 * grasp.width);
                let t = b.cross(&(contact - b * contact.dot(&b)));
                let n = t.norm();
                if n < 1e-12 {
                    return Err(ManipError::OnAxis);
                }
                let sense = if b.dot(&joint.axis) < 0.0 { -joint.opening_sign } else { joint.opening_sign };
                Ok(t / n * sense)
            }
            None => joint.opening_direction(&p),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Family,
    Rule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub id: String,
    pub synopsis: String,
}

/// Grasp families of the part's asset and the force rules that apply to the
/// joint moving it.
pub fn list_strategies(inst: &StructuralInstance, part_id: &str) -> Result<Vec<Strategy>, ManipError> {
    let part = inst.part(part_id)?;
    let mut out: Vec<Strategy> = families_for(part.instance.kind)
        .into_iter()
        .map(|f| Strategy { kind: StrategyKind::Family, id: f.family_id, synopsis: f.synopsis })
        .collect();
    if let Some((_, joint)) = inst.governing_joint(part_id)? {
        out.extend(
            force_rules()
                .into_iter()
                .filter(|r| r.joint_kinds.contains(&joint.kind))
                .map(|r| Strategy { kind: StrategyKind::Rule, id: r.rule_id, synopsis: r.synopsis }),
        );
    }
    Ok(out)
}

/// Another part's constraint expressed in the task part's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalConstraint {
    pub part_id: String,
    pub instance: AssetInstance,
    pub pose: Transform3,
}

/// Everything needed to act on one part, in that part's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipulationBlueprint {
    pub part_id: String,
    pub asset_id: String,
    pub family_id: String,
    pub rule_id: String,
    pub params: BTreeMap<String, f64>,
    pub grasp: GraspPose,
    pub force: Vec3,
    pub joint: FramedJoint,
    pub constraints: Vec<LocalConstraint>,
}

impl ManipulationBlueprint {
    pub fn build(
        inst: &StructuralInstance,
        part_id: &str,
        family_id: &str,
        value: f64,
        rule_id: &str,
    ) -> Result<ManipulationBlueprint, ManipError> {
        let part = inst.part(part_id)?;
        let family = find_family(family_id)?;
        let rule = find_rule(rule_id)?;
        let grasp = grasp_pose(&part.instance, &family, value)?;
        let force = force_direction(inst, part_id, &rule, &grasp)?;
        let joint = joint_in_part_frame(inst, part_id)?;
        let to_local = part.world_pose.invert();
        let constraints = inst
            .parts
            .iter()
            .map(|p| LocalConstraint {
                part_id: p.part_id.clone(),
                instance: p.instance.clone(),
                pose: to_local.compose(&p.world_pose),
            })
            .collect();
        Ok(ManipulationBlueprint {
            part_id: part_id.to_string(),
            asset_id: part.instance.asset_id().to_string(),
            family_id: family_id.to_string(),
            rule_id: rule_id.to_string(),
            params: [(family.param, value)].into_iter().collect(),
            grasp,
            force,
            joint,
            constraints,
        })
    }

    pub fn rule(&self) -> Result<ForceRule, ManipError> {
        find_rule(&self.rule_id)
    }
}
