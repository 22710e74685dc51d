//! Structural blueprints: trees of concept-asset parts connected by joints,
//! parameterized by shared free parameters.

pub mod builtin;
pub mod expr;
pub mod render;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{AssetInstance, AssetKind, ConceptAsset, ConceptError, ParamSpec};
use crate::geom::{Rotation3, Transform3, Vec3};
pub use builtin::{builtin_blueprint, builtin_blueprints, BUILTIN_IDS};
pub use expr::Expr;
pub use render::{oblique_camera, render_asset_partial, sample_camera, Camera, RenderOptions, SceneSdf};

pub const FORMAT_NAME: &str = "eac-blueprint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlueprintError {
    #[error("expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },
    #[error("free parameter `{name}` = {value} outside [{lower}, {upper}]")]
    ParamRange { name: String, value: f64, lower: f64, upper: f64 },
    #[error("free parameter `{0}` is not bound")]
    ParamUnbound(String),
    #[error("unknown free parameter `{0}`")]
    ParamUnknown(String),
    #[error("joint `{joint}` value {value} outside [{lower}, {upper}]")]
    JointRange { joint: String, value: f64, lower: f64, upper: f64 },
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("unknown part `{0}`")]
    UnknownPart(String),
    #[error("part `{part}`: {source}")]
    Part { part: String, source: ConceptError },
    #[error("invalid blueprint: {0}")]
    Structure(String),
    #[error("blueprint file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

/// A joint with concrete values, expressed in the parent part's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub joint_id: String,
    pub kind: JointKind,
    pub anchor: Vec3,
    pub axis: Vec3,
    pub range: [f64; 2],
    /// +1 if increasing q opens the joint, -1 otherwise.
    pub opening_sign: f64,
}

impl JointSpec {
    pub fn span(&self) -> f64 {
        self.range[1] - self.range[0]
    }

    pub fn contains(&self, q: f64) -> bool {
        q >= self.range[0] && q <= self.range[1]
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.range[0], self.range[1])
    }

    /// Joint value at the closed end of the range.
    pub fn closed(&self) -> f64 {
        if self.opening_sign > 0.0 {
            self.range[0]
        } else {
            self.range[1]
        }
    }

    /// Joint value at the fully open end of the range.
    pub fn fully_open(&self) -> f64 {
        if self.opening_sign > 0.0 {
            self.range[1]
        } else {
            self.range[0]
        }
    }

    /// How far `q` is from the closed end, in joint units (>= 0 in range).
    pub fn openness(&self, q: f64) -> f64 {
        (q - self.closed()) * self.opening_sign
    }

    /// Rigid motion of the child frame for joint value `q`.
    pub fn motion(&self, q: f64) -> Transform3 {
        match self.kind {
            JointKind::Revolute => {
                let r = Rotation3::about_axis(&self.axis, q);
                Transform3::new(r, self.anchor - r.apply(&self.anchor))
            }
            JointKind::Prismatic => Transform3::new(Rotation3::identity(), self.axis * q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountTemplate {
    pub translation: [Expr; 3],
    pub rpy: [Expr; 3],
}

impl MountTemplate {
    pub fn identity() -> MountTemplate {
        let z = || Expr::constant(0.0);
        MountTemplate { translation: [z(), z(), z()], rpy: [z(), z(), z()] }
    }

    fn resolve(&self, values: &BTreeMap<String, f64>) -> Result<Transform3, BlueprintError> {
        let mut t = [0.0; 3];
        let mut r = [0.0; 3];
        for i in 0..3 {
            t[i] = self.translation[i].eval(values)?;
            r[i] = self.rpy[i].eval(values)?;
        }
        Ok(Transform3::from_translation_rpy(Vec3::from(t), r))
    }

    fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.translation.iter().chain(self.rpy.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTemplate {
    pub joint_id: String,
    pub kind: JointKind,
    pub anchor: [Expr; 3],
    pub axis: Vec3,
    pub range: [Expr; 2],
    pub opening_sign: f64,
}

impl JointTemplate {
    fn resolve(&self, values: &BTreeMap<String, f64>) -> Result<JointSpec, BlueprintError> {
        let anchor = Vec3::new(self.anchor[0].eval(values)?, self.anchor[1].eval(values)?, self.anchor[2].eval(values)?);
        let range = [self.range[0].eval(values)?, self.range[1].eval(values)?];
        if !(range[0] < range[1]) {
            return Err(BlueprintError::Structure(format!(
                "joint `{}` has empty range [{}, {}]",
                self.joint_id, range[0], range[1]
            )));
        }
        Ok(JointSpec {
            joint_id: self.joint_id.clone(),
            kind: self.kind,
            anchor,
            axis: self.axis,
            range,
            opening_sign: self.opening_sign,
        })
    }

    fn exprs(&self) -> impl Iterator<Item = &Expr> {
        self.anchor.iter().chain(self.range.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartNode {
    pub part_id: String,
    pub asset: AssetKind,
    pub params: BTreeMap<String, Expr>,
    pub mount: MountTemplate,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub joint: Option<JointTemplate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralBlueprint {
    pub blueprint_id: String,
    pub category: String,
    pub description: String,
    /// Part a gripper interacts with for the default open/close task.
    pub task_part: String,
    pub free_params: Vec<ParamSpec>,
    pub parts: Vec<PartNode>,
}

#[derive(Serialize, Deserialize)]
struct BlueprintFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    blueprint: StructuralBlueprint,
}

impl StructuralBlueprint {
    /// Checks tree structure, identifier references and joint axes.
    pub fn validate(&self) -> Result<(), BlueprintError> {
        let fail = |m: String| Err(BlueprintError::Structure(m));
        let mut names = BTreeSet::new();
        for p in &self.free_params {
            if !names.insert(p.name.as_str()) {
                return fail(format!("duplicate free parameter `{}`", p.name));
            }
            if !(p.lower < p.upper) {
                return fail(format!("free parameter `{}` has lower >= upper", p.name));
            }
        }
        let nominal: BTreeMap<String, f64> =
            self.free_params.iter().map(|p| (p.name.clone(), p.midpoint())).collect();
        let mut ids = BTreeSet::new();
        let mut joints = BTreeSet::new();
        let mut used = BTreeSet::new();
        let mut roots = 0;
        for (i, part) in self.parts.iter().enumerate() {
            if !ids.insert(part.part_id.as_str()) {
                return fail(format!("duplicate part `{}`", part.part_id));
            }
            match &part.parent {
                None => roots += 1,
                Some(parent) => {
                    // Parents must precede children, which also rules out cycles.
                    if !self.parts[..i].iter().any(|q| &q.part_id == parent) {
                        return fail(format!("part `{}`: parent `{}` must be declared before it", part.part_id, parent));
                    }
                }
            }
            let asset = ConceptAsset::builtin(part.asset);
            for spec in &asset.params {
                if !part.params.contains_key(&spec.name) {
                    return fail(format!("part `{}`: asset parameter `{}` has no expression", part.part_id, spec.name));
                }
            }
            for name in part.params.keys() {
                if asset.param(name).is_none() {
                    return fail(format!("part `{}`: `{}` is not a parameter of {}", part.part_id, name, asset.asset_id));
                }
            }
            let mut exprs: Vec<&Expr> = part.params.values().chain(part.mount.exprs()).collect();
            if let Some(j) = &part.joint {
                if part.parent.is_none() {
                    return fail(format!("root part `{}` cannot have a joint", part.part_id));
                }
                if !joints.insert(j.joint_id.as_str()) {
                    return fail(format!("duplicate joint `{}`", j.joint_id));
                }
                if (j.axis.norm() - 1.0).abs() > 1e-9 {
                    return fail(format!("joint `{}` axis is not unit length", j.joint_id));
                }
                if j.opening_sign != 1.0 && j.opening_sign != -1.0 {
                    return fail(format!("joint `{}` opening_sign must be +1 or -1", j.joint_id));
                }
                exprs.extend(j.exprs());
            }
            for e in exprs {
                for v in e.variables() {
                    if !names.contains(v.as_str()) {
                        return fail(format!("part `{}`: expression `{}` uses unknown `{}`", part.part_id, e.source(), v));
                    }
                    used.insert(v);
                }
                e.eval(&nominal)?;
            }
        }
        if roots != 1 {
            return fail(format!("expected exactly one root part, found {roots}"));
        }
        for p in &self.free_params {
            if !used.contains(&p.name) {
                return fail(format!("free parameter `{}` is not referenced by any part", p.name));
            }
        }
        if !ids.contains(self.task_part.as_str()) {
            return fail(format!("task part `{}` does not exist", self.task_part));
        }
        Ok(())
    }

    pub fn part_index(&self, part_id: &str) -> Result<usize, BlueprintError> {
        self.parts
            .iter()
            .position(|p| p.part_id == part_id)
            .ok_or_else(|| BlueprintError::UnknownPart(part_id.to_string()))
    }

    pub fn free_param(&self, name: &str) -> Option<&ParamSpec> {
        self.free_params.iter().find(|p| p.name == name)
    }

    pub fn joint_ids(&self) -> Vec<String> {
        self.parts.iter().filter_map(|p| p.joint.as_ref().map(|j| j.joint_id.clone())).collect()
    }

    /// Free parameters at the middle of their ranges.
    pub fn nominal_params(&self) -> BTreeMap<String, f64> {
        self.free_params.iter().map(|p| (p.name.clone(), p.midpoint())).collect()
    }

    pub fn to_json(&self) -> String {
        let file = BlueprintFile { format: FORMAT_NAME.into(), version: FORMAT_VERSION, blueprint: self.clone() };
        serde_json::to_string_pretty(&file).expect("blueprints serialize")
    }

    pub fn from_json(text: &str) -> Result<StructuralBlueprint, BlueprintError> {
        let file: BlueprintFile = serde_json::from_str(text).map_err(|e| BlueprintError::Format(e.to_string()))?;
        if file.format != FORMAT_NAME {
            return Err(BlueprintError::Format(format!("expected format `{FORMAT_NAME}`, found `{}`", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(BlueprintError::Format(format!("unsupported version {}", file.version)));
        }
        file.blueprint.validate()?;
        Ok(file.blueprint)
    }
}

/// A part with concrete parameters and its pose under the instance's joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPart {
    pub part_id: String,
    pub instance: AssetInstance,
    pub mount: Transform3,
    pub parent: Option<usize>,
    pub joint: Option<JointSpec>,
    /// Pose in the object frame (before the instance's world pose).
    pub local_pose: Transform3,
    pub world_pose: Transform3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuralInstance {
    pub blueprint: StructuralBlueprint,
    pub params: BTreeMap<String, f64>,
    pub pose: Transform3,
    pub joint_state: BTreeMap<String, f64>,
    pub parts: Vec<ResolvedPart>,
}

/// Binds free parameters, object pose and joint values. Joints missing from
/// `joint_state` start closed.
pub fn instantiate(
    bp: &StructuralBlueprint,
    params: &BTreeMap<String, f64>,
    pose: Transform3,
    joint_state: &BTreeMap<String, f64>,
) -> Result<StructuralInstance, BlueprintError> {
    for name in params.keys() {
        if bp.free_param(name).is_none() {
            return Err(BlueprintError::ParamUnknown(name.clone()));
        }
    }
    for spec in &bp.free_params {
        let v = *params.get(&spec.name).ok_or_else(|| BlueprintError::ParamUnbound(spec.name.clone()))?;
        if !v.is_finite() || !spec.contains(v) {
            return Err(BlueprintError::ParamRange { name: spec.name.clone(), value: v, lower: spec.lower, upper: spec.upper });
        }
    }
    let known = bp.joint_ids();
    for j in joint_state.keys() {
        if !known.contains(j) {
            return Err(BlueprintError::UnknownJoint(j.clone()));
        }
    }
    let mut parts: Vec<ResolvedPart> = Vec::with_capacity(bp.parts.len());
    let mut state = BTreeMap::new();
    for node in &bp.parts {
        let mut values = BTreeMap::new();
        for (name, e) in &node.params {
            values.insert(name.clone(), e.eval(params)?);
        }
        let instance = ConceptAsset::builtin(node.asset)
            .instantiate(&values)
            .map_err(|source| BlueprintError::Part { part: node.part_id.clone(), source })?;
        let mount = node.mount.resolve(params)?;
        let parent = match &node.parent {
            Some(pid) => Some(parts.iter().position(|p| &p.part_id == pid).ok_or_else(|| BlueprintError::UnknownPart(pid.clone()))?),
            None => None,
        };
        let joint = node.joint.as_ref().map(|j| j.resolve(params)).transpose()?;
        let parent_local = parent.map(|i| parts[i].local_pose).unwrap_or_else(Transform3::identity);
        let motion = match &joint {
            Some(j) => {
                let q = joint_state.get(&j.joint_id).copied().unwrap_or_else(|| j.closed());
                if !q.is_finite() || !j.contains(q) {
                    return Err(BlueprintError::JointRange {
                        joint: j.joint_id.clone(),
                        value: q,
                        lower: j.range[0],
                        upper: j.range[1],
                    });
                }
                state.insert(j.joint_id.clone(), q);
                j.motion(q)
            }
            None => Transform3::identity(),
        };
        let local_pose = parent_local * motion * mount;
        parts.push(ResolvedPart {
            part_id: node.part_id.clone(),
            instance,
            mount,
            parent,
            joint,
            local_pose,
            world_pose: pose * local_pose,
        });
    }
    Ok(StructuralInstance { blueprint: bp.clone(), params: params.clone(), pose, joint_state: state, parts })
}

impl StructuralInstance {
    pub fn part(&self, part_id: &str) -> Result<&ResolvedPart, BlueprintError> {
        self.parts
            .iter()
            .find(|p| p.part_id == part_id)
            .ok_or_else(|| BlueprintError::UnknownPart(part_id.to_string()))
    }

    pub fn part_index(&self, part_id: &str) -> Result<usize, BlueprintError> {
        self.parts
            .iter()
            .position(|p| p.part_id == part_id)
            .ok_or_else(|| BlueprintError::UnknownPart(part_id.to_string()))
    }

    pub fn part_pose(&self, part_id: &str) -> Result<Transform3, BlueprintError> {
        self.part(part_id).map(|p| p.world_pose)
    }

    /// The joint moving `part_id`: its own joint or the nearest ancestor's,
    /// together with the index of the part carrying it.
    pub fn governing_joint(&self, part_id: &str) -> Result<Option<(usize, &JointSpec)>, BlueprintError> {
        let mut idx = Some(self.part_index(part_id)?);
        while let Some(i) = idx {
            if let Some(j) = &self.parts[i].joint {
                return Ok(Some((i, j)));
            }
            idx = self.parts[i].parent;
        }
        Ok(None)
    }

    /// World frame of the joint: anchor point and unit axis.
    pub fn joint_world(&self, joint_part: usize) -> Option<(Vec3, Vec3)> {
        let part = &self.parts[joint_part];
        let j = part.joint.as_ref()?;
        let parent_world = part.parent.map(|i| self.parts[i].world_pose).unwrap_or(self.pose);
        Some((parent_world.apply_point(&j.anchor), parent_world.apply_dir(&j.axis).normalize()))
    }

    pub fn joint(&self, joint_id: &str) -> Result<&JointSpec, BlueprintError> {
        self.parts
            .iter()
            .filter_map(|p| p.joint.as_ref())
            .find(|j| j.joint_id == joint_id)
            .ok_or_else(|| BlueprintError::UnknownJoint(joint_id.to_string()))
    }

    pub fn joint_value(&self, joint_id: &str) -> Result<f64, BlueprintError> {
        self.joint_state.get(joint_id).copied().ok_or_else(|| BlueprintError::UnknownJoint(joint_id.to_string()))
    }

    /// New instance with one joint changed (value semantics).
    pub fn with_joint(&self, joint_id: &str, q: f64) -> Result<StructuralInstance, BlueprintError> {
        let mut state = self.joint_state.clone();
        if !state.contains_key(joint_id) {
            return Err(BlueprintError::UnknownJoint(joint_id.to_string()));
        }
        state.insert(joint_id.to_string(), q);
        instantiate(&self.blueprint, &self.params, self.pose, &state)
    }

    pub fn with_pose(&self, pose: Transform3) -> StructuralInstance {
        let mut out = self.clone();
        out.pose = pose;
        for p in &mut out.parts {
            p.world_pose = pose * p.local_pose;
        }
        out
    }

    /// Signed distance-like value of the whole object at a world point.
    pub fn world_sdf(&self, p: &Vec3) -> f64 {
        self.parts
            .iter()
            .map(|part| part.instance.constraint(&part.world_pose.invert().apply_point(p)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn record(&self) -> InstanceRecord {
        InstanceRecord {
            blueprint: self.blueprint.clone(),
            params: self.params.clone(),
            pose: self.pose,
            joint_state: self.joint_state.clone(),
        }
    }
}

/// Serializable form of a [`StructuralInstance`]; parts are re-derived on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub blueprint: StructuralBlueprint,
    pub params: BTreeMap<String, f64>,
    pub pose: Transform3,
    pub joint_state: BTreeMap<String, f64>,
}

impl InstanceRecord {
    pub fn instantiate(&self) -> Result<StructuralInstance, BlueprintError> {
        self.blueprint.validate()?;
        instantiate(&self.blueprint, &self.params, self.pose, &self.joint_state)
    }
}
