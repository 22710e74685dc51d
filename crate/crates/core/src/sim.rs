//! Quasi-static articulation simulator with a flying parallel gripper, and
//! the episode protocol built on top of it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blueprint::{instantiate, sample_camera, JointKind, JointSpec, RenderOptions, StructuralBlueprint, StructuralInstance};
use crate::concepts::{builtin_library, prune, AssetInstance, AssetKind, ConceptAsset, RegionKind};
use crate::executor::{gripper_proxy, plan_motion, to_world, Phase, PlanConfig, PlanError, Trajectory, WorldPlan};
use crate::fit::{fit_structural, resolve_symmetry, Coverage, FitConfig, FitError, FitResult, MIN_FIT_POINTS};
use crate::geom::{PointCloud, Rotation3, Transform3, Vec3};
use crate::manipulation::{
    canonical_alignment, list_strategies, sample_grasps, GraspPose, ManipulationBlueprint, Strategy,
    StrategyKind,
};

/// Largest distance between the fingertip midpoint and a contact, meters.
pub const CONTACT_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("gripper is not attached to any part")]
    Detached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub part_id: String,
    /// Gripper pose in the attached part's frame.
    pub grip: Transform3,
    pub contact: RegionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gripper {
    pub pose: Transform3,
    pub width: f64,
    pub attached: Option<Attachment>,
}

/// Joint response of the quasi-static update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub gain: f64,
    /// Largest revolute change per step, radians.
    pub revolute_cap: f64,
    /// Largest prismatic change per step, meters.
    pub prismatic_cap: f64,
}

impl Default for Response {
    fn default() -> Self {
        Response { gain: 1.0, revolute_cap: 5f64.to_radians(), prismatic_cap: 0.02 }
    }
}

#[derive(Debug, Clone)]
pub struct SimScene {
    pub instance: StructuralInstance,
    pub gripper: Gripper,
    pub response: Response,
}

impl SimScene {
    /// Scene with a free, open gripper 1 m above the origin facing +y.
    pub fn new(instance: StructuralInstance) -> SimScene {
        SimScene {
            instance,
            gripper: Gripper {
                pose: Transform3::new(canonical_alignment(), Vec3::new(0.0, -0.5, 1.0)),
                width: crate::manipulation::MAX_GRIPPER_OPENING,
                attached: None,
            },
            response: Response::default(),
        }
    }

    /// Part whose affordance region admits the gripper at `g`, if any.
    pub fn grasp_candidate(&self, g: &GraspPose) -> Option<String> {
        let c = g.contact_point();
        let y = g.closing_axis();
        let tips = [c + y * (0.5 * g.width), c - y * (0.5 * g.width)];
        let mut best: Option<(f64, &str)> = None;
        for part in &self.instance.parts {
            let inv = part.world_pose.invert();
            let local_c = inv.apply_point(&c);
            // Every admissible contact lies within half the opening of the midpoint.
            if part.instance.constraint(&local_c) > 0.5 * g.width + CONTACT_TOLERANCE {
                continue;
            }
            if g.contact == RegionKind::Grasp
                && tips.iter().any(|t| part.instance.constraint(&inv.apply_point(t)) < 0.0)
            {
                continue;
            }
            for region in part.instance.affordance_regions().iter().filter(|r| r.kind == g.contact) {
                for q in region.grid(0.002) {
                    let d = part.world_pose.apply_point(&q) - c;
                    let dist = match g.contact {
                        RegionKind::Grasp => {
                            let along = d.dot(&y);
                            if along.abs() > 0.5 * g.width {
                                continue;
                            }
                            (d - y * along).norm()
                        }
                        RegionKind::Push => d.norm(),
                    };
                    if dist <= CONTACT_TOLERANCE && best.is_none_or(|(b, _)| dist < b) {
                        best = Some((dist, &part.part_id));
                    }
                }
            }
        }
        best.map(|(_, id)| id.to_string())
    }

    /// Moves the gripper to `g` and closes it; attaches rigidly when the
    /// fingers hold an affordance region.
    pub fn try_grasp(&self, g: &GraspPose) -> SimScene {
        let mut out = self.clone();
        out.gripper = Gripper { pose: g.pose, width: g.width, attached: None };
        if let Some(part_id) = self.grasp_candidate(g) {
            let part_pose = self.instance.part_pose(&part_id).expect("candidate part exists");
            out.gripper.attached = Some(Attachment { part_id, grip: part_pose.invert().compose(&g.pose), contact: g.contact });
        }
        out
    }

    /// Joint change caused by moving the attached contact by `d`.
    pub fn joint_response(&self, d: &Vec3) -> Result<Option<(String, f64)>, SimError> {
        let att = self.gripper.attached.as_ref().ok_or(SimError::Detached)?;
        let Some((joint_part, spec)) = self.instance.governing_joint(&att.part_id).expect("attached part exists") else {
            return Ok(None);
        };
        let d = match att.contact {
            RegionKind::Grasp => *d,
            RegionKind::Push => {
                // A fingertip only transmits motion into the surface.
                let n = self.gripper.pose.rotation.column(0);
                n * d.dot(&n).max(0.0)
            }
        };
        let (anchor, axis) = self.instance.joint_world(joint_part).expect("joint part carries a joint");
        let p = self.gripper.pose.translation;
        let r = self.response;
        let dq = match spec.kind {
            JointKind::Revolute => {
                let arm = p - anchor - axis * (p - anchor).dot(&axis);
                let r2 = arm.norm_squared();
                if r2 < 1e-12 {
                    0.0
                } else {
                    (r.gain * arm.cross(&d).dot(&axis) / r2).clamp(-r.revolute_cap, r.revolute_cap)
                }
            }
            JointKind::Prismatic => (r.gain * d.dot(&axis)).clamp(-r.prismatic_cap, r.prismatic_cap),
        };
        Ok(Some((spec.joint_id.clone(), dq)))
    }

    /// Quasi-static update for a contact displacement `d`; the gripper moves
    /// rigidly with the attached part.
    pub fn step_interact(&self, d: &Vec3) -> Result<SimScene, SimError> {
        let Some((joint_id, dq)) = self.joint_response(d)? else {
            return Ok(self.clone());
        };
        if dq == 0.0 {
            return Ok(self.clone());
        }
        let spec = self.instance.joint(&joint_id).expect("joint exists");
        let q = spec.clamp(self.instance.joint_state[&joint_id] + dq);
        let mut out = self.clone();
        out.instance = self.instance.with_joint(&joint_id, q).expect("clamped joint value is valid");
        let att = self.gripper.attached.as_ref().expect("checked above");
        out.gripper.pose = out.instance.part_pose(&att.part_id).expect("part exists").compose(&att.grip);
        Ok(out)
    }

    /// Deepest penetration of the gripper proxy into parts other than `skip`.
    pub fn penetration(&self, pose: &Transform3, width: f64, skip: &str) -> Option<(f64, String)> {
        let mut worst: Option<(f64, String)> = None;
        for p in gripper_proxy(pose, width) {
            for part in self.instance.parts.iter().filter(|q| q.part_id != skip) {
                let v = part.instance.constraint(&part.world_pose.invert().apply_point(&p));
                if v < 0.0 && worst.as_ref().is_none_or(|(w, _)| -v > *w) {
                    worst = Some((-v, part.part_id.clone()));
                }
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Pull,
    Push,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Pull => "pull",
            TaskKind::Push => "push",
        }
    }

    /// +1 when the task opens the joint.
    pub fn sign(&self) -> f64 {
        match self {
            TaskKind::Pull => 1.0,
            TaskKind::Push => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perception {
    /// Task-part parameters and pose read from the scene.
    GroundTruth,
    /// Task-part parameters and pose fitted to a rendered partial view.
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub seed: u64,
    /// Chance of starting at the task's start end (closed for pulling,
    /// fully open for pushing); otherwise the joint starts at random.
    pub closed_probability: f64,
    /// Success threshold as a fraction of the joint range.
    pub success_fraction: f64,
    pub max_steps: usize,
    /// Contact displacement per interaction step, meters.
    pub step_length: f64,
    pub perception: Perception,
    pub camera_distance: f64,
    pub points_per_part: usize,
    pub noise_sigma: f64,
    /// Camera views tried before giving up on a visible task part.
    pub views: usize,
    /// Penetration tolerated along the executed approach, meters.
    pub collision_tolerance: f64,
    pub plan: PlanConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            seed: 0,
            closed_probability: 0.5,
            success_fraction: 0.1,
            max_steps: 40,
            step_length: 0.01,
            perception: Perception::Fitted,
            camera_distance: 1.5,
            points_per_part: 2048,
            noise_sigma: 5e-4,
            views: 8,
            collision_tolerance: 2e-3,
            plan: PlanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureReason {
    NoGrasp,
    NoMotion,
    WrongDirection,
    Collision,
    PlanFail,
}

impl FailureReason {
    pub fn name(&self) -> &'static str {
        match self {
            FailureReason::NoGrasp => "no-grasp",
            FailureReason::NoMotion => "no-motion",
            FailureReason::WrongDirection => "wrong-direction",
            FailureReason::Collision => "collision",
            FailureReason::PlanFail => "plan-fail",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub blueprint_id: String,
    pub task: TaskKind,
    pub seed: u64,
    pub success: bool,
    pub failure: Option<FailureReason>,
    /// Free-text detail for failures.
    pub detail: Option<String>,
    pub concept: Option<String>,
    pub strategy: Option<(String, String)>,
    pub fit_residual: Option<f64>,
    /// Values of the task joint: initial state, then one per interaction step.
    pub joint_trajectory: Vec<f64>,
    pub steps: usize,
}

impl EpisodeResult {
    pub fn new(bp: &StructuralBlueprint, task: TaskKind, seed: u64) -> EpisodeResult {
        EpisodeResult {
            blueprint_id: bp.blueprint_id.clone(),
            task,
            seed,
            success: false,
            failure: None,
            detail: None,
            concept: None,
            strategy: None,
            fit_residual: None,
            joint_trajectory: Vec::new(),
            steps: 0,
        }
    }

    pub fn fail(mut self, reason: FailureReason, detail: impl Into<String>) -> EpisodeResult {
        self.success = false;
        self.failure = Some(reason);
        self.detail = Some(detail.into());
        self
    }
}

/// Inputs for concept selection.
pub struct ConceptQuery<'a> {
    pub blueprint: &'a StructuralBlueprint,
    pub part_id: &'a str,
    pub candidates: &'a [AssetKind],
    pub cloud: &'a PointCloud,
    pub fit: &'a FitConfig,
}

/// A chosen concept, optionally with the fit already computed for it.
pub struct ConceptChoice {
    pub kind: AssetKind,
    pub fit: Option<Result<FitResult, FitError>>,
}

/// Decision points of an episode that a reasoner can take over.
pub trait Pipeline: Sync {
    fn select_concept(&self, query: &ConceptQuery) -> Result<ConceptChoice, String>;
    /// Grasp family and force rule ids.
    fn select_strategy(&self, task: TaskKind, strategies: &[Strategy]) -> Result<(String, String), String>;
}

/// Uses the blueprint's own asset for the task part and the default strategy.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePipeline;

impl Pipeline for OraclePipeline {
    fn select_concept(&self, query: &ConceptQuery) -> Result<ConceptChoice, String> {
        let kind = query
            .blueprint
            .parts
            .iter()
            .find(|p| p.part_id == query.part_id)
            .map(|p| p.asset)
            .unwrap_or(query.candidates[0]);
        Ok(ConceptChoice { kind, fit: None })
    }

    fn select_strategy(&self, task: TaskKind, strategies: &[Strategy]) -> Result<(String, String), String> {
        default_strategy(task, strategies).ok_or_else(|| "no applicable strategy".into())
    }
}

/// First pinch family, or first family when none pinches, with the rule
/// whose verb matches the task.
pub fn default_strategy(task: TaskKind, strategies: &[Strategy]) -> Option<(String, String)> {
    let families: Vec<&Strategy> = strategies.iter().filter(|s| s.kind == StrategyKind::Family).collect();
    let family = families
        .iter()
        .find(|s| crate::manipulation::find_family(&s.id).is_ok_and(|f| f.contact == RegionKind::Grasp))
        .or(families.first())?;
    let verb = task.name();
    let rule = strategies.iter().find(|s| s.kind == StrategyKind::Rule && s.id.ends_with(verb))?;
    Some((family.id.clone(), rule.id.clone()))
}

/// Concept candidates for a part: library assets sharing its first tag.
pub fn concept_candidates(kind: AssetKind) -> Vec<AssetKind> {
    let own = ConceptAsset::builtin(kind);
    let tag = own.category_tags.first().cloned().unwrap_or_default();
    let mut out: Vec<AssetKind> = prune(&builtin_library(), &tag).iter().map(|a| a.kind).collect();
    if !out.contains(&kind) {
        out.push(kind);
    }
    out
}

/// Uniformly drawn free parameters that instantiate.
pub fn sample_object<R: Rng + ?Sized>(bp: &StructuralBlueprint, rng: &mut R) -> BTreeMap<String, f64> {
    for _ in 0..200 {
        let params: BTreeMap<String, f64> =
            bp.free_params.iter().map(|s| (s.name.clone(), rng.random_range(s.lower..=s.upper))).collect();
        if instantiate(bp, &params, Transform3::identity(), &BTreeMap::new()).is_ok() {
            return params;
        }
    }
    bp.nominal_params()
}

/// Initial task-joint value per the evaluation protocol.
pub fn initial_joint<R: Rng + ?Sized>(spec: &crate::blueprint::JointSpec, task: TaskKind, cfg: &EpisodeConfig, rng: &mut R) -> f64 {
    let span = spec.span();
    let room = (1.5 * cfg.success_fraction).min(0.9);
    let openness = if rng.random_bool(cfg.closed_probability.clamp(0.0, 1.0)) {
        match task {
            TaskKind::Pull => 0.0,
            TaskKind::Push => span,
        }
    } else {
        match task {
            TaskKind::Pull => rng.random_range(0.0..=(1.0 - room)) * span,
            TaskKind::Push => rng.random_range(room..=1.0) * span,
        }
    };
    spec.clamp(spec.closed() + spec.opening_sign * openness)
}

/// Joint value at which the blueprint's task part best explains `cloud`.
fn estimate_joint(believed: &StructuralInstance, part_id: &str, joint_id: &str, cloud: &PointCloud) -> f64 {
    let spec = believed.joint(joint_id).expect("task joint exists").clone();
    let pts = cloud.subsample(300);
    let cost = |q: f64| -> f64 {
        let Ok(inst) = believed.with_joint(joint_id, q) else { return f64::INFINITY };
        let part = inst.part(part_id).expect("task part exists");
        let inv = part.world_pose.invert();
        pts.points.iter().map(|p| part.instance.constraint(&inv.apply_point(p)).abs()).sum::<f64>() / pts.len().max(1) as f64
    };
    let n = 48;
    let grid: Vec<f64> = (0..=n).map(|i| spec.range[0] + spec.span() * i as f64 / n as f64).collect();
    let (mut best, mut best_cost) = (grid[0], f64::INFINITY);
    for q in &grid {
        let c = cost(*q);
        if c < best_cost {
            best = *q;
            best_cost = c;
        }
    }
    // Golden-section refinement inside the neighbouring cells.
    let h = spec.span() / n as f64;
    let (mut a, mut b) = ((best - h).max(spec.range[0]), (best + h).min(spec.range[1]));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..30 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let q = 0.5 * (a + b);
    if cost(q) <= best_cost { q } else { best }
}

/// Everything the episode believes about the object before acting.
pub struct Belief {
    pub instance: StructuralInstance,
    /// Pose of the task part used to place the grasp.
    pub part_pose: Transform3,
    pub concept: AssetKind,
    pub fit_residual: Option<f64>,
    /// Task-part points in the view used for fitting, and the views tried.
    pub observed_points: usize,
    pub views: usize,
}

/// Perceives the task part of `truth`; `None` when no view shows it.
pub fn perceive<R: Rng + ?Sized>(
    truth: &StructuralInstance,
    cfg: &EpisodeConfig,
    pipeline: &dyn Pipeline,
    rng: &mut R,
) -> Result<Belief, String> {
    let bp = &truth.blueprint;
    let part_id = bp.task_part.as_str();
    let task = truth.part(part_id).map_err(|e| e.to_string())?;
    if cfg.perception == Perception::GroundTruth {
        return Ok(Belief {
            instance: truth.clone(),
            part_pose: task.world_pose,
            concept: task.instance.kind,
            fit_residual: None,
            observed_points: 0,
            views: 0,
        });
    }
    let label = truth.part_index(part_id).map_err(|e| e.to_string())? as u32;
    let center = truth.render(64, 0).centroid().unwrap_or_default();
    let mut view = None;
    let mut views = 0;
    for _ in 0..cfg.views.max(1) {
        views += 1;
        let cam = sample_camera(rng, center, cfg.camera_distance);
        let opts = RenderOptions { points_per_part: cfg.points_per_part, seed: rng.random(), noise_sigma: cfg.noise_sigma };
        let full = truth.render_partial(&cam, &opts);
        let cloud = full.with_label(label);
        if cloud.len() >= MIN_FIT_POINTS {
            let labels = full.labels.as_deref().unwrap_or(&[]);
            let others: Vec<Vec3> =
                full.points.iter().zip(labels).filter(|(_, l)| **l != label).map(|(p, _)| *p).collect();
            view = Some((cam, cloud, others));
            break;
        }
    }
    let (cam, cloud, others) = view.ok_or("task part not visible from any sampled view")?;
    let node = bp.parts.iter().find(|p| p.part_id == part_id).expect("task part node");
    let (_, joint) = truth.governing_joint(part_id).map_err(|e| e.to_string())?.ok_or("task part has no joint")?;
    let joint_id = joint.joint_id.clone();

    // Orientation prior from the blueprint with nominal parameters.
    let nominal = instantiate(bp, &bp.nominal_params(), truth.pose, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let q_prior = estimate_joint(&nominal, part_id, &joint_id, &cloud);
    let hint = nominal.with_joint(&joint_id, q_prior).map_err(|e| e.to_string())?.part_pose(part_id).map_err(|e| e.to_string())?.rotation;
    let fit_cfg = FitConfig {
        coverage: Coverage::Viewpoint(cam.position),
        seed: rng.random(),
        orientation_hint: Some(hint),
        occluders: others,
        ..FitConfig::default()
    };
    let candidates = concept_candidates(task.instance.kind);
    let choice = pipeline.select_concept(&ConceptQuery {
        blueprint: bp,
        part_id,
        candidates: &candidates,
        cloud: &cloud,
        fit: &fit_cfg,
    })?;
    let fit = match choice.fit {
        Some(f) => f,
        None => fit_structural(&ConceptAsset::builtin(choice.kind), &cloud, &fit_cfg),
    };
    let fit = match fit {
        Ok(f) => f,
        Err(FitError::NoFit { best, .. }) => *best,
        Err(e) => return Err(format!("fit failed: {e}")),
    };

    // Blueprint prior with the fitted part parameters bound where possible.
    let mut params = bp.nominal_params();
    if choice.kind == node.asset {
        for (name, expr) in &node.params {
            if let (Some(id), Some(v)) = (expr.as_identifier(), fit.params.get(name)) {
                if let Some(spec) = bp.free_param(id) {
                    params.insert(id.to_string(), spec.clamp(*v));
                }
            }
        }
    }
    if instantiate(bp, &params, truth.pose, &BTreeMap::new()).is_err() {
        params = bp.nominal_params();
    }
    let believed = instantiate(bp, &params, truth.pose, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let q = estimate_joint(&believed, part_id, &joint_id, &cloud);
    let mut believed = believed.with_joint(&joint_id, q).map_err(|e| e.to_string())?;

    let prior = believed.part_pose(part_id).map_err(|e| e.to_string())?.rotation;
    let part_pose = resolve_symmetry(&fit.instance(), &fit.pose, &prior);
    // Parts moving with the task part follow it onto the observation; the
    // joint itself stays where the blueprint puts it.
    let idx = believed.part_index(part_id).expect("task part");
    let shift = part_pose.compose(&believed.parts[idx].world_pose.invert());
    let (joint_part, _) = believed.governing_joint(part_id).expect("task part").expect("task joint");
    for i in 0..believed.parts.len() {
        let mut k = Some(i);
        while let Some(j) = k.filter(|j| *j != joint_part) {
            k = believed.parts[j].parent;
        }
        if k.is_some() {
            believed.parts[i].world_pose = shift.compose(&believed.parts[i].world_pose);
        }
    }
    believed.parts[idx].instance = fit.instance();
    believed.parts[idx].world_pose = part_pose;
    Ok(Belief {
        instance: believed,
        part_pose,
        concept: choice.kind,
        fit_residual: Some(fit.residual),
        observed_points: cloud.len(),
        views,
    })
}

/// Plans a grasp and motion for the believed object, trying the family's
/// midpoint first and then sampled values.
pub fn plan_for(
    belief: &Belief,
    family_id: &str,
    rule_id: &str,
    cfg: &EpisodeConfig,
    current: &Rotation3,
) -> Result<(ManipulationBlueprint, WorldPlan, Trajectory), String> {
    let part_id = belief.instance.blueprint.task_part.clone();
    let part = belief.instance.part(&part_id).map_err(|e| e.to_string())?;
    let family = crate::manipulation::find_family(family_id).map_err(|e| e.to_string())?;
    let [lo, hi] = family.range(&part.instance).map_err(|e| e.to_string())?;
    let mut values = vec![0.5 * (lo + hi)];
    values.extend(sample_grasps(&part.instance, &family, 8, cfg.seed).map_err(|e| e.to_string())?.into_iter().map(|(v, _)| v));
    let mut last = String::from("no grasp value");
    for v in values {
        let mb = ManipulationBlueprint::build(&belief.instance, &part_id, family_id, v, rule_id).map_err(|e| e.to_string())?;
        let plan = to_world(&mb, &belief.part_pose, Some(current)).map_err(|e| e.to_string())?;
        match plan_motion(&plan, &cfg.plan) {
            Ok(traj) => return Ok((mb, plan, traj)),
            Err(e @ (PlanError::Blocked { .. } | PlanError::Unreachable(_))) => last = e.to_string(),
            Err(e) => return Err(e.to_string()),
        }
    }
    Err(last)
}

/// Object and initial joint state of an episode, with the generator state
/// left for perception.
pub fn sample_scene(bp: &StructuralBlueprint, task: TaskKind, cfg: &EpisodeConfig) -> Result<(StructuralInstance, ChaCha8Rng), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = sample_object(bp, &mut rng);
    let base = instantiate(bp, &params, Transform3::identity(), &BTreeMap::new()).map_err(|e| e.to_string())?;
    let Ok(Some((_, spec))) = base.governing_joint(&bp.task_part) else {
        return Err("task part has no joint".into());
    };
    let q0 = initial_joint(spec, task, cfg, &mut rng);
    let truth = base.with_joint(&spec.joint_id.clone(), q0).map_err(|e| e.to_string())?;
    Ok((truth, rng))
}

/// One sampled object under manipulation, advanced stage by stage so a task
/// loop can grasp, act and check conditions in between.
pub struct Session<'p> {
    pub blueprint: StructuralBlueprint,
    pub task: TaskKind,
    pub cfg: EpisodeConfig,
    pub scene: SimScene,
    pub joint: JointSpec,
    /// Task part as last perceived, with its world pose.
    pub perceived: Option<(AssetInstance, Transform3)>,
    pub manipulation: Option<ManipulationBlueprint>,
    pub trajectory: Option<Trajectory>,
    pipeline: &'p dyn Pipeline,
    rng: ChaCha8Rng,
    q0: f64,
    plan: Option<WorldPlan>,
    result: EpisodeResult,
}

impl<'p> Session<'p> {
    /// Samples the object and its initial joint state from `cfg.seed`.
    pub fn start(
        bp: &StructuralBlueprint,
        task: TaskKind,
        cfg: &EpisodeConfig,
        pipeline: &'p dyn Pipeline,
    ) -> Result<Session<'p>, EpisodeResult> {
        let (truth, rng) = sample_scene(bp, task, cfg).map_err(|e| EpisodeResult::new(bp, task, cfg.seed).fail(FailureReason::PlanFail, e))?;
        Session::new(truth, task, cfg, pipeline, rng).map_err(|e| EpisodeResult::new(bp, task, cfg.seed).fail(FailureReason::PlanFail, e))
    }

    /// Session on a given scene; `rng` drives perception.
    pub fn new(
        truth: StructuralInstance,
        task: TaskKind,
        cfg: &EpisodeConfig,
        pipeline: &'p dyn Pipeline,
        rng: ChaCha8Rng,
    ) -> Result<Session<'p>, String> {
        let bp = truth.blueprint.clone();
        let Ok(Some((_, spec))) = truth.governing_joint(&bp.task_part) else {
            return Err("task part has no joint".into());
        };
        let joint = spec.clone();
        let q0 = truth.joint_value(&joint.joint_id).map_err(|e| e.to_string())?;
        let mut result = EpisodeResult::new(&bp, task, cfg.seed);
        result.joint_trajectory.push(q0);
        Ok(Session {
            blueprint: bp,
            task,
            cfg: cfg.clone(),
            scene: SimScene::new(truth),
            joint,
            perceived: None,
            manipulation: None,
            trajectory: None,
            pipeline,
            rng,
            q0,
            plan: None,
            result,
        })
    }

    fn failed(&mut self, reason: FailureReason, detail: impl Into<String>) -> FailureReason {
        self.result.failure = Some(reason);
        self.result.detail = Some(detail.into());
        reason
    }

    /// Perceives, plans and closes the gripper on the task part. Each call
    /// looks again from freshly sampled views.
    pub fn grasp(&mut self) -> Result<(), FailureReason> {
        self.scene = SimScene { gripper: SimScene::new(self.scene.instance.clone()).gripper, ..self.scene.clone() };
        self.plan = None;
        let belief = match perceive(&self.scene.instance, &self.cfg, self.pipeline, &mut self.rng) {
            Ok(b) => b,
            Err(e) => return Err(self.failed(FailureReason::PlanFail, e)),
        };
        self.result.concept = Some(belief.concept.id().to_string());
        self.result.fit_residual = belief.fit_residual;
        if let Ok(part) = belief.instance.part(&self.blueprint.task_part) {
            self.perceived = Some((part.instance.clone(), belief.part_pose));
        }
        let part_id = self.blueprint.task_part.clone();
        let strategies = match list_strategies(&belief.instance, &part_id) {
            Ok(s) => s,
            Err(e) => return Err(self.failed(FailureReason::PlanFail, e.to_string())),
        };
        let (family_id, rule_id) = match self.pipeline.select_strategy(self.task, &strategies) {
            Ok(s) => s,
            Err(e) => return Err(self.failed(FailureReason::PlanFail, e)),
        };
        self.result.strategy = Some((family_id.clone(), rule_id.clone()));
        let (mb, plan, traj) = match plan_for(&belief, &family_id, &rule_id, &self.cfg, &self.scene.gripper.pose.rotation) {
            Ok(p) => p,
            Err(e) => return Err(self.failed(FailureReason::PlanFail, e)),
        };
        self.manipulation = Some(mb);
        self.trajectory = Some(traj.clone());
        for w in traj.phase(Phase::Approach) {
            if let Some((depth, part)) = self.scene.penetration(&w.pose, w.width, &part_id) {
                if depth > self.cfg.collision_tolerance {
                    return Err(self.failed(FailureReason::Collision, format!("approach hits `{part}`")));
                }
            }
        }
        self.scene = self.scene.try_grasp(&plan.grasp);
        if self.scene.gripper.attached.is_none() {
            return Err(self.failed(FailureReason::NoGrasp, "no affordance region between the fingers"));
        }
        self.plan = Some(plan);
        Ok(())
    }

    /// Runs up to `cfg.max_steps` interaction steps, grasping first when the
    /// gripper is free; stops once the task threshold is reached.
    pub fn interact(&mut self) -> Result<(), FailureReason> {
        if self.plan.is_none() || self.scene.gripper.attached.is_none() {
            self.grasp()?;
        }
        let plan = self.plan.clone().expect("grasped above");
        for _ in 0..self.cfg.max_steps {
            if self.reached() {
                break;
            }
            let p = self.scene.gripper.pose.translation;
            let dir = match plan.direction_at(&p) {
                Ok(d) => d,
                Err(e) => return Err(self.failed(FailureReason::NoMotion, e.to_string())),
            };
            self.scene = self.scene.step_interact(&(dir * self.cfg.step_length)).expect("gripper is attached");
            self.result.joint_trajectory.push(self.joint_value());
            self.result.steps += 1;
        }
        let progress = self.progress();
        if self.reached() {
            Ok(())
        } else if progress < -1e-9 {
            Err(self.failed(FailureReason::WrongDirection, format!("joint moved {progress:.4} against the task")))
        } else {
            Err(self.failed(FailureReason::NoMotion, format!("progress {progress:.4} below {:.4}", self.threshold())))
        }
    }

    pub fn joint_value(&self) -> f64 {
        self.scene.instance.joint_state[&self.joint.joint_id]
    }

    /// Change in openness since the start, positive when opening.
    pub fn opened_by(&self) -> f64 {
        self.joint.openness(self.joint_value()) - self.joint.openness(self.q0)
    }

    /// Progress along the task direction.
    pub fn progress(&self) -> f64 {
        self.task.sign() * self.opened_by()
    }

    pub fn threshold(&self) -> f64 {
        self.cfg.success_fraction * self.joint.span()
    }

    pub fn reached(&self) -> bool {
        self.progress() >= self.threshold() - 1e-12
    }

    /// Whether the gripper holds the task part.
    pub fn grasped(&self) -> bool {
        self.scene.gripper.attached.as_ref().is_some_and(|a| a.part_id == self.blueprint.task_part)
    }

    pub fn finish(self) -> EpisodeResult {
        let success = self.reached();
        let mut result = self.result;
        result.success = success;
        if result.success {
            result.failure = None;
            result.detail = None;
        } else if result.failure.is_none() {
            result.failure = Some(FailureReason::NoMotion);
            result.detail = Some("task not attempted".into());
        }
        result
    }
}

/// One episode of the evaluation protocol on a freshly sampled object.
pub fn run_episode(bp: &StructuralBlueprint, task: TaskKind, cfg: &EpisodeConfig, pipeline: &dyn Pipeline) -> EpisodeResult {
    let mut session = match Session::start(bp, task, cfg, pipeline) {
        Ok(s) => s,
        Err(r) => return r,
    };
    if session.grasp().is_ok() {
        let _ = session.interact();
    }
    session.finish()
}

/// Seed of one episode in an evaluation.
pub fn episode_seed(seed: u64, item: usize, episode: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((item as u64) << 32) ^ episode as u64);
    rng.random()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub category: String,
    pub task: TaskKind,
    pub episodes: usize,
    pub successes: usize,
    pub rate: f64,
    pub mean_steps: f64,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub rows: Vec<EvalRow>,
    pub average: f64,
}

impl EvalReport {
    /// Groups per-episode results (in suite order) into rows.
    pub fn aggregate(suite: &[(StructuralBlueprint, TaskKind)], seed: u64, results: &[Vec<EpisodeResult>]) -> EvalReport {
        let rows: Vec<EvalRow> = suite
            .iter()
            .zip(results)
            .map(|((bp, task), eps)| {
                let successes = eps.iter().filter(|r| r.success).count();
                let mut failures = BTreeMap::new();
                for r in eps {
                    if let Some(f) = r.failure {
                        *failures.entry(f.name().to_string()).or_insert(0) += 1;
                    }
                }
                let n = eps.len().max(1) as f64;
                EvalRow {
                    category: bp.category.clone(),
                    task: *task,
                    episodes: eps.len(),
                    successes,
                    rate: successes as f64 / n,
                    mean_steps: eps.iter().map(|r| r.steps as f64).sum::<f64>() / n,
                    failures,
                }
            })
            .collect();
        let average = if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.rate).sum::<f64>() / rows.len() as f64 };
        EvalReport { seed, rows, average }
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:<5} {:>8} {:>9} {:>6} {:>10}  failures", "category", "task", "episodes", "successes", "rate", "mean steps");
        for r in &self.rows {
            let failures: Vec<String> = r.failures.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                out,
                "{:<12} {:<5} {:>8} {:>9} {:>6.3} {:>10.2}  {}",
                r.category,
                r.task.name(),
                r.episodes,
                r.successes,
                r.rate,
                r.mean_steps,
                failures.join(" ")
            );
        }
        let _ = writeln!(out, "{:<12} {:<5} {:>8} {:>9} {:>6.3}", "average", "", "", "", self.average);
        out
    }
}

/// Episode configurations of an evaluation, indexed like the suite.
pub fn evaluation_jobs(suite_len: usize, episodes: usize, seed: u64, template: &EpisodeConfig) -> Vec<(usize, EpisodeConfig)> {
    (0..suite_len)
        .flat_map(|item| {
            (0..episodes).map(move |ep| (item, EpisodeConfig { seed: episode_seed(seed, item, ep), ..template.clone() }))
        })
        .collect()
}

/// Runs every episode sequentially with `pipeline` and aggregates per suite item.
pub fn evaluate(
    suite: &[(StructuralBlueprint, TaskKind)],
    episodes: usize,
    seed: u64,
    template: &EpisodeConfig,
    pipeline: &dyn Pipeline,
) -> EvalReport {
    evaluate_with(suite, episodes, seed, template, |bp, task, cfg| run_episode(bp, task, cfg, pipeline))
}

/// Like [`evaluate`] with a caller-supplied episode runner.
pub fn evaluate_with<F>(suite: &[(StructuralBlueprint, TaskKind)], episodes: usize, seed: u64, template: &EpisodeConfig, run: F) -> EvalReport
where
    F: Fn(&StructuralBlueprint, TaskKind, &EpisodeConfig) -> EpisodeResult,
{
    let mut results: Vec<Vec<EpisodeResult>> = vec![Vec::new(); suite.len()];
    for (item, cfg) in evaluation_jobs(suite.len(), episodes, seed, template) {
        let (bp, task) = &suite[item];
        results[item].push(run(bp, *task, &cfg));
    }
    EvalReport::aggregate(suite, seed, &results)
}

/// Pull task on every builtin blueprint.
pub fn builtin_suite() -> Vec<(StructuralBlueprint, TaskKind)> {
    crate::blueprint::builtin_blueprints().into_iter().map(|bp| (bp, TaskKind::Pull)).collect()
}
