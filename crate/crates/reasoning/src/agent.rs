use std::collections::BTreeMap;

use eac_core::blueprint::{StructuralBlueprint, StructuralInstance};
use eac_core::concepts::{AssetKind, ConceptAsset};
use eac_core::fit::{fit_structural, FitError};
use eac_core::manipulation::Strategy;
use eac_core::sim::{
    sample_scene, ConceptChoice, ConceptQuery, EpisodeConfig, EpisodeResult, FailureReason, Pipeline, Session, TaskKind,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::graph::{Observation, ObservedObject, ObservedPart, SceneGraph};
use crate::ops;
use crate::plan::{Plan, Status, SubTask};
use crate::reasoner::{Reasoner, ReasonerError};

pub const DEFAULT_RETRY_LIMIT: usize = 2;

/// Executes sub-tasks and checks their conditions.
pub trait Agent {
    fn execute(&mut self, subtask: &SubTask) -> Result<(), String>;
    fn verify(&mut self, condition: &str) -> Result<bool, ReasonerError>;
}

/// Runs sub-tasks in order. A sub-task whose condition still fails after
/// `retry_limit` retries is marked failed and the rest stay pending.
pub fn run_loop(plan: &mut Plan, agent: &mut dyn Agent, retry_limit: usize) -> Result<(), ReasonerError> {
    for i in 0..plan.subtasks.len() {
        let mut done = false;
        while plan.subtasks[i].attempts <= retry_limit {
            plan.subtasks[i].attempts += 1;
            plan.subtasks[i].error = agent.execute(&plan.subtasks[i]).err();
            if agent.verify(&plan.subtasks[i].condition)? {
                done = true;
                break;
            }
        }
        plan.subtasks[i].status = if done { Status::Done } else { Status::Failed };
        if !done {
            break;
        }
    }
    Ok(())
}

/// What the reasoner is told about a simulated object.
pub fn observe(inst: &StructuralInstance) -> Observation {
    let bp = &inst.blueprint;
    let state = match inst.governing_joint(&bp.task_part) {
        Ok(Some((_, spec))) => {
            let q = inst.joint_state.get(&spec.joint_id).copied().unwrap_or_default();
            if spec.openness(q) <= 1e-6 { "closed" } else { "open" }
        }
        _ => "static",
    };
    let parts = bp
        .parts
        .iter()
        .map(|p| ObservedPart { name: p.part_id.clone(), state: if p.joint.is_some() { state.to_string() } else { "static".into() } })
        .collect();
    Observation { objects: vec![ObservedObject { name: bp.category.clone(), state: state.into(), parts }], images: Vec::new() }
}

/// Drives a simulator session with sub-tasks, answering conditions from
/// ground truth.
pub struct SimAgent<'p> {
    pub session: Session<'p>,
}

impl Agent for SimAgent<'_> {
    fn execute(&mut self, subtask: &SubTask) -> Result<(), String> {
        let outcome = match subtask.verb().as_str() {
            "grasp" => self.session.grasp(),
            "pull" | "push" | "open" | "close" => self.session.interact(),
            other => return Err(format!("no action for `{other}`")),
        };
        outcome.map_err(|reason| reason.name().to_string())
    }

    fn verify(&mut self, condition: &str) -> Result<bool, ReasonerError> {
        let unmapped = || ReasonerError::UnmappedCondition(condition.to_string());
        let body = condition.trim().strip_prefix("is the ").and_then(|c| c.strip_suffix('?')).ok_or_else(unmapped)?;
        let (_, predicate) = body.rsplit_once(' ').ok_or_else(unmapped)?;
        let threshold = self.session.threshold() - 1e-12;
        match predicate {
            "grasped" => Ok(self.session.grasped()),
            "opened" | "open" => Ok(self.session.opened_by() >= threshold),
            "closed" => Ok(-self.session.opened_by() >= threshold),
            _ => Err(unmapped()),
        }
    }
}

/// Lets the reasoner take the concept and strategy decisions of an episode.
/// Concept candidates are all fitted, and their residuals are passed on as
/// evidence.
pub struct ReasonedPipeline<'r> {
    pub reasoner: &'r dyn Reasoner,
    pub target: String,
    /// The step the grasp serves; strategies are chosen for it.
    pub subtask: String,
}

impl Pipeline for ReasonedPipeline<'_> {
    fn select_concept(&self, query: &ConceptQuery) -> Result<ConceptChoice, String> {
        let assets: Vec<ConceptAsset> = query.candidates.iter().map(|k| ConceptAsset::builtin(*k)).collect();
        if let [only] = query.candidates {
            return Ok(ConceptChoice { kind: *only, fit: None });
        }
        let mut fits = BTreeMap::new();
        let mut evidence = BTreeMap::new();
        for asset in &assets {
            let fit = fit_structural(asset, query.cloud, query.fit);
            let residual = match &fit {
                Ok(f) => Some(f.residual),
                Err(FitError::NoFit { best, .. }) => Some(best.residual),
                Err(_) => None,
            };
            if let Some(r) = residual {
                evidence.insert(asset.asset_id.clone(), r);
            }
            fits.insert(asset.asset_id.clone(), fit);
        }
        let concept = query
            .blueprint
            .parts
            .iter()
            .find(|p| p.part_id == query.part_id)
            .and_then(|p| ConceptAsset::builtin(p.asset).category_tags.first().cloned())
            .unwrap_or_else(|| query.part_id.to_string());
        let id = ops::select_concept(self.reasoner, &assets, &self.target, &self.subtask, &concept, &evidence).map_err(|e| e.to_string())?;
        let kind = AssetKind::from_id(&id).ok_or_else(|| format!("unknown asset `{id}`"))?;
        Ok(ConceptChoice { kind, fit: fits.remove(&id) })
    }

    fn select_strategy(&self, _task: TaskKind, strategies: &[Strategy]) -> Result<(String, String), String> {
        ops::select_strategy(self.reasoner, strategies, &self.target, &self.subtask).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRecord {
    pub instruction: String,
    pub observation: Observation,
    pub graph: SceneGraph,
    pub plan: Plan,
    pub episode: EpisodeResult,
    /// Fitted task part: asset, parameters and world pose.
    pub perceived: Option<(eac_core::concepts::AssetInstance, eac_core::Transform3)>,
    pub manipulation: Option<eac_core::manipulation::ManipulationBlueprint>,
    pub trajectory: Option<eac_core::executor::Trajectory>,
}

/// Task kind implied by the plan's first motion step.
pub fn task_kind(plan: &Plan) -> TaskKind {
    plan.subtasks
        .iter()
        .find_map(|s| match s.verb().as_str() {
            "pull" | "open" => Some(TaskKind::Pull),
            "push" | "close" => Some(TaskKind::Push),
            _ => None,
        })
        .unwrap_or(TaskKind::Pull)
}

/// Parses, decomposes and executes `instruction` on a simulated object.
pub fn run_task(
    truth: StructuralInstance,
    rng: ChaCha8Rng,
    instruction: &str,
    cfg: &EpisodeConfig,
    reasoner: &dyn Reasoner,
    retry_limit: usize,
) -> Result<TaskRecord, ReasonerError> {
    let observation = observe(&truth);
    let graph = ops::parse_objects(reasoner, &observation, instruction)?;
    let mut plan = ops::decompose(reasoner, instruction, &graph)?;
    let task = task_kind(&plan);
    let action = plan
        .subtasks
        .iter()
        .find(|s| s.verb() != "grasp")
        .map(|s| s.instruction.clone())
        .unwrap_or_else(|| instruction.to_string());
    let target = truth.blueprint.category.clone();
    let pipeline = ReasonedPipeline { reasoner, target, subtask: action };
    let session = Session::new(truth, task, cfg, &pipeline, rng).map_err(ReasonerError::Declined)?;
    let mut agent = SimAgent { session };
    run_loop(&mut plan, &mut agent, retry_limit)?;
    let perceived = agent.session.perceived.clone();
    let manipulation = agent.session.manipulation.clone();
    let trajectory = agent.session.trajectory.clone();
    let episode = agent.session.finish();
    Ok(TaskRecord { instruction: instruction.to_string(), observation, graph, plan, episode, perceived, manipulation, trajectory })
}

/// Instruction used for a suite item.
pub fn instruction_for(bp: &StructuralBlueprint, task: TaskKind) -> String {
    match task {
        TaskKind::Pull => format!("open the {}", bp.category),
        TaskKind::Push => format!("close the {}", bp.category),
    }
}

/// One evaluation episode driven through the reasoning loop.
pub fn reasoned_episode(bp: &StructuralBlueprint, task: TaskKind, cfg: &EpisodeConfig, reasoner: &dyn Reasoner, retry_limit: usize) -> EpisodeResult {
    let (truth, rng) = match sample_scene(bp, task, cfg) {
        Ok(s) => s,
        Err(e) => return EpisodeResult::new(bp, task, cfg.seed).fail(FailureReason::PlanFail, e),
    };
    match run_task(truth, rng, &instruction_for(bp, task), cfg, reasoner, retry_limit) {
        Ok(record) => record.episode,
        Err(e) => EpisodeResult::new(bp, task, cfg.seed).fail(FailureReason::PlanFail, e.to_string()),
    }
}

/// Seeded generator for a scene loaded from a file.
pub fn scene_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
