use std::collections::BTreeMap;
use std::fmt::Write as _;

use eac_core::blueprint::StructuralBlueprint;
use eac_core::concepts::{builtin_library, find_asset, ConceptAsset};
use eac_core::fit::{brute_force_oracle, fit_structural, fitted_param_names, Coverage, FitConfig, FitError, FitResult, OracleGrid};
use eac_core::sim::{builtin_suite, evaluation_jobs, EpisodeConfig, EpisodeResult, EvalReport, Perception, TaskKind};
use eac_core::{PointCloud, Vec3};
use eac_reasoning::agent::{reasoned_episode, run_task, scene_rng};
use eac_reasoning::TaskRecord;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ReasonerSettings;
use crate::scene::SceneFile;
use crate::CliError;

pub const RUN_FORMAT: &str = "eac-run";
pub const EVAL_FORMAT: &str = "eac-eval";
pub const RECORD_VERSION: u32 = 1;

/// Registry listing, one asset per row.
pub fn concepts_table(library: &[ConceptAsset]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<14} {:<22} parameters", "asset", "tags");
    for a in library {
        let params: Vec<String> = a.params.iter().map(|p| format!("{}[{}..{} {}]", p.name, p.lower, p.upper, p.unit)).collect();
        let _ = writeln!(out, "{:<14} {:<22} {}", a.asset_id, a.category_tags.join(","), params.join(" "));
    }
    out
}

fn asset(id: &str) -> Result<ConceptAsset, CliError> {
    let library = builtin_library();
    find_asset(&library, id).cloned().map_err(|_| {
        let ids: Vec<&str> = library.iter().map(|a| a.asset_id.as_str()).collect();
        CliError::Input(format!("unknown asset `{id}`; valid ids: {}", ids.join(", ")))
    })
}

/// Surface samples of an asset instance in its own frame. Parameters not
/// given take their nominal values.
pub fn render_concept(id: &str, overrides: &BTreeMap<String, f64>, n: usize, seed: u64) -> Result<PointCloud, CliError> {
    let asset = asset(id)?;
    let mut params = asset.nominal().params;
    for (k, v) in overrides {
        if asset.param(k).is_none() {
            let names: Vec<&str> = asset.params.iter().map(|p| p.name.as_str()).collect();
            return Err(CliError::Input(format!("`{id}` has no parameter `{k}`; parameters: {}", names.join(", "))));
        }
        params.insert(k.clone(), *v);
    }
    let inst = asset.instantiate(&params).map_err(|e| CliError::input(id, e))?;
    inst.sample_surface(n, seed).map_err(|e| CliError::input(id, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub grid_steps: usize,
    pub fit: FitResult,
    /// Per parameter: |analytic - oracle| in grid cells.
    pub gap_cells: BTreeMap<String, f64>,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub asset: String,
    pub points: usize,
    pub fit: FitResult,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleRow>,
}

/// Fits `asset_id` to a cloud. With a viewpoint the cloud is treated as a
/// single view. The oracle searches a grid of geometric parameters at the
/// analytic pose.
pub fn fit_cloud(cloud: &PointCloud, asset_id: &str, viewpoint: Option<Vec3>, oracle_steps: Option<usize>) -> Result<FitRecord, CliError> {
    let asset = asset(asset_id)?;
    let cfg = FitConfig { coverage: viewpoint.map_or(Coverage::Complete, Coverage::Viewpoint), ..FitConfig::default() };
    let (fit, converged) = match fit_structural(&asset, cloud, &cfg) {
        Ok(f) => (f, true),
        Err(FitError::NoFit { best, .. }) => (*best, false),
        Err(e @ FitError::TooFewPoints { .. }) => return Err(CliError::Input(e.to_string())),
        Err(e) => return Err(CliError::Runtime(e.to_string())),
    };
    let oracle = oracle_steps
        .map(|steps| {
            let steps = steps.max(2);
            let names = fitted_param_names(&asset);
            let specs: Vec<_> = names.iter().map(|n| asset.param(n).expect("schema name")).collect();
            let grid = OracleGrid {
                params: specs
                    .iter()
                    .map(|s| (s.name.clone(), (0..steps).map(|i| s.lower + (s.upper - s.lower) * i as f64 / (steps - 1) as f64).collect()))
                    .collect(),
                poses: vec![fit.pose],
            };
            let o = brute_force_oracle(&asset, cloud, &grid).map_err(|e| CliError::Runtime(e.to_string()))?;
            let gap_cells: BTreeMap<String, f64> = specs
                .iter()
                .map(|s| {
                    let cell = (s.upper - s.lower) / (steps - 1) as f64;
                    (s.name.clone(), (fit.params[&s.name] - o.params[&s.name]).abs() / cell)
                })
                .collect();
            let agrees = gap_cells.values().all(|g| *g <= 1.0);
            Ok::<_, CliError>(OracleRow { grid_steps: steps, fit: o, gap_cells, agrees })
        })
        .transpose()?;
    Ok(FitRecord { asset: asset.asset_id, points: cloud.len(), fit, converged, oracle })
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInput {
    pub scene: SceneFile,
    pub instruction: String,
    pub seed: u64,
    pub reasoner: ReasonerSettings,
    pub episode: EpisodeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub format: String,
    pub version: u32,
    pub input: RunInput,
    pub object: String,
    /// Scene graph, plan, fitted part, manipulation blueprint, trajectory
    /// and episode result.
    pub output: serde_json::Value,
}

impl RunRecord {
    pub fn success(&self) -> bool {
        self.output.pointer("/episode/success").and_then(serde_json::Value::as_bool).unwrap_or(false)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }
}

pub fn run_input(scene: SceneFile, instruction: &str, seed: u64, reasoner: ReasonerSettings) -> RunInput {
    RunInput { scene, instruction: instruction.to_string(), seed, reasoner, episode: EpisodeConfig { seed, ..EpisodeConfig::default() } }
}

/// Parses the instruction, plans and executes it on the targeted object.
pub fn run(input: RunInput) -> Result<RunRecord, CliError> {
    if input.instruction.trim().is_empty() {
        return Err(CliError::Input("instruction is empty".into()));
    }
    let object = input.scene.target(&input.instruction).clone();
    let truth = object.instantiate()?;
    let reasoner = input.reasoner.build();
    let record: TaskRecord =
        run_task(truth, scene_rng(input.seed), &input.instruction, &input.episode, reasoner.as_ref(), input.reasoner.retry_limit)?;
    let output = serde_json::to_value(&record).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(RunRecord { format: RUN_FORMAT.into(), version: RECORD_VERSION, input, object: object.name, output })
}

/// Re-runs a record's input and reports whether the output is unchanged.
pub fn replay(text: &str) -> Result<(RunRecord, bool), CliError> {
    let old: RunRecord = serde_json::from_str(text).map_err(|e| CliError::input("run record", e))?;
    if old.format != RUN_FORMAT || old.version != RECORD_VERSION {
        return Err(CliError::Input(format!("not a version {RECORD_VERSION} `{RUN_FORMAT}` record")));
    }
    let new = run(old.input.clone())?;
    let same = new.output == old.output && new.object == old.object;
    Ok((new, same))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalInput {
    pub suite: String,
    pub episodes: usize,
    pub seed: u64,
    pub reasoner: ReasonerSettings,
    pub episode: EpisodeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub format: String,
    pub version: u32,
    pub input: EvalInput,
    pub report: EvalReport,
}

pub fn suite(name: &str) -> Result<Vec<(StructuralBlueprint, TaskKind)>, CliError> {
    match name {
        "builtin" => Ok(builtin_suite()),
        "builtin-push" => Ok(builtin_suite().into_iter().map(|(bp, _)| (bp, TaskKind::Push)).collect()),
        other => Err(CliError::Input(format!("unknown suite `{other}`; suites: builtin, builtin-push"))),
    }
}

pub fn eval_input(suite: &str, episodes: usize, seed: u64, perception: Perception, reasoner: ReasonerSettings) -> EvalInput {
    EvalInput { suite: suite.into(), episodes, seed, reasoner, episode: EpisodeConfig { perception, ..EpisodeConfig::default() } }
}

/// Runs every episode through the reasoning loop on `threads` workers (0:
/// one per core). Results are merged by index, so the report does not
/// depend on the thread count.
pub fn evaluate(input: EvalInput, threads: usize) -> Result<EvalRecord, CliError> {
    let items = suite(&input.suite)?;
    if input.episodes == 0 {
        return Err(CliError::Input("episodes must be at least 1".into()));
    }
    let jobs = evaluation_jobs(items.len(), input.episodes, input.seed, &input.episode);
    let reasoner = input.reasoner.build();
    let retry = input.reasoner.retry_limit;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let flat: Vec<(usize, EpisodeResult)> = pool.install(|| {
        jobs.par_iter()
            .map(|(item, cfg)| {
                let (bp, task) = &items[*item];
                (*item, reasoned_episode(bp, *task, cfg, reasoner.as_ref(), retry))
            })
            .collect()
    });
    let mut results: Vec<Vec<EpisodeResult>> = vec![Vec::new(); items.len()];
    for (item, r) in flat {
        results[item].push(r);
    }
    let report = EvalReport::aggregate(&items, input.seed, &results);
    Ok(EvalRecord { format: EVAL_FORMAT.into(), version: RECORD_VERSION, input, report })
}
