//! One line per acceptance criterion. Run with
//! `cargo test -p eac-cli --test acceptance [-- <criterion number>...]`.
//! The process fails on a FAIL line only when `EAC_ACCEPTANCE_STRICT=1`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use eac_cli::commands;
use eac_cli::config::{ReasonerArgs, ReasonerSettings};
use eac_cli::scene::SceneFile;
use eac_core::blueprint::{builtin_blueprint, instantiate, oblique_camera, render_asset_partial, JointKind, RenderOptions, BUILTIN_IDS};
use eac_core::concepts::{AssetKind, ConceptAsset, RegionKind};
use eac_core::executor::to_world;
use eac_core::fit::{brute_force_oracle, fit_structural, fitted_param_names, relative_param_error, Coverage, FitConfig, OracleGrid};
use eac_core::geom::{rot_rpy, translate, Rotation3, Transform3, Vec3};
use eac_core::manipulation::{find_family, find_rule, force_from_joint, grasp_pose, sample_grasps, FramedJoint, GraspPose, ManipulationBlueprint};
use eac_core::sim::{builtin_suite, default_strategy, evaluate, evaluate_with, EpisodeConfig, OraclePipeline, Perception, TaskKind};
use eac_reasoning::agent::{observe, reasoned_episode};
use eac_reasoning::ops::{decompose, parse_objects};
use eac_reasoning::{MockReasoner, DEFAULT_RETRY_LIMIT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIGHT: f64 = 1e-9;
const TRANSFORM_CHECKS: usize = 10_000;
const TRANSFORM_BUDGET_S: f64 = 5.0;
const GRASP_INSTANCES: usize = 100;
const GRASP_SAMPLES: usize = 1000;
const FORCE_CONFIGS: usize = 1000;
const WORLD_PAIRS: usize = 10_000;
const FIT_INSTANCES: usize = 20;
const FULL_REL_ERROR: f64 = 0.02;
const FULL_RESIDUAL: f64 = 1e-4;
const HALF_REL_ERROR: f64 = 0.05;
const HALF_NOISE: f64 = 5e-4;
const ORACLE_STEPS: usize = 9;
const FIT_BUDGET_S: f64 = 1.0;
const EPISODES: usize = 50;
const SUITE_SEED: u64 = 2024;
const MIN_AVERAGE: f64 = 0.80;
const MIN_CATEGORY: f64 = 0.60;
const PIPELINE_BUDGET_S: f64 = 300.0;

/// Task-part assets of the builtin categories.
const FIT_KINDS: [AssetKind; 6] =
    [AssetKind::CurveHandle, AssetKind::RingHandle, AssetKind::BarHandle, AssetKind::Knob, AssetKind::Lever, AssetKind::DrawerFace];

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Check {
    Check { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if (0.1..=1.0).contains(&v.norm()) {
            return v.normalize();
        }
    }
}

fn random_pose(rng: &mut ChaCha8Rng, reach: f64) -> Transform3 {
    let w = Vec3::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI));
    Transform3::new(Rotation3::exp(&w), Vec3::new(rng.random_range(-reach..reach), rng.random_range(-reach..reach), rng.random_range(-reach..reach)))
}

fn transform_laws() -> Check {
    let mut rng = rng(1);
    let mut worst = [0.0f64; 4];
    for _ in 0..TRANSFORM_CHECKS {
        let (a, b, c) = (random_pose(&mut rng, 5.0), random_pose(&mut rng, 5.0), random_pose(&mut rng, 5.0));
        let m = a.rotation.matrix();
        worst[0] = worst[0].max((m.transpose() * m - nalgebra::Matrix3::identity()).abs().max()).max((m.determinant() - 1.0).abs());
        let (l, r) = ((a * b) * c, a * (b * c));
        worst[1] = worst[1].max((l.to_homogeneous() - r.to_homogeneous()).abs().max());
        let p = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        worst[2] = worst[2].max((a.invert().apply_point(&a.apply_point(&p)) - p).norm()).max((a.compose(&a.invert()).to_homogeneous() - nalgebra::Matrix4::identity()).abs().max());
        let d = unit(&mut rng) * rng.random_range(0.1..10.0);
        worst[3] = worst[3].max((a.apply_dir(&d).norm() - d.norm()).abs());
    }
    let pass = worst.iter().all(|w| *w <= TIGHT);
    check(pass, format!("{TRANSFORM_CHECKS} draws; max errors orthonormality {:.1e}, associativity {:.1e}, inverse {:.1e}, direction norm {:.1e}", worst[0], worst[1], worst[2], worst[3]))
}

fn grasp_geometry() -> Check {
    let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
    let family = find_family("curve_pull_grasp").unwrap();
    let mut rng = rng(2);
    let (mut radius_err, mut outside, mut closed_form) = (0.0f64, 0, 0);
    for i in 0..GRASP_INSTANCES {
        let inst = asset.random_instance(&mut rng);
        let (r_o, half) = (inst.get("R_o"), inst.get("theta_c") / 2.0);
        for (value, g) in sample_grasps(&inst, &family, GRASP_SAMPLES, i as u64).unwrap() {
            let c = g.contact_point();
            radius_err = radius_err.max((c.x.hypot(c.y) - r_o).abs()).max(c.z.abs());
            // Angle of the contact measured from -y toward +x.
            let angle = c.x.atan2(-c.y);
            if angle < -half - TIGHT || angle > half + TIGHT || (angle - value).abs() > TIGHT {
                outside += 1;
            }
        }
        let zero = grasp_pose(&inst, &family, 0.0).unwrap();
        if zero.pose != translate(0.0, -r_o, 0.0) * Transform3::from_rotation(rot_rpy(FRAC_PI_2, 0.0, FRAC_PI_2)) {
            closed_form += 1;
        }
    }
    check(
        radius_err <= TIGHT && outside == 0 && closed_form == 0,
        format!(
            "{} grasps; max |radius - R_o| {radius_err:.1e}, angles outside range {outside}, closed-form mismatches at 0: {closed_form}",
            GRASP_INSTANCES * GRASP_SAMPLES
        ),
    )
}

fn force_direction() -> Check {
    let mut rng = rng(3);
    let (pull, push) = (find_rule("hinge_pull").unwrap(), find_rule("hinge_push").unwrap());
    let (slide_pull, slide_push) = (find_rule("slide_pull").unwrap(), find_rule("slide_push").unwrap());
    let (mut perp, mut wrong_sign, mut align) = (0.0f64, 0, 0.0f64);
    for _ in 0..FORCE_CONFIGS {
        let joint = FramedJoint {
            joint_id: "j".into(),
            kind: JointKind::Revolute,
            anchor: Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            axis: unit(&mut rng),
            opening_sign: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            range: [-2.0, 2.0],
            q: 0.0,
        };
        let grasp = GraspPose { pose: random_pose(&mut rng, 1.0), width: 0.02, contact: RegionKind::Grasp };
        let lever = grasp.contact_point() - joint.project(&grasp.contact_point());
        if lever.norm() < 1e-3 {
            continue;
        }
        for (rule, sign) in [(&pull, 1.0), (&push, -1.0)] {
            let f = force_from_joint(&joint, AssetKind::CurveHandle, rule, &grasp).unwrap();
            perp = perp.max(f.dot(&joint.axis).abs());
            let torque = (grasp.contact_point() - joint.anchor).cross(&f).dot(&joint.axis) * joint.opening_sign;
            if torque * sign <= 0.0 {
                wrong_sign += 1;
            }
        }
        let slide = FramedJoint { kind: JointKind::Prismatic, ..joint };
        for rule in [&slide_pull, &slide_push] {
            let f = force_from_joint(&slide, AssetKind::BarHandle, rule, &grasp).unwrap();
            align = align.max((f.dot(&slide.axis).abs() - 1.0).abs());
        }
    }
    check(
        perp <= TIGHT && wrong_sign == 0 && align <= TIGHT,
        format!("{FORCE_CONFIGS} configurations; max |F.axis| {perp:.1e}, torque sign errors {wrong_sign}, max ||F.axis| - 1| {align:.1e}"),
    )
}

fn world_frame() -> Check {
    let mut blueprints = Vec::new();
    for id in BUILTIN_IDS {
        let bp = builtin_blueprint(id).unwrap();
        let inst = instantiate(&bp, &bp.nominal_params(), Transform3::identity(), &BTreeMap::new()).unwrap();
        let part = bp.task_part.clone();
        let strategies = eac_core::manipulation::list_strategies(&inst, &part).unwrap();
        let (family, rule) = default_strategy(TaskKind::Pull, &strategies).unwrap();
        let [lo, hi] = find_family(&family).unwrap().range(&inst.part(&part).unwrap().instance).unwrap();
        blueprints.push(ManipulationBlueprint::build(&inst, &part, &family, 0.5 * (lo + hi), &rule).unwrap());
    }
    let mut rng = rng(4);
    let (mut disagreements, mut compared, mut norm_err) = (0, 0, 0.0f64);
    for i in 0..WORLD_PAIRS {
        let mb = &blueprints[i % blueprints.len()];
        let m = random_pose(&mut rng, 2.0);
        let plan = to_world(mb, &m, None).unwrap();
        norm_err = norm_err.max((plan.force.norm() - mb.force.norm()).abs());
        let y = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let x = m.apply_point(&y);
        for (c, w) in mb.constraints.iter().zip(&plan.constraints) {
            let (local, world) = (c.instance.constraint(&c.pose.invert().apply_point(&y)), w.eval(&x));
            if local.abs() > TIGHT && world.abs() > TIGHT {
                compared += 1;
                if (local < 0.0) != (world < 0.0) {
                    disagreements += 1;
                }
            }
        }
    }
    check(
        disagreements == 0 && norm_err <= TIGHT,
        format!("{WORLD_PAIRS} pairs, {compared} constraint signs compared, {disagreements} disagree; max ||F_world| - |F_local|| {norm_err:.1e}"),
    )
}

fn parameter_fitting() -> Check {
    let mut failures = Vec::new();
    let mut slowest = 0.0f64;
    let mut worst_full = 0.0f64;
    let mut worst_half = BTreeMap::new();
    let mut timed = |f: &mut dyn FnMut() -> Option<eac_core::fit::FitResult>| {
        let t = Instant::now();
        let r = f();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        r
    };
    for (k, kind) in FIT_KINDS.iter().enumerate() {
        let asset = ConceptAsset::builtin(*kind);
        let mut rng = rng(50 + k as u64);
        let mut half_max = 0.0f64;
        for i in 0..FIT_INSTANCES {
            let truth = asset.random_instance(&mut rng);
            let pose = random_pose(&mut rng, 0.5);
            let full = truth.sample_surface(2048, i as u64).unwrap().transformed(&pose);
            match timed(&mut || fit_structural(&asset, &full, &FitConfig::default()).ok()) {
                Some(f) => {
                    let e = relative_param_error(&truth, &f.params);
                    worst_full = worst_full.max(e);
                    if e > FULL_REL_ERROR || f.residual > FULL_RESIDUAL {
                        failures.push(format!("full {}#{i}: error {e:.3}, residual {:.1e}", asset.asset_id, f.residual));
                    }
                }
                None => failures.push(format!("full {}#{i}: no fit", asset.asset_id)),
            }
            let cam = oblique_camera(&mut rng, &truth, &pose, 1.0, 0.3);
            let half = render_asset_partial(&truth, &pose, &cam, &RenderOptions { points_per_part: 4096, seed: i as u64, noise_sigma: HALF_NOISE });
            let cfg = FitConfig { coverage: Coverage::Viewpoint(cam.position), ..FitConfig::default() };
            match timed(&mut || fit_structural(&asset, &half, &cfg).ok()) {
                Some(f) => {
                    let e = relative_param_error(&truth, &f.params);
                    half_max = half_max.max(e);
                    if e > HALF_REL_ERROR {
                        failures.push(format!("half {}#{i}: error {e:.3}", asset.asset_id));
                    }
                }
                None => failures.push(format!("half {}#{i}: no fit", asset.asset_id)),
            }
        }
        worst_half.insert(asset.asset_id.clone(), half_max);
    }

    // Oracle spot checks, spread over the asset types.
    let mut rng = rng(5);
    let mut oracle_misses = 0;
    for i in 0..FIT_INSTANCES {
        let asset = ConceptAsset::builtin(FIT_KINDS[i % FIT_KINDS.len()]);
        let truth = asset.random_instance(&mut rng);
        let pose = random_pose(&mut rng, 0.5);
        let cloud = truth.sample_surface(400, 100 + i as u64).unwrap().transformed(&pose);
        let names = fitted_param_names(&asset);
        let cells: Vec<(String, f64, Vec<f64>)> = names
            .iter()
            .map(|n| {
                let s = asset.param(n).unwrap();
                let cell = (s.upper - s.lower) / (ORACLE_STEPS - 1) as f64;
                (n.clone(), cell, (0..ORACLE_STEPS).map(|j| s.lower + cell * j as f64).collect())
            })
            .collect();
        let grid = OracleGrid { params: cells.iter().map(|(n, _, v)| (n.clone(), v.clone())).collect(), poses: vec![pose] };
        let oracle = brute_force_oracle(&asset, &cloud, &grid).unwrap();
        let agrees = timed(&mut || fit_structural(&asset, &cloud, &FitConfig::default()).ok())
            .is_some_and(|f| cells.iter().all(|(n, cell, _)| (f.params[n] - oracle.params[n]).abs() <= *cell + TIGHT));
        if !agrees {
            oracle_misses += 1;
            failures.push(format!("oracle {}#{i}: disagrees by more than a cell", asset.asset_id));
        }
    }
    let pass = failures.is_empty() && slowest < FIT_BUDGET_S;
    let half: Vec<String> = worst_half.iter().map(|(k, v)| format!("{k} {v:.4}")).collect();
    let mut detail = format!(
        "6 assets x {FIT_INSTANCES}; worst full error {worst_full:.3}; worst half-view error {}; oracle misses {oracle_misses}/{FIT_INSTANCES}; slowest fit {slowest:.2} s",
        half.join(", ")
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; over tolerance: {}", failures.join("; ")));
    }
    check(pass, detail)
}

fn rates(report: &eac_core::sim::EvalReport) -> String {
    report.rows.iter().map(|r| format!("{} {:.2}", r.category, r.rate)).collect::<Vec<_>>().join(", ")
}

fn ground_truth_sim() -> Check {
    let template = EpisodeConfig { perception: Perception::GroundTruth, ..EpisodeConfig::default() };
    let report = evaluate(&builtin_suite(), EPISODES, SUITE_SEED, &template, &OraclePipeline);
    check(report.rows.iter().all(|r| r.successes == r.episodes), format!("{EPISODES} pull episodes per category: {}", rates(&report)))
}

fn full_pipeline() -> Check {
    let start = Instant::now();
    let template = EpisodeConfig { perception: Perception::Fitted, ..EpisodeConfig::default() };
    let report = evaluate_with(&builtin_suite(), EPISODES, SUITE_SEED, &template, |bp, task, cfg| {
        reasoned_episode(bp, task, cfg, &MockReasoner, DEFAULT_RETRY_LIMIT)
    });
    let secs = start.elapsed().as_secs_f64();
    let lowest = report.rows.iter().map(|r| r.rate).fold(f64::INFINITY, f64::min);
    check(
        report.average >= MIN_AVERAGE && lowest >= MIN_CATEGORY && secs < PIPELINE_BUDGET_S,
        format!("average {:.3} (>= {MIN_AVERAGE}), lowest {lowest:.2} (>= {MIN_CATEGORY}), {secs:.0} s single-threaded; {}", report.average, rates(&report)),
    )
}

fn decomposition_fixture() -> Check {
    let bp = builtin_blueprint("microwave").unwrap();
    let inst = instantiate(&bp, &bp.nominal_params(), Transform3::identity(), &BTreeMap::new()).unwrap();
    let instruction = "open the microwave door";
    let got = parse_objects(&MockReasoner, &observe(&inst), instruction).and_then(|g| decompose(&MockReasoner, instruction, &g));
    let want = [("grasp the door handle", "is the handle grasped?"), ("pull open the door", "is the door opened?")];
    match got {
        Ok(plan) => {
            let pairs = plan.pairs();
            check(pairs == want, format!("{pairs:?}"))
        }
        Err(e) => check(false, e.to_string()),
    }
}

fn determinism() -> Check {
    let settings = ReasonerSettings::resolve(&ReasonerArgs::default(), &Default::default());
    let scene = SceneFile::parse(include_str!("../scenes/microwave.json")).unwrap();
    let run = || commands::run(commands::run_input(scene.clone(), "open the microwave door", 7, settings.clone())).map(|r| r.to_json());
    let eval = || {
        commands::evaluate(commands::eval_input("builtin", 4, 7, Perception::Fitted, settings.clone()), 0)
            .map(|r| serde_json::to_string_pretty(&r).unwrap())
    };
    match (run(), run(), eval(), eval()) {
        (Ok(a), Ok(b), Ok(c), Ok(d)) => {
            check(a == b && c == d, format!("run record {} bytes identical: {}; evaluate report {} bytes identical: {}", a.len(), a == b, c.len(), c == d))
        }
        _ => check(false, "a command failed"),
    }
}

fn main() {
    let criteria: [(u32, &str, fn() -> Check); 9] = [
        (1, "transform laws", transform_laws),
        (2, "grasp-family geometry", grasp_geometry),
        (3, "force direction", force_direction),
        (4, "world-frame execution", world_frame),
        (5, "parameter fitting", parameter_fitting),
        (6, "simulator with ground truth", ground_truth_sim),
        (7, "full pipeline with fitting and mock reasoning", full_pipeline),
        (8, "task decomposition fixture", decomposition_fixture),
        (9, "determinism", determinism),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let c = f();
        let secs = start.elapsed().as_secs_f64();
        ran += 1;
        if !c.pass {
            failed += 1;
        }
        println!("criterion {n} {} {name}: {} [{secs:.1} s]", if c.pass { "PASS" } else { "FAIL" }, c.detail);
        if n == 1 && secs >= TRANSFORM_BUDGET_S {
            println!("criterion 1 FAIL transform laws: took {secs:.1} s (budget {TRANSFORM_BUDGET_S} s)");
            failed += 1;
        }
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 && std::env::var("EAC_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
