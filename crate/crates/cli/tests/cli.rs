use std::path::Path;
use std::process::{Command, Output};

use eac_cli::ply::{read_cloud, write_cloud};
use eac_core::concepts::{AssetKind, ConceptAsset};
use eac_core::fit::relative_param_error;
use eac_core::geom::{rot_rpy, Transform3};
use eac_core::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MICROWAVE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/scenes/microwave.json");

fn eac(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eac"));
    cmd.args(args).env_remove("EAC_CONFIG").env_remove("EAC_REASONER").env_remove("EAC_REASONER_URL").env_remove("EAC_SEED");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn concepts_list_and_render() {
    let o = eac(&["concepts", "list"], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).lines().count() > 8);
    assert!(json(&eac(&["concepts", "list", "--json"], &[])).as_array().unwrap().len() >= 8);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.ply");
    let o = eac(&["concepts", "render", "curve_handle", "--R_o", "0.05", "--theta_c", "1.5708", "--r_t", "0.008", "--n", "2048", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let cloud = read_cloud(std::fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(cloud.len(), 2048);

    let o = eac(&["concepts", "render", "teapot"], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains("curve_handle, ring_handle"), "{}", text(&o.stderr));
    assert_eq!(eac(&["concepts", "render", "knob", "--radius", "9"], &[]).status.code(), Some(3));
    assert_eq!(eac(&["concepts", "render", "knob", "--radius"], &[]).status.code(), Some(2));
    assert_eq!(eac(&["concepts", "frobnicate"], &[]).status.code(), Some(2));
}

fn save(path: &Path, cloud: &eac_core::PointCloud) {
    let mut buf = Vec::new();
    write_cloud(&mut buf, cloud).unwrap();
    std::fs::write(path, buf).unwrap();
}

#[test]
fn fit_command() {
    let dir = tempfile::tempdir().unwrap();
    let asset = ConceptAsset::builtin(AssetKind::BarHandle);
    let truth = asset.random_instance(&mut ChaCha8Rng::seed_from_u64(2));
    let pose = Transform3::new(rot_rpy(0.3, -0.2, 1.1), Vec3::new(0.1, 0.2, 0.3));
    let path = dir.path().join("bar.ply");
    save(&path, &truth.sample_surface(1500, 1).unwrap().transformed(&pose));

    let rec = json(&eac(&["fit", path.to_str().unwrap(), "--asset", "bar_handle", "--oracle"], &[]));
    assert_eq!(rec["converged"], true);
    let params: std::collections::BTreeMap<String, f64> = serde_json::from_value(rec["fit"]["params"].clone()).unwrap();
    assert!(relative_param_error(&truth, &params) <= 0.02, "{params:?}");
    assert_eq!(rec["oracle"]["agrees"], true, "{}", rec["oracle"]);
    assert!(json(&eac(&["fit", path.to_str().unwrap(), "--asset", "bar_handle"], &[])).get("oracle").is_none());

    let empty = dir.path().join("empty.ply");
    save(&empty, &eac_core::PointCloud::default());
    let o = eac(&["fit", empty.to_str().unwrap(), "--asset", "bar_handle"], &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(text(&o.stderr).contains("0 points"));
    assert_eq!(eac(&["fit", "/nonexistent.ply", "--asset", "bar_handle"], &[]).status.code(), Some(3));
}

#[test]
fn run_bundled_microwave() {
    let args = ["run", MICROWAVE, "open the microwave door", "--seed", "3"];
    let first = eac(&args, &[]);
    let rec = json(&first);
    assert_eq!(rec["output"]["episode"]["success"], true);
    let plan = rec["output"]["plan"]["subtasks"].as_array().unwrap();
    assert_eq!(plan.len(), 2);
    assert_eq!(plan[0]["instruction"], "grasp the door handle");
    assert_eq!(plan[1]["condition"], "is the door opened?");
    assert_eq!(first.stdout, eac(&args, &[]).stdout);

    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("run.json");
    std::fs::write(&saved, &first.stdout).unwrap();
    let o = eac(&["replay", saved.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let edited = text(&first.stdout).replacen("\"success\": true", "\"success\": false", 1);
    std::fs::write(&saved, edited).unwrap();
    assert_eq!(eac(&["replay", saved.to_str().unwrap()], &[]).status.code(), Some(4));

    assert_eq!(eac(&["run", "builtin:fridge", "open it"], &[]).status.code(), Some(3));
    assert_eq!(eac(&["run", MICROWAVE, "open the fridge door"], &[]).status.code(), Some(3));
}

#[test]
fn unreachable_reasoner() {
    let o = eac(
        &["run", "builtin:microwave", "open the microwave door", "--reasoner", "http", "--timeout", "1"],
        &[("EAC_REASONER_URL", "http://127.0.0.1:9/v1")],
    );
    assert_eq!(o.status.code(), Some(4));
    assert!(text(&o.stderr).contains("http://127.0.0.1:9/v1/chat/completions"), "{}", text(&o.stderr));
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eac.toml");
    std::fs::write(&cfg, "seed = 11\n[reasoner]\nendpoint = \"http://file:1\"\nretry_limit = 4\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let run = |extra: &[&str], envs: &[(&str, &str)]| {
        let mut args = vec!["--config", cfg, "run", "builtin:lever", "pull the lever"];
        args.extend(extra);
        json(&eac(&args, envs))["input"].clone()
    };
    let from_file = run(&[], &[]);
    assert_eq!((from_file["seed"].as_u64(), from_file["reasoner"]["retry_limit"].as_u64()), (Some(11), Some(4)));
    assert_eq!(from_file["reasoner"]["http"]["endpoint"], "http://file:1");
    let from_env = run(&[], &[("EAC_REASONER_URL", "http://env:2"), ("EAC_SEED", "12")]);
    assert_eq!((from_env["reasoner"]["http"]["endpoint"].as_str(), from_env["seed"].as_u64()), (Some("http://env:2"), Some(12)));
    let from_flag = run(&["--endpoint", "http://flag:3", "--seed", "13"], &[("EAC_REASONER_URL", "http://env:2")]);
    assert_eq!((from_flag["reasoner"]["http"]["endpoint"].as_str(), from_flag["seed"].as_u64()), (Some("http://flag:3"), Some(13)));
    let defaults = json(&eac(&["run", "builtin:lever", "pull the lever"], &[]))["input"].clone();
    assert_eq!((defaults["seed"].as_u64(), defaults["reasoner"]["kind"].as_str()), (Some(0), Some("mock")));

    std::fs::write(dir.path().join("bad.toml"), "sead = 1\n").unwrap();
    let o = eac(&["--config", dir.path().join("bad.toml").to_str().unwrap(), "concepts", "list"], &[]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn evaluate_degenerate_and_reproducible() {
    let args = ["evaluate", "--episodes", "1", "--seed", "9", "--json", "--perception", "ground-truth"];
    let a = eac(&args, &[]);
    let report = json(&a)["report"].clone();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r["rate"] == 0.0 || r["rate"] == 1.0));
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    assert_eq!(a.stdout, eac(&threaded, &[]).stdout);
    assert_eq!(eac(&["evaluate", "--episodes", "0"], &[]).status.code(), Some(3));
}
