use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use eac_core::blueprint::{oblique_camera, render_asset_partial, RenderOptions};
use eac_core::concepts::{AssetInstance, AssetKind, ConceptAsset};
use eac_core::fit::{
    brute_force_oracle, fit_structural, recover_pose, relative_param_error, Coverage, FitConfig, FitError, OracleGrid,
};
use eac_core::geom::{rot_rpy, Rotation3, Transform3, Vec3};
use eac_core::PointCloud;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn curve(r_o: f64, theta: f64, r_t: f64) -> AssetInstance {
    let p: BTreeMap<String, f64> =
        [("R_o", r_o), ("theta_c", theta), ("r_t", r_t)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    ConceptAsset::builtin(AssetKind::CurveHandle).instantiate(&p).unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng) -> Transform3 {
    let omega = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    Transform3::new(Rotation3::exp(&omega), Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0)))
}

#[test]
fn curve_handle_full_and_half_view() {
    let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
    let truth = curve(0.04, FRAC_PI_2, 0.006);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pose = random_pose(&mut rng);

    let full = truth.sample_surface(2048, 3).unwrap().transformed(&pose);
    let fit = fit_structural(&asset, &full, &FitConfig::default()).unwrap();
    assert!(relative_param_error(&truth, &fit.params) <= 0.02, "{:?}", fit.params);
    assert!(fit.residual <= 1e-4);
    assert!((0.0..=1.0).contains(&fit.inlier_fraction));

    let cam = oblique_camera(&mut rng, &truth, &pose, 1.0, 0.3);
    let half = render_asset_partial(&truth, &pose, &cam, &RenderOptions { points_per_part: 4096, seed: 3, noise_sigma: 5e-4 });
    assert!(half.len() < 4096);
    let cfg = FitConfig { coverage: Coverage::Viewpoint(cam.position), ..FitConfig::default() };
    let fit = fit_structural(&asset, &half, &cfg).unwrap();
    assert!(relative_param_error(&truth, &fit.params) <= 0.05, "{:?}", fit.params);
}

#[test]
fn precondition_and_no_fit() {
    let asset = ConceptAsset::builtin(AssetKind::Knob);
    let tiny = PointCloud::new(vec![Vec3::zeros(); 10]);
    assert_eq!(
        fit_structural(&asset, &tiny, &FitConfig::default()).unwrap_err(),
        FitError::TooFewPoints { got: 10, need: 50 }
    );
    // A flat 1 m square is not a knob.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let plane: Vec<Vec3> = (0..400).map(|_| Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0)).collect();
    match fit_structural(&asset, &PointCloud::new(plane), &FitConfig::default()) {
        Err(FitError::NoFit { best, threshold }) => assert!(best.residual > threshold),
        other => panic!("expected no fit, got {other:?}"),
    }
}

#[test]
fn deterministic() {
    let asset = ConceptAsset::builtin(AssetKind::Lever);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = asset.random_instance(&mut rng);
    let cloud = truth.sample_surface(1024, 1).unwrap().transformed(&random_pose(&mut rng));
    let a = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
    let b = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn agrees_with_brute_force_oracle() {
    let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let steps = 9;
    let grid_values: Vec<(String, Vec<f64>)> = asset
        .params
        .iter()
        .map(|s| (s.name.clone(), (0..steps).map(|i| s.lower + (s.upper - s.lower) * i as f64 / (steps - 1) as f64).collect()))
        .collect();
    for _ in 0..3 {
        let truth = asset.random_instance(&mut rng);
        let pose = random_pose(&mut rng);
        let cloud = truth.sample_surface(400, 4).unwrap().transformed(&pose);
        let oracle = brute_force_oracle(&asset, &cloud, &OracleGrid { params: grid_values.clone(), poses: vec![pose] }).unwrap();
        let fit = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
        for s in &asset.params {
            let cell = (s.upper - s.lower) / (steps - 1) as f64;
            assert!((fit.params[&s.name] - oracle.params[&s.name]).abs() <= cell, "{}: {:?} vs {:?}", s.name, fit.params, oracle.params);
        }
    }
}

#[test]
fn recovered_world_pose_round_trip() {
    let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
    let truth = curve(0.06, 2.2, 0.008);
    let local = Transform3::new(rot_rpy(0.3, 0.2, -1.1), Vec3::new(0.1, -0.3, 0.4));
    let object = Transform3::new(rot_rpy(0.0, 0.0, 0.7), Vec3::new(1.0, 2.0, 0.0));
    let cloud = truth.sample_surface(2048, 6).unwrap().transformed(&local);
    let fit = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
    let expected = object.compose(&local);
    // The handle is unchanged by a half turn about its y axis.
    let best = [Rotation3::identity(), Rotation3::about_y(PI)]
        .iter()
        .map(|s| recover_pose(&object, &fit.pose.compose(&Transform3::from_rotation(*s))).distance_to(&expected))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    assert!(best.0 <= 1f64.to_radians() && best.1 <= 1e-3, "{best:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn fit_results_respect_ranges(seed in 0u64..1000, kind in 0usize..3) {
        let kind = [AssetKind::Knob, AssetKind::DrawerFace, AssetKind::RingHandle][kind];
        let asset = ConceptAsset::builtin(kind);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = asset.random_instance(&mut rng);
        let cloud = truth.sample_surface(600, seed).unwrap().transformed(&random_pose(&mut rng));
        let fit = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
        prop_assert!(fit.residual >= 0.0);
        prop_assert!((0.0..=1.0).contains(&fit.inlier_fraction));
        for s in &asset.params {
            prop_assert!(s.contains(fit.params[&s.name]));
        }
        prop_assert!(fit.instance().check_bound().is_ok());
    }
}
