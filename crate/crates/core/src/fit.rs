//! Structural parameter and pose recovery from point clouds.
//!
//! The objective has two parts. Every cloud point contributes its signed
//! distance to the candidate surface. A fixed set of probes on the candidate
//! surface contributes how far each probe lies from the cloud beyond a
//! spacing-derived slack, which stops oversized candidates from explaining
//! the data equally well. When the sensor position is known only probes it
//! could see take part.
//!
//! Fitting runs a coarse multi-start search over a parameter grid crossed
//! with the 24 axis-aligned orientations of the cloud's principal frame, then
//! refines the best starts with damped Gauss-Newton (Levenberg-Marquardt)
//! steps that are accepted only when they lower the objective.

use std::collections::BTreeMap;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::shape::{ProbeLayout, SurfaceProbe};
use crate::concepts::{AssetInstance, AssetKind, ConceptAsset, ParamRole, Solid};
use crate::geom::{PointCloud, Rotation3, Transform3, Vec3};

pub const MIN_FIT_POINTS: usize = 50;

/// Which part of the candidate surface the cloud is expected to cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coverage {
    /// Only point-to-surface distances.
    Off,
    /// The cloud samples the whole surface.
    Complete,
    /// The cloud is what a sensor at this world position sees.
    Viewpoint(Vec3),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Grid values per geometric parameter in the coarse search.
    pub grid_steps: usize,
    /// Number of coarse candidates that get refined.
    pub starts: usize,
    pub max_iterations: usize,
    /// Relative cost decrease below which refinement stops.
    pub tolerance: f64,
    /// Distance (m) under which a point counts as explained; an RMS residual
    /// above it is reported as no fit.
    pub inlier_threshold: f64,
    /// Points used during refinement; the final residual uses every point.
    pub max_points: usize,
    pub coverage: Coverage,
    /// Approximate number of surface probes in the coverage term.
    pub probes: usize,
    /// Coverage slack as a multiple of the cloud's median point spacing.
    pub coverage_slack: f64,
    pub seed: u64,
    /// Expected orientation of the asset frame, when a prior is available.
    /// The best start at this orientation is always refined.
    #[serde(skip)]
    pub orientation_hint: Option<Rotation3>,
    /// Observed points of other objects. With a viewpoint, surface that lies
    /// behind them is not expected in the cloud.
    #[serde(skip)]
    pub occluders: Vec<Vec3>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            grid_steps: 3,
            starts: 4,
            max_iterations: 80,
            tolerance: 1e-10,
            inlier_threshold: 0.004,
            max_points: 500,
            coverage: Coverage::Complete,
            probes: 300,
            coverage_slack: 1.0,
            seed: 0,
            orientation_hint: None,
            occluders: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub asset_id: String,
    pub params: BTreeMap<String, f64>,
    pub pose: Transform3,
    /// RMS point-to-surface distance over the whole cloud, meters.
    pub residual: f64,
    pub inlier_fraction: f64,
    pub iterations: usize,
    /// Objective (root of the summed squared residuals) on the refinement
    /// subset, initially and after every accepted step.
    pub residual_history: Vec<f64>,
}

impl FitResult {
    pub fn instance(&self) -> AssetInstance {
        AssetInstance::clamped(AssetKind::from_id(&self.asset_id).expect("fit of known asset"), &self.params)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("cloud has {got} points, at least {need} required")]
    TooFewPoints { got: usize, need: usize },
    #[error("no fit: residual {:.5} m above threshold {threshold} m", best.residual)]
    NoFit { best: Box<FitResult>, threshold: f64 },
    #[error("oracle grid is empty")]
    EmptyGrid,
}

/// The 24 proper signed permutation matrices.
pub fn axis_rotations() -> Vec<Rotation3> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for p in perms {
        for signs in 0..8u32 {
            let mut m = Matrix3::zeros();
            for (col, &row) in p.iter().enumerate() {
                m[(row, col)] = if signs & (1 << col) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(Rotation3::from_matrix(m).expect("signed permutation"));
            }
        }
    }
    out
}

/// Principal axes (columns, decreasing variance, right-handed) and centroid.
pub fn principal_frame(points: &[Vec3]) -> (Rotation3, Vec3) {
    let n = points.len().max(1) as f64;
    let c = points.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut m = Matrix3::zeros();
    for (col, &i) in idx.iter().enumerate() {
        m.set_column(col, &eig.eigenvectors.column(i));
    }
    if m.determinant() < 0.0 {
        let flipped = -m.column(2);
        m.set_column(2, &flipped);
    }
    (Rotation3::orthonormalized(m), c)
}

/// Evenly spread subset of at most `max` points (deterministic stride).
fn spread(points: &[Vec3], max: usize) -> Vec<Vec3> {
    if points.len() <= max {
        return points.to_vec();
    }
    (0..max).map(|i| points[i * points.len() / max]).collect()
}

fn rms(solid: &Solid, pose_inv: &Transform3, points: &[Vec3]) -> f64 {
    let s: f64 = points.iter().map(|p| solid.sdf(&pose_inv.apply_point(p)).powi(2)).sum();
    (s / points.len().max(1) as f64).sqrt()
}

/// Coverage slack multiplier while polishing partial views. The hidden side
/// of a partial view is unconstrained by data alone.
const POLISH_SLACK: f64 = 3.0;
const MARCH_EPS: f64 = 2e-5;
const MARCH_OFFSET: f64 = 5e-4;
const MARCH_STEPS: usize = 128;

/// Whether `solid` blocks the straight path from `from` to `to`.
fn occluded(solid: &Solid, from: &Vec3, to: &Vec3) -> bool {
    let d = to - from;
    let len = d.norm();
    let dir = d / len.max(1e-300);
    let mut t = 0.0;
    for _ in 0..MARCH_STEPS {
        if t >= len {
            return false;
        }
        let s = solid.sdf(&(from + dir * t));
        if s < MARCH_EPS {
            return true;
        }
        t += s;
    }
    false
}

/// Nearest-neighbour index over the cloud with the coverage slack.
struct CloudIndex {
    tree: ImmutableKdTree<f64, 3>,
    slack: f64,
}

impl CloudIndex {
    fn new(points: &[Vec3], slack_factor: f64) -> CloudIndex {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = ImmutableKdTree::new_from_slice(&raw);
        let probe = spread(points, 200);
        let mut nn: Vec<f64> = probe
            .iter()
            .map(|p| {
                let r = tree.nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], std::num::NonZero::new(2).unwrap());
                r.last().map_or(0.0, |n| n.distance.sqrt())
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        let median = nn.get(nn.len() / 2).copied().unwrap_or(0.0);
        CloudIndex { tree, slack: slack_factor * median }
    }

    fn distance(&self, p: &Vec3) -> f64 {
        self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]).distance.sqrt()
    }
}

/// Depth test against observed points of other objects, in the directions
/// seen from a viewpoint.
struct Occluders {
    eye: Vec3,
    tree: ImmutableKdTree<f64, 3>,
    depth: Vec<f64>,
    /// Chord radius on the unit sphere within which a point shadows a ray.
    radius: f64,
}

/// Depth by which an occluder must be in front of a surface point.
const OCCLUSION_MARGIN: f64 = 0.01;

impl Occluders {
    fn new(eye: Vec3, points: &[Vec3]) -> Option<Occluders> {
        if points.len() < 2 {
            return None;
        }
        let dirs: Vec<[f64; 3]> = points
            .iter()
            .map(|p| {
                let d = (p - eye).normalize();
                [d.x, d.y, d.z]
            })
            .collect();
        let tree = ImmutableKdTree::new_from_slice(&dirs);
        let mut nn: Vec<f64> = spread(points, 200)
            .iter()
            .map(|p| {
                let d = (p - eye).normalize();
                let r = tree.nearest_n::<SquaredEuclidean>(&[d.x, d.y, d.z], std::num::NonZero::new(2).unwrap());
                r.last().map_or(0.0, |n| n.distance.sqrt())
            })
            .collect();
        nn.sort_by(f64::total_cmp);
        let median = nn[nn.len() / 2];
        let depth = points.iter().map(|p| (p - eye).norm()).collect();
        Some(Occluders { eye, tree, depth, radius: (1.5 * median).max(2e-3) })
    }

    fn hides(&self, p: &Vec3) -> bool {
        let v = p - self.eye;
        let dist = v.norm();
        let d = v / dist;
        self.tree
            .within_unsorted::<SquaredEuclidean>(&[d.x, d.y, d.z], self.radius * self.radius)
            .iter()
            .any(|n| self.depth[n.item as usize] < dist - OCCLUSION_MARGIN)
    }
}

/// Parameter names optimized by the fitter, in schema order.
pub fn fitted_param_names(asset: &ConceptAsset) -> Vec<String> {
    asset.params.iter().filter(|p| p.role == ParamRole::Geometric).map(|p| p.name.clone()).collect()
}

struct Problem<'a> {
    asset: &'a ConceptAsset,
    names: Vec<String>,
    /// Values of parameters that are not optimized.
    fixed: BTreeMap<String, f64>,
    index: Option<CloudIndex>,
    viewpoint: Option<Vec3>,
    occluders: Option<Occluders>,
    use_coverage: bool,
    slack_scale: f64,
}

impl Problem<'_> {
    fn instance(&self, x: &[f64]) -> AssetInstance {
        let mut params = self.fixed.clone();
        for (name, v) in self.names.iter().zip(x) {
            params.insert(name.clone(), *v);
        }
        AssetInstance::clamped(self.asset.kind, &params)
    }

    fn project(&self, x: &mut [f64]) {
        let inst = self.instance(x);
        for (name, v) in self.names.iter().zip(x.iter_mut()) {
            *v = inst.get(name);
        }
    }

    fn pose(&self, x: &[f64], base: &Rotation3) -> Transform3 {
        let k = self.names.len();
        let omega = Vec3::new(x[k], x[k + 1], x[k + 2]);
        Transform3::new(Rotation3::exp(&omega) * *base, Vec3::new(x[k + 3], x[k + 4], x[k + 5]))
    }

    fn coverage_on(&self) -> bool {
        self.index.is_some() && self.use_coverage
    }

    fn len(&self, points: usize, layout: &ProbeLayout) -> usize {
        points + if self.coverage_on() { layout.len() } else { 0 }
    }

    /// Residuals of `solid` at `pose`: scaled signed distances of `points`
    /// followed by one slot per coverage probe. Probe visibility is taken
    /// from `frozen` when given, otherwise computed and returned.
    fn residuals_at(
        &self,
        solid: &Solid,
        probes: &[SurfaceProbe],
        pose: &Transform3,
        points: &[Vec3],
        frozen: Option<&[bool]>,
        trace: bool,
        out: &mut [f64],
    ) -> Vec<bool> {
        let inv = pose.invert();
        let scale = 1.0 / (points.len().max(1) as f64).sqrt();
        for (o, p) in out.iter_mut().zip(points) {
            *o = solid.sdf(&inv.apply_point(p)) * scale;
        }
        let Some(index) = self.index.as_ref().filter(|_| self.use_coverage) else { return Vec::new() };
        let eye = self.viewpoint.map(|v| inv.apply_point(&v));
        let mut seen = Vec::with_capacity(probes.len());
        for (i, (o, probe)) in out[points.len()..].iter_mut().zip(probes).enumerate() {
            *o = 0.0;
            let visible = match (frozen, eye) {
                (Some(f), _) => f[i],
                (None, Some(eye)) => {
                    probe.normal.dot(&(eye - probe.point)) > 0.0
                        && !self.occluders.as_ref().is_some_and(|o| o.hides(&pose.apply_point(&probe.point)))
                        && !(trace && occluded(solid, &(probe.point + probe.normal * MARCH_OFFSET), &eye))
                }
                (None, None) => true,
            };
            seen.push(visible);
            if probe.weight == 0.0 || !visible {
                continue;
            }
            let gap = index.distance(&pose.apply_point(&probe.point)) - index.slack * self.slack_scale;
            if gap > 0.0 {
                *o = gap * probe.weight.sqrt();
            }
        }
        seen
    }

    fn residuals(
        &self,
        x: &[f64],
        base: &Rotation3,
        points: &[Vec3],
        layout: &ProbeLayout,
        frozen: Option<&[bool]>,
        out: &mut [f64],
    ) -> Vec<bool> {
        let solid = self.instance(&x[..self.names.len()]).solid();
        let probes = if self.coverage_on() { solid.probes(layout) } else { Vec::new() };
        self.residuals_at(&solid, &probes, &self.pose(x, base), points, frozen, true, out)
    }

    /// Cost for the coarse search, with back-face culling only.
    fn cost_at(&self, solid: &Solid, probes: &[SurfaceProbe], pose: &Transform3, points: &[Vec3]) -> f64 {
        let mut r = vec![0.0; points.len() + if self.coverage_on() { probes.len() } else { 0 }];
        self.residuals_at(solid, probes, pose, points, None, false, &mut r);
        r.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

struct Refined {
    x: Vec<f64>,
    base: Rotation3,
    history: Vec<f64>,
    iterations: usize,
}

fn levenberg_marquardt(problem: &Problem, x0: Vec<f64>, base: Rotation3, points: &[Vec3], cfg: &FitConfig) -> Refined {
    let k = problem.names.len();
    // Probe grids follow the starting dimensions and stay fixed for the run.
    let layout = problem.instance(&x0[..k]).solid().probe_layout(cfg.probes);
    let n = problem.len(points.len(), &layout);
    let dim = x0.len();
    let mut x = x0;
    let mut base = base;
    let mut r = vec![0.0; n];
    let mut visible = problem.residuals(&x, &base, points, &layout, None, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut history = vec![cost.sqrt()];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut jac = DMatrix::zeros(n, dim);
    let mut rp = vec![0.0; n];
    let h = 1e-7;
    while iterations < cfg.max_iterations {
        iterations += 1;
        // Visibility is held at the current estimate while differencing.
        for j in 0..dim {
            let mut xp = x.clone();
            xp[j] += h;
            problem.residuals(&xp, &base, points, &layout, Some(&visible), &mut rp);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let diag_mean = (0..dim).map(|i| jtj[(i, i)]).sum::<f64>() / dim as f64;
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for i in 0..dim {
                a[(i, i)] += lambda * (jtj[(i, i)] + 1e-9 * diag_mean.max(1e-300));
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            problem.project(&mut xn[..k]);
            let seen = problem.residuals(&xn, &base, points, &layout, None, &mut rp);
            let cn: f64 = rp.iter().map(|v| v * v).sum();
            if cn < cost {
                let rel = (cost - cn) / cost.max(1e-300);
                // Fold the rotation increment into the base orientation.
                let omega = Vec3::new(xn[k], xn[k + 1], xn[k + 2]);
                base = Rotation3::exp(&omega) * base;
                xn[k] = 0.0;
                xn[k + 1] = 0.0;
                xn[k + 2] = 0.0;
                x = xn;
                std::mem::swap(&mut r, &mut rp);
                visible = seen;
                cost = cn;
                history.push(cost.sqrt());
                lambda = (lambda / 3.0).max(1e-12);
                improved = rel > cfg.tolerance;
                if !improved {
                    return Refined { x, base, history, iterations };
                }
                break;
            }
            lambda *= 5.0;
        }
        if !improved {
            break;
        }
    }
    Refined { x, base, history, iterations }
}

fn grid_values(lower: f64, upper: f64, steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..steps).map(|i| lower + (i as f64 + 0.5) / steps as f64 * (upper - lower)).collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

fn finish(asset: &ConceptAsset, inst: &AssetInstance, pose: Transform3, cloud: &[Vec3], iterations: usize, history: Vec<f64>, threshold: f64) -> FitResult {
    let solid = inst.solid();
    let inv = pose.invert();
    let d: Vec<f64> = cloud.iter().map(|p| solid.sdf(&inv.apply_point(p)).abs()).collect();
    let residual = (d.iter().map(|v| v * v).sum::<f64>() / d.len().max(1) as f64).sqrt();
    let inliers = d.iter().filter(|v| **v <= threshold).count();
    FitResult {
        asset_id: asset.asset_id.clone(),
        params: inst.params.clone(),
        pose,
        residual,
        inlier_fraction: inliers as f64 / d.len().max(1) as f64,
        iterations,
        residual_history: history,
    }
}

/// Fits `asset` to `cloud`, recovering geometric parameters and pose.
/// Kinematic and discrete parameters keep their range midpoints unless given
/// in `fixed`.
pub fn fit_structural_with(
    asset: &ConceptAsset,
    cloud: &PointCloud,
    cfg: &FitConfig,
    fixed: &BTreeMap<String, f64>,
) -> Result<FitResult, FitError> {
    if cloud.len() < MIN_FIT_POINTS {
        return Err(FitError::TooFewPoints { got: cloud.len(), need: MIN_FIT_POINTS });
    }
    let names = fitted_param_names(asset);
    let mut fixed_all: BTreeMap<String, f64> = asset
        .params
        .iter()
        .filter(|p| p.role != ParamRole::Geometric)
        .map(|p| (p.name.clone(), p.midpoint()))
        .collect();
    for (k, v) in fixed {
        fixed_all.insert(k.clone(), *v);
    }
    let index = (cfg.coverage != Coverage::Off).then(|| CloudIndex::new(&cloud.points, cfg.coverage_slack));
    let viewpoint = match cfg.coverage {
        Coverage::Viewpoint(v) => Some(v),
        _ => None,
    };
    let occluders = viewpoint.and_then(|v| Occluders::new(v, &cfg.occluders));
    let mut problem =
        Problem { asset, names, fixed: fixed_all, index, viewpoint, occluders, use_coverage: true, slack_scale: 1.0 };
    let k = problem.names.len();
    let coarse_pts = spread(&cloud.points, 120);
    let refine_pts = spread(&cloud.points, cfg.max_points.max(MIN_FIT_POINTS));
    let (frame, centroid) = principal_frame(&cloud.points);

    let axes: Vec<Vec<f64>> = problem
        .names
        .iter()
        .map(|n| {
            let s = asset.param(n).expect("schema name");
            grid_values(s.lower, s.upper, cfg.grid_steps)
        })
        .collect();
    let mut seen = Vec::new();
    let mut candidates: Vec<(f64, Vec<f64>, Rotation3)> = Vec::new();
    let mut hinted: Option<(f64, Vec<f64>, Rotation3)> = None;
    for combo in cartesian(&axes) {
        let mut xp = combo.clone();
        problem.project(&mut xp);
        if seen.contains(&xp) {
            continue;
        }
        seen.push(xp.clone());
        let solid = problem.instance(&xp).solid();
        let layout = solid.probe_layout((cfg.probes / 3).max(24));
        let probes = solid.probes(&layout);
        let local_centroid = probes.iter().fold(Vec3::zeros(), |acc, p| acc + p.point * p.weight);
        for s in axis_rotations() {
            let rot = frame * s;
            let pose = Transform3::new(rot, centroid - rot.apply(&local_centroid));
            let cost = problem.cost_at(&solid, &probes, &pose, &coarse_pts);
            let mut x = xp.clone();
            x.extend([0.0, 0.0, 0.0, pose.translation.x, pose.translation.y, pose.translation.z]);
            candidates.push((cost, x, rot));
        }
        if let Some(rot) = cfg.orientation_hint {
            let pose = Transform3::new(rot, centroid - rot.apply(&local_centroid));
            let cost = problem.cost_at(&solid, &probes, &pose, &coarse_pts);
            if hinted.as_ref().is_none_or(|h| cost < h.0) {
                let mut x = xp.clone();
                x.extend([0.0, 0.0, 0.0, pose.translation.x, pose.translation.y, pose.translation.z]);
                hinted = Some((cost, x, rot));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(cfg.starts.max(1));
    candidates.extend(hinted);

    let mut best: Option<(f64, Refined)> = None;
    for (_, x0, base) in candidates {
        let refined = levenberg_marquardt(&problem, x0, base, &refine_pts, cfg);
        let score = *refined.history.last().expect("history starts with initial cost");
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, refined));
        }
    }
    let (_, mut refined) = best.expect("at least one start");
    // Polish with more of the cloud. Full clouds use the distance term alone;
    // partial views keep a looser coverage term so hidden faces cannot drift.
    if problem.viewpoint.is_some() {
        problem.slack_scale = POLISH_SLACK;
    } else {
        problem.use_coverage = false;
    }
    let polish_pts = spread(&cloud.points, 4 * cfg.max_points.max(MIN_FIT_POINTS));
    let polish_cfg = FitConfig { max_iterations: cfg.max_iterations / 2, ..cfg.clone() };
    let more = levenberg_marquardt(&problem, refined.x.clone(), refined.base, &polish_pts, &polish_cfg);
    refined.iterations += more.iterations;
    refined.x = more.x;
    refined.base = more.base;
    refined.history.extend(more.history.into_iter().skip(1));
    let inst = problem.instance(&refined.x[..k]);
    let pose = problem.pose(&refined.x, &refined.base);
    let result = finish(asset, &inst, pose, &cloud.points, refined.iterations, refined.history, cfg.inlier_threshold);
    if result.residual > cfg.inlier_threshold {
        return Err(FitError::NoFit { threshold: cfg.inlier_threshold, best: Box::new(result) });
    }
    Ok(result)
}

pub fn fit_structural(asset: &ConceptAsset, cloud: &PointCloud, cfg: &FitConfig) -> Result<FitResult, FitError> {
    fit_structural_with(asset, cloud, cfg, &BTreeMap::new())
}

/// World pose of a part from the known object pose and the part's pose in
/// the object frame derived from fitted structural variables.
pub fn recover_pose(known_object_pose: &Transform3, fitted_local: &Transform3) -> Transform3 {
    known_object_pose.compose(fitted_local)
}

/// Axis of continuous rotational symmetry through the canonical origin.
pub fn continuous_axis(kind: AssetKind) -> Option<Vec3> {
    match kind {
        AssetKind::RingHandle => Some(Vec3::z()),
        AssetKind::Knob => Some(Vec3::y()),
        _ => None,
    }
}

/// Rigid motions among the 24 axis rotations about the solid's center that
/// map the solid of `inst` onto itself.
pub fn discrete_symmetries(inst: &AssetInstance) -> Vec<Transform3> {
    let solid = inst.solid();
    let center = solid.surface_probes(64).iter().fold(Vec3::zeros(), |acc, p| acc + p.point * p.weight);
    let samples = inst.sample_surface(200, 0).map(|c| c.points).unwrap_or_default();
    axis_rotations()
        .into_iter()
        .map(|r| Transform3::new(r, center - r.apply(&center)))
        .filter(|t| samples.iter().all(|p| solid.sdf(&t.apply_point(p)).abs() <= 1e-7))
        .collect()
}

/// Rotation about unit `axis` by the angle that brings `from * Rot` closest
/// to `to`.
fn best_spin(from: &Rotation3, to: &Rotation3, axis: &Vec3) -> Rotation3 {
    let d = from.inverse() * *to;
    let m = d.matrix();
    let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let c = m.trace() - axis.dot(&(m * axis));
    Rotation3::about_axis(axis, axis.dot(&w).atan2(c))
}

/// Among the poses describing the same fitted solid, the one whose
/// orientation is closest to `prior`.
pub fn resolve_symmetry(inst: &AssetInstance, fitted: &Transform3, prior: &Rotation3) -> Transform3 {
    let spin = continuous_axis(inst.kind);
    discrete_symmetries(inst)
        .iter()
        .map(|s| {
            let pose = fitted.compose(s);
            match spin {
                Some(a) => pose.compose(&Transform3::from_rotation(best_spin(&pose.rotation, prior, &a))),
                None => pose,
            }
        })
        .min_by(|a, b| a.rotation.geodesic_angle(prior).total_cmp(&b.rotation.geodesic_angle(prior)))
        .unwrap_or(*fitted)
}

/// Exhaustive search space for [`brute_force_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGrid {
    /// Candidate values per parameter; parameters not listed keep their
    /// range midpoints.
    pub params: Vec<(String, Vec<f64>)>,
    pub poses: Vec<Transform3>,
}

/// Evaluates every grid cell and returns the global minimum of the RMS
/// residual, without refinement. Invalid parameter combinations are skipped.
pub fn brute_force_oracle(asset: &ConceptAsset, cloud: &PointCloud, grid: &OracleGrid) -> Result<FitResult, FitError> {
    if grid.poses.is_empty() || grid.params.iter().any(|(_, v)| v.is_empty()) {
        return Err(FitError::EmptyGrid);
    }
    let axes: Vec<Vec<f64>> = grid.params.iter().map(|(_, v)| v.clone()).collect();
    let mut best: Option<(f64, AssetInstance, Transform3)> = None;
    for combo in cartesian(&axes) {
        let mut params: BTreeMap<String, f64> = asset.params.iter().map(|p| (p.name.clone(), p.midpoint())).collect();
        for ((name, _), v) in grid.params.iter().zip(&combo) {
            params.insert(name.clone(), *v);
        }
        let Ok(inst) = asset.instantiate(&params) else { continue };
        let solid = inst.solid();
        for pose in &grid.poses {
            let cost = rms(&solid, &pose.invert(), &cloud.points);
            if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
                best = Some((cost, inst.clone(), *pose));
            }
        }
    }
    let (_, inst, pose) = best.ok_or(FitError::EmptyGrid)?;
    Ok(finish(asset, &inst, pose, &cloud.points, 0, Vec::new(), f64::INFINITY))
}

/// Largest relative error over geometric parameters, minimized over the
/// symmetry-equivalent bindings of `truth`.
pub fn relative_param_error(truth: &AssetInstance, fitted: &BTreeMap<String, f64>) -> f64 {
    let asset = ConceptAsset::builtin(truth.kind);
    truth
        .equivalent_params()
        .iter()
        .map(|eq| {
            fitted_param_names(&asset)
                .iter()
                .map(|n| ((fitted[n] - eq[n]) / eq[n]).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::AssetKind;
    use crate::geom::rot_rpy;

    fn curve(r_o: f64, theta: f64, r_t: f64) -> AssetInstance {
        let p = [("R_o", r_o), ("theta_c", theta), ("r_t", r_t)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
        ConceptAsset::builtin(AssetKind::CurveHandle).instantiate(&p).unwrap()
    }

    #[test]
    fn axis_rotation_set() {
        let rs = axis_rotations();
        assert_eq!(rs.len(), 24);
        for (i, a) in rs.iter().enumerate() {
            for b in &rs[i + 1..] {
                assert!(a.geodesic_angle(b) > 0.1);
            }
        }
    }

    #[test]
    fn too_small_cloud() {
        let cloud = PointCloud::new(vec![Vec3::zeros(); 10]);
        let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
        assert!(matches!(fit_structural(&asset, &cloud, &FitConfig::default()), Err(FitError::TooFewPoints { got: 10, .. })));
    }

    #[test]
    fn recovers_curve_handle_at_random_pose() {
        let truth = curve(0.04, std::f64::consts::FRAC_PI_2, 0.006);
        let pose = Transform3::new(rot_rpy(0.4, -0.9, 2.1), Vec3::new(0.3, -0.2, 0.5));
        let cloud = truth.sample_surface(2048, 9).unwrap().transformed(&pose);
        let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
        let fit = fit_structural(&asset, &cloud, &FitConfig::default()).unwrap();
        assert!(relative_param_error(&truth, &fit.params) < 0.02, "{:?}", fit.params);
        assert!(fit.residual <= 1e-4, "{}", fit.residual);
        for w in fit.residual_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn oracle_single_cell_and_empty() {
        let truth = curve(0.05, 2.0, 0.008);
        let cloud = truth.sample_surface(300, 1).unwrap();
        let asset = ConceptAsset::builtin(AssetKind::CurveHandle);
        let grid = OracleGrid {
            params: vec![("R_o".into(), vec![0.05]), ("theta_c".into(), vec![2.0]), ("r_t".into(), vec![0.008])],
            poses: vec![Transform3::identity()],
        };
        let r = brute_force_oracle(&asset, &cloud, &grid).unwrap();
        assert!(r.residual < 1e-9);
        assert_eq!(r.params["R_o"], 0.05);
        let empty = OracleGrid { params: grid.params.clone(), poses: vec![] };
        assert_eq!(brute_force_oracle(&asset, &cloud, &empty), Err(FitError::EmptyGrid));
    }

    #[test]
    fn recover_pose_composes() {
        let local = Transform3::new(rot_rpy(0.1, 0.2, 0.3), Vec3::new(0.1, 0.2, 0.3));
        assert_eq!(recover_pose(&Transform3::identity(), &local), local);
        let moved = recover_pose(&crate::geom::translate(1.0, 0.0, 0.0), &local);
        assert!((moved.translation - local.translation - Vec3::x()).norm() < 1e-15);
        assert_eq!(moved.rotation, local.rotation);
    }
}
