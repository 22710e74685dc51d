//! Point-cloud rendering of structural instances: full surface sampling and
//! single-camera partial views with hidden-point removal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::StructuralInstance;
use crate::concepts::shape::gaussian_vec;
use crate::concepts::{AssetInstance, Solid};
use crate::geom::{PointCloud, Transform3, Vec3};

/// Sphere-tracing hit threshold, meters.
const HIT_EPS: f64 = 2e-5;
/// Offset of the ray origin off the surface, meters.
const START_OFFSET: f64 = 5e-4;
const MAX_MARCH_STEPS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
}

impl Camera {
    /// Camera on a sphere around `target`; azimuth 0 looks from the front
    /// (-y side), elevation is measured up from the horizontal plane.
    pub fn orbit(target: Vec3, distance: f64, azimuth: f64, elevation: f64) -> Camera {
        let dir = Vec3::new(azimuth.sin() * elevation.cos(), -azimuth.cos() * elevation.cos(), elevation.sin());
        Camera { position: target + dir * distance, target }
    }
}

/// Random camera with elevation in [30, 60] degrees, any azimuth.
pub fn sample_camera<R: Rng + ?Sized>(rng: &mut R, target: Vec3, distance: f64) -> Camera {
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let elevation = rng.random_range(30f64.to_radians()..=60f64.to_radians());
    Camera::orbit(target, distance, azimuth, elevation)
}

/// Camera aimed at the center of `inst` placed at `pose`, from a random
/// direction on the asset's front side (canonical -y, where parts are
/// operated from) whose components in the asset frame all have magnitude at
/// least `min_component`. Such views see one face across each canonical axis,
/// so every extent of a box-like asset is observable.
pub fn oblique_camera<R: Rng + ?Sized>(
    rng: &mut R,
    inst: &AssetInstance,
    pose: &Transform3,
    distance: f64,
    min_component: f64,
) -> Camera {
    let center = inst.solid().surface_probes(64).iter().fold(Vec3::zeros(), |acc, p| acc + p.point * p.weight);
    let dir = loop {
        let d = gaussian_vec(rng, 1.0);
        let n = d.norm();
        if n > 1e-9 && d.iter().all(|c| (c / n).abs() >= min_component) {
            break Vec3::new(d.x, -d.y.abs(), d.z) / n;
        }
    };
    let target = pose.apply_point(&center);
    Camera { position: target + pose.apply_dir(&dir) * distance, target }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub points_per_part: usize,
    pub seed: u64,
    /// Standard deviation of isotropic Gaussian noise added after visibility.
    pub noise_sigma: f64,
}

/// World-frame scene SDF with cached inverse part poses.
pub struct SceneSdf {
    parts: Vec<(Transform3, Solid)>,
}

impl SceneSdf {
    pub fn new(inst: &StructuralInstance) -> SceneSdf {
        SceneSdf { parts: inst.parts.iter().map(|p| (p.world_pose.invert(), p.instance.solid())).collect() }
    }

    /// Scene from world poses and canonical solids.
    pub fn from_parts(parts: &[(Transform3, Solid)]) -> SceneSdf {
        SceneSdf { parts: parts.iter().map(|(pose, s)| (pose.invert(), s.clone())).collect() }
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.parts.iter().map(|(inv, s)| s.sdf(&inv.apply_point(p))).fold(f64::INFINITY, f64::min)
    }

    /// Whether the straight segment from `from` to `to` leaves free space.
    pub fn segment_blocked(&self, from: &Vec3, to: &Vec3) -> bool {
        let d = to - from;
        let len = d.norm();
        if len == 0.0 {
            return false;
        }
        let dir = d / len;
        let mut t = 0.0;
        for _ in 0..MAX_MARCH_STEPS {
            if t >= len {
                return false;
            }
            let s = self.sdf(&(from + dir * t));
            if s < HIT_EPS {
                return true;
            }
            t += s;
        }
        false
    }
}

/// Keeps the points (with outward normals) visible from `camera` among the
/// solids of `scene`, then adds noise.
fn visible_points(
    scene: &SceneSdf,
    samples: impl Iterator<Item = (Vec3, Vec3, u32)>,
    camera: &Camera,
    noise_sigma: f64,
    seed: u64,
) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0F0C_C1);
    let mut points = Vec::new();
    let mut kept = Vec::new();
    for (p, n, label) in samples {
        if n.dot(&(camera.position - p)) <= 0.0 {
            continue;
        }
        if scene.segment_blocked(&(p + n * START_OFFSET), &camera.position) {
            continue;
        }
        points.push(if noise_sigma > 0.0 { p + gaussian_vec(&mut rng, noise_sigma) } else { p });
        kept.push(label);
    }
    PointCloud::labeled(points, kept)
}

/// Partial view of a single asset instance placed at `pose`.
pub fn render_asset_partial(
    inst: &AssetInstance,
    pose: &Transform3,
    camera: &Camera,
    opts: &RenderOptions,
) -> PointCloud {
    let solid = inst.solid();
    let scene = SceneSdf::from_parts(&[(*pose, solid.clone())]);
    let local = inst.sample_surface(opts.points_per_part.max(1), opts.seed).expect("bound instance");
    let samples = local.points.into_iter().map(|p| (pose.apply_point(&p), pose.apply_dir(&solid.normal(&p)), 0));
    let mut cloud = visible_points(&scene, samples, camera, opts.noise_sigma, opts.seed);
    cloud.labels = None;
    cloud
}

impl StructuralInstance {
    /// Samples `n` surface points per part, labeled by part index.
    pub fn render(&self, n: usize, seed: u64) -> PointCloud {
        let mut points = Vec::with_capacity(n * self.parts.len());
        let mut labels = Vec::with_capacity(n * self.parts.len());
        for (i, part) in self.parts.iter().enumerate() {
            let local = part
                .instance
                .sample_surface(n.max(1), seed.wrapping_add(i as u64 * 0x9E37_79B9))
                .expect("resolved parts are fully bound");
            for p in local.points {
                points.push(part.world_pose.apply_point(&p));
                labels.push(i as u32);
            }
        }
        PointCloud::labeled(points, labels)
    }

    /// Points of a full render visible from `camera`, with optional noise.
    pub fn render_partial(&self, camera: &Camera, opts: &RenderOptions) -> PointCloud {
        let full = self.render(opts.points_per_part, opts.seed);
        let scene = SceneSdf::new(self);
        let solids: Vec<(Transform3, Solid)> =
            self.parts.iter().map(|p| (p.world_pose.invert(), p.instance.solid())).collect();
        let labels = full.labels.clone().expect("render labels points");
        let samples = full.points.into_iter().zip(labels).map(|(p, label)| {
            let (inv, solid) = &solids[label as usize];
            let n = self.parts[label as usize].world_pose.apply_dir(&solid.normal(&inv.apply_point(&p)));
            (p, n, label)
        });
        visible_points(&scene, samples, camera, opts.noise_sigma, opts.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blueprint::{builtin_blueprint, instantiate};
    use std::collections::BTreeMap;

    fn closed_microwave() -> StructuralInstance {
        let bp = builtin_blueprint("microwave").unwrap();
        instantiate(&bp, &bp.nominal_params(), Transform3::identity(), &BTreeMap::new()).unwrap()
    }

    #[test]
    fn full_render_pulls_back_onto_parts() {
        let inst = closed_microwave();
        let cloud = inst.render(4096, 5);
        assert_eq!(cloud.len(), 4096 * inst.parts.len());
        for (p, l) in cloud.points.iter().zip(cloud.labels.as_ref().unwrap()) {
            let part = &inst.parts[*l as usize];
            let local = part.world_pose.invert().apply_point(p);
            assert!(part.instance.constraint(&local).abs() <= 1e-6);
        }
        assert_eq!(inst.render(4096, 5), cloud);
    }

    #[test]
    fn front_view_hides_door_back_face() {
        let inst = closed_microwave();
        let cam = Camera::orbit(Vec3::new(0.0, 0.0, 0.15), 5.0, 0.0, 0.5);
        let opts = RenderOptions { points_per_part: 4000, seed: 2, noise_sigma: 0.0 };
        let part = inst.render_partial(&cam, &opts);
        let full = inst.render(4000, 2);
        assert!(part.len() < full.len() && !part.is_empty());
        let door = inst.part("door").unwrap();
        let inv = door.world_pose.invert();
        let t_d = inst.params["t_d"];
        for (p, l) in part.points.iter().zip(part.labels.as_ref().unwrap()) {
            // Every kept point is one of the full render's points.
            assert!(full.points.contains(p));
            if *l == 1 {
                let local = inv.apply_point(p);
                // Back face of the panel is at local y = +t_d / 2.
                assert!(local.y < t_d / 2.0 - 1e-9, "back-face point {local:?}");
                let n = door.world_pose.apply_dir(&door.instance.solid().normal(&local));
                assert!(n.dot(&(cam.position - p)) > 0.0);
            }
        }
        // The body behind the closed door is hidden except for its rim, top and sides.
        let body_front: Vec<_> = part
            .points
            .iter()
            .zip(part.labels.as_ref().unwrap())
            .filter(|(p, l)| **l == 0 && p.y.abs() < 1e-9 && p.x.abs() < 0.05 && (p.z - 0.15).abs() < 0.05)
            .collect();
        assert!(body_front.is_empty());
    }

    #[test]
    fn camera_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = sample_camera(&mut rng, Vec3::zeros(), 5.0);
            assert!((c.position.norm() - 5.0).abs() < 1e-12);
            let el = (c.position.z / 5.0).asin().to_degrees();
            assert!((30.0 - 1e-9..=60.0 + 1e-9).contains(&el));
        }
    }
}
