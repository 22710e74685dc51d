//! Analytic solids with exact (or sign-exact) signed distance functions and
//! area-weighted surface samplers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::geom::Vec3;

/// Tolerance used to decide whether a candidate leaf-surface point lies on the
/// surface of a composite solid.
const ON_SURFACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Solid {
    /// Axis-aligned box.
    Cuboid { center: Vec3, half: Vec3 },
    /// Circular cylinder aligned with coordinate axis `axis` (0 = x, 1 = y, 2 = z).
    Cylinder { center: Vec3, axis: usize, radius: f64, half_len: f64 },
    /// Flat ring centered at the origin with axis z.
    Annulus { inner: f64, outer: f64, half_thickness: f64 },
    /// Sphere swept along a circular arc in the x-y plane centered at the
    /// origin; the arc is symmetric about the -y direction.
    ArcTube { radius: f64, tube: f64, half_angle: f64 },
    Union(Vec<Solid>),
    /// First operand minus the second.
    Difference(Box<Solid>, Box<Solid>),
}

fn box_sdf(p: &Vec3, center: &Vec3, half: &Vec3) -> f64 {
    let q = (p - center).abs() - half;
    let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    outside + q.max().min(0.0)
}

fn box2_sdf(a: f64, b: f64, ha: f64, hb: f64) -> f64 {
    let qa = a.abs() - ha;
    let qb = b.abs() - hb;
    let outside = (qa.max(0.0).powi(2) + qb.max(0.0).powi(2)).sqrt();
    outside + qa.max(qb).min(0.0)
}

/// Unit vector in the x-y plane at angle `phi` measured from -y toward +x.
pub(crate) fn arc_dir(phi: f64) -> Vec3 {
    Vec3::new(phi.sin(), -phi.cos(), 0.0)
}

/// Angle of `p` around z measured from -y toward +x, in (-pi, pi].
pub(crate) fn arc_angle(p: &Vec3) -> f64 {
    p.x.atan2(-p.y)
}

fn split_axis(p: &Vec3, axis: usize) -> (f64, f64) {
    let along = p[axis];
    let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
    (along, (p[i] * p[i] + p[j] * p[j]).sqrt())
}

fn axis_frame(axis: usize) -> (Vec3, Vec3, Vec3) {
    let mut a = Vec3::zeros();
    a[axis] = 1.0;
    let mut u = Vec3::zeros();
    u[(axis + 1) % 3] = 1.0;
    let mut v = Vec3::zeros();
    v[(axis + 2) % 3] = 1.0;
    (a, u, v)
}

impl Solid {
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Solid::Cuboid { center, half } => box_sdf(p, center, half),
            Solid::Cylinder { center, axis, radius, half_len } => {
                let (along, rho) = split_axis(&(p - center), *axis);
                let qa = rho - radius;
                let qb = along.abs() - half_len;
                let outside = (qa.max(0.0).powi(2) + qb.max(0.0).powi(2)).sqrt();
                outside + qa.max(qb).min(0.0)
            }
            Solid::Annulus { inner, outer, half_thickness } => {
                let rho = (p.x * p.x + p.y * p.y).sqrt();
                let mid = 0.5 * (inner + outer);
                box2_sdf(rho - mid, p.z, 0.5 * (outer - inner), *half_thickness)
            }
            Solid::ArcTube { radius, tube, half_angle } => {
                let phi = arc_angle(p);
                if phi.abs() <= *half_angle {
                    let rho = (p.x * p.x + p.y * p.y).sqrt();
                    ((rho - radius).powi(2) + p.z * p.z).sqrt() - tube
                } else {
                    let e1 = arc_dir(*half_angle) * *radius;
                    let e2 = arc_dir(-*half_angle) * *radius;
                    (p - e1).norm().min((p - e2).norm()) - tube
                }
            }
            Solid::Union(parts) => parts.iter().map(|s| s.sdf(p)).fold(f64::INFINITY, f64::min),
            Solid::Difference(a, b) => a.sdf(p).max(-b.sdf(p)),
        }
    }

    /// Outward unit normal from the central-difference SDF gradient.
    pub fn normal(&self, p: &Vec3) -> Vec3 {
        let h = 1e-7;
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = h;
            g[i] = self.sdf(&(p + e)) - self.sdf(&(p - e));
        }
        let n = g.norm();
        if n == 0.0 {
            Vec3::z()
        } else {
            g / n
        }
    }

    fn leaves<'a>(&'a self, out: &mut Vec<&'a Solid>) {
        match self {
            Solid::Union(parts) => parts.iter().for_each(|s| s.leaves(out)),
            Solid::Difference(a, b) => {
                a.leaves(out);
                b.leaves(out);
            }
            leaf => out.push(leaf),
        }
    }

    /// Surface area of a primitive; composites report the sum over leaves,
    /// an upper bound on their true area.
    pub fn raw_area(&self) -> f64 {
        match self {
            Solid::Cuboid { half, .. } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
            Solid::Cylinder { radius, half_len, .. } => {
                2.0 * PI * radius * 2.0 * half_len + 2.0 * PI * radius * radius
            }
            Solid::Annulus { inner, outer, half_thickness } => {
                2.0 * PI * (outer + inner) * 2.0 * half_thickness
                    + 2.0 * PI * (outer * outer - inner * inner)
            }
            Solid::ArcTube { radius, tube, half_angle } => {
                2.0 * half_angle * radius * 2.0 * PI * tube + 4.0 * PI * tube * tube
            }
            Solid::Union(_) | Solid::Difference(..) => {
                let mut leaves = Vec::new();
                self.leaves(&mut leaves);
                leaves.iter().map(|l| l.raw_area()).sum()
            }
        }
    }

    /// Uniform point on the surface of a primitive.
    fn sample_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        match self {
            Solid::Cuboid { center, half } => {
                let areas = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total: f64 = areas.iter().sum();
                let mut pick = rng.random::<f64>() * total;
                let mut axis = 2;
                for (i, a) in areas.iter().enumerate() {
                    if pick < *a {
                        axis = i;
                        break;
                    }
                    pick -= a;
                }
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let mut p = Vec3::zeros();
                for k in 0..3 {
                    p[k] = if k == axis { sign * half[k] } else { (2.0 * rng.random::<f64>() - 1.0) * half[k] };
                }
                center + p
            }
            Solid::Cylinder { center, axis, radius, half_len } => {
                let (a, u, v) = axis_frame(*axis);
                let side = 2.0 * radius * 2.0 * half_len;
                let cap = radius * radius;
                let theta = 2.0 * PI * rng.random::<f64>();
                if rng.random::<f64>() * (side + 2.0 * cap) < side {
                    let h = (2.0 * rng.random::<f64>() - 1.0) * half_len;
                    center + a * h + (u * theta.cos() + v * theta.sin()) * *radius
                } else {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let r = radius * rng.random::<f64>().sqrt();
                    center + a * (s * half_len) + (u * theta.cos() + v * theta.sin()) * r
                }
            }
            Solid::Annulus { inner, outer, half_thickness } => {
                let t = 2.0 * half_thickness;
                let a_out = outer * t;
                let a_in = inner * t;
                let a_face = outer * outer - inner * inner;
                let theta = 2.0 * PI * rng.random::<f64>();
                let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
                let pick = rng.random::<f64>() * (a_out + a_in + a_face);
                if pick < a_out {
                    dir * *outer + Vec3::z() * ((2.0 * rng.random::<f64>() - 1.0) * half_thickness)
                } else if pick < a_out + a_in {
                    dir * *inner + Vec3::z() * ((2.0 * rng.random::<f64>() - 1.0) * half_thickness)
                } else {
                    let r = (inner * inner + rng.random::<f64>() * a_face).sqrt();
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    dir * r + Vec3::z() * (s * half_thickness)
                }
            }
            Solid::ArcTube { radius, tube, half_angle } => {
                let torus = 2.0 * half_angle * radius * 2.0 * PI * tube;
                let caps = 4.0 * PI * tube * tube;
                if rng.random::<f64>() * (torus + caps) < torus {
                    let phi = (2.0 * rng.random::<f64>() - 1.0) * half_angle;
                    // Tube angle with density proportional to the local radius.
                    let psi = loop {
                        let psi = 2.0 * PI * rng.random::<f64>();
                        if rng.random::<f64>() * (radius + tube) <= radius + tube * psi.cos() {
                            break psi;
                        }
                    };
                    arc_dir(phi) * (radius + tube * psi.cos()) + Vec3::z() * (tube * psi.sin())
                } else {
                    let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    let end = side * half_angle;
                    let e = arc_dir(end) * *radius;
                    let outward = Vec3::new(end.cos(), end.sin(), 0.0) * side;
                    let mut n = Vec3::new(
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                        rng.sample(StandardNormal),
                    );
                    let len = n.norm().max(1e-300);
                    n /= len;
                    let along = n.dot(&outward);
                    if along < 0.0 {
                        n -= outward * (2.0 * along);
                    }
                    e + n * *tube
                }
            }
            Solid::Union(_) | Solid::Difference(..) => unreachable!("composites are not leaves"),
        }
    }

    /// Area-weighted rejection sampling over the leaf surfaces, keeping only
    /// candidates on the composite surface.
    pub fn sample_surface<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        let mut leaves = Vec::new();
        self.leaves(&mut leaves);
        let areas: Vec<f64> = leaves.iter().map(|l| l.raw_area()).collect();
        let total: f64 = areas.iter().sum();
        let composite = leaves.len() > 1;
        let mut out = Vec::with_capacity(n);
        let max_attempts = 1000 * n.max(1);
        let mut attempts = 0;
        while out.len() < n && attempts < max_attempts {
            attempts += 1;
            let mut pick = rng.random::<f64>() * total;
            let mut idx = leaves.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if pick < *a {
                    idx = i;
                    break;
                }
                pick -= a;
            }
            let p = leaves[idx].sample_leaf(rng);
            if !composite || self.sdf(&p).abs() <= ON_SURFACE_TOL {
                out.push(p);
            }
        }
        out
    }
}

/// A deterministic surface point with its outward normal and the fraction of
/// the total surface area it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceProbe {
    pub point: Vec3,
    pub normal: Vec3,
    pub weight: f64,
}

/// Grid sizes per surface patch, fixed so that probes keep their identity
/// while the solid's dimensions change.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeLayout {
    grids: Vec<(usize, usize)>,
}

impl ProbeLayout {
    /// Number of probe slots the layout produces.
    pub fn len(&self) -> usize {
        self.grids.iter().map(|(a, b)| a * b).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Grid coordinate `i` of `n`: endpoints included unless `periodic`.
fn grid_coord(i: usize, n: usize, periodic: bool) -> f64 {
    if periodic {
        i as f64 / n as f64
    } else if n == 1 {
        0.5
    } else {
        i as f64 / (n - 1) as f64
    }
}

/// One patch of a primitive's surface: a map from the unit square, its two
/// extents (for grid aspect) and whether the first coordinate wraps.
struct Patch<'a> {
    extent: (f64, f64),
    periodic_u: bool,
    map: Box<dyn Fn(f64, f64) -> (Vec3, Vec3, f64) + 'a>,
}

impl Solid {
    fn signed_leaves<'a>(&'a self, sign: f64, out: &mut Vec<(&'a Solid, f64)>) {
        match self {
            Solid::Union(parts) => parts.iter().for_each(|s| s.signed_leaves(sign, out)),
            Solid::Difference(a, b) => {
                a.signed_leaves(sign, out);
                b.signed_leaves(-sign, out);
            }
            leaf => out.push((leaf, sign)),
        }
    }

    /// Patches of a primitive. Each map returns point, outward normal and the
    /// local area density relative to the patch average.
    fn patches(&self) -> Vec<Patch<'_>> {
        match self {
            Solid::Cuboid { center, half } => {
                let mut out = Vec::new();
                for a in 0..3 {
                    let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                    for s in [-1.0, 1.0] {
                        out.push(Patch {
                            extent: (2.0 * half[b], 2.0 * half[c]),
                            periodic_u: false,
                            map: Box::new(move |u, v| {
                                let mut p = Vec3::zeros();
                                p[a] = s * half[a];
                                p[b] = (2.0 * u - 1.0) * half[b];
                                p[c] = (2.0 * v - 1.0) * half[c];
                                let mut n = Vec3::zeros();
                                n[a] = s;
                                (center + p, n, 1.0)
                            }),
                        });
                    }
                }
                out
            }
            Solid::Cylinder { center, axis, radius, half_len } => {
                let (a, ua, va) = axis_frame(*axis);
                let ring = move |u: f64| ua * (2.0 * PI * u).cos() + va * (2.0 * PI * u).sin();
                let mut out = vec![Patch {
                    extent: (2.0 * PI * radius, 2.0 * half_len),
                    periodic_u: true,
                    map: Box::new(move |u, v| {
                        let d = ring(u);
                        (center + a * ((2.0 * v - 1.0) * half_len) + d * *radius, d, 1.0)
                    }),
                }];
                for s in [-1.0, 1.0] {
                    out.push(Patch {
                        extent: (PI * radius, *radius),
                        periodic_u: true,
                        map: Box::new(move |u, v| (center + a * (s * half_len) + ring(u) * (radius * v), a * s, 2.0 * v)),
                    });
                }
                out
            }
            Solid::Annulus { inner, outer, half_thickness } => {
                let ring = |u: f64| Vec3::new((2.0 * PI * u).cos(), (2.0 * PI * u).sin(), 0.0);
                let mut out = Vec::new();
                for (r, sign) in [(*outer, 1.0), (*inner, -1.0)] {
                    out.push(Patch {
                        extent: (2.0 * PI * r, 2.0 * half_thickness),
                        periodic_u: true,
                        map: Box::new(move |u, v| {
                            let d = ring(u);
                            (d * r + Vec3::z() * ((2.0 * v - 1.0) * half_thickness), d * sign, 1.0)
                        }),
                    });
                }
                let mid = 0.5 * (inner + outer);
                for s in [-1.0, 1.0] {
                    out.push(Patch {
                        extent: (2.0 * PI * mid, outer - inner),
                        periodic_u: true,
                        map: Box::new(move |u, v| {
                            let r = inner + v * (outer - inner);
                            (ring(u) * r + Vec3::z() * (s * half_thickness), Vec3::z() * s, r / mid)
                        }),
                    });
                }
                out
            }
            Solid::ArcTube { radius, tube, half_angle } => {
                let mut out = vec![Patch {
                    extent: (2.0 * half_angle * radius, 2.0 * PI * tube),
                    periodic_u: false,
                    map: Box::new(move |u, v| {
                        let phi = (2.0 * u - 1.0) * half_angle;
                        let psi = 2.0 * PI * v;
                        let n = arc_dir(phi) * psi.cos() + Vec3::z() * psi.sin();
                        (arc_dir(phi) * *radius + n * *tube, n, (radius + tube * psi.cos()) / radius)
                    }),
                }];
                for side in [-1.0, 1.0] {
                    let end = side * half_angle;
                    let e = arc_dir(end) * *radius;
                    let outward = Vec3::new(end.cos(), end.sin(), 0.0) * side;
                    let radial = arc_dir(end);
                    out.push(Patch {
                        extent: (PI * tube, 0.5 * PI * tube),
                        periodic_u: true,
                        map: Box::new(move |u, v| {
                            // v is the polar angle from the outward pole.
                            let theta = 0.5 * PI * v;
                            let n = outward * theta.cos()
                                + (radial * (2.0 * PI * u).cos() + Vec3::z() * (2.0 * PI * u).sin()) * theta.sin();
                            (e + n * *tube, n, theta.sin() * PI / 2.0)
                        }),
                    });
                }
                out
            }
            Solid::Union(_) | Solid::Difference(..) => unreachable!("composites are not leaves"),
        }
    }

    fn patch_area(&self, index: usize) -> f64 {
        let patch_areas: Vec<f64> = match self {
            Solid::Cuboid { half, .. } => {
                let f = [4.0 * half.y * half.z, 4.0 * half.x * half.z, 4.0 * half.x * half.y];
                vec![f[0], f[0], f[1], f[1], f[2], f[2]]
            }
            Solid::Cylinder { radius, half_len, .. } => {
                vec![4.0 * PI * radius * half_len, PI * radius * radius, PI * radius * radius]
            }
            Solid::Annulus { inner, outer, half_thickness } => {
                let face = PI * (outer * outer - inner * inner);
                vec![4.0 * PI * outer * half_thickness, 4.0 * PI * inner * half_thickness, face, face]
            }
            Solid::ArcTube { radius, tube, half_angle } => {
                let cap = 2.0 * PI * tube * tube;
                vec![2.0 * half_angle * radius * 2.0 * PI * tube, cap, cap]
            }
            Solid::Union(_) | Solid::Difference(..) => unreachable!("composites are not leaves"),
        };
        patch_areas[index]
    }

    /// Grid sizes giving about `total` probes spread in proportion to patch
    /// area, with near-square cells on every patch.
    pub fn probe_layout(&self, total: usize) -> ProbeLayout {
        let mut leaves = Vec::new();
        self.signed_leaves(1.0, &mut leaves);
        let mut items = Vec::new();
        for (leaf, _) in &leaves {
            for (i, patch) in leaf.patches().iter().enumerate() {
                items.push((leaf.patch_area(i), patch.extent));
            }
        }
        let sum: f64 = items.iter().map(|(a, _)| a).sum::<f64>().max(1e-300);
        let grids = items
            .iter()
            .map(|(area, (a, b))| {
                let m = (total as f64 * area / sum).round().max(4.0);
                let na = (m * a / b.max(1e-12)).sqrt().round().clamp(2.0, m / 2.0) as usize;
                let nb = ((m / na as f64).ceil() as usize).max(2);
                (na, nb)
            })
            .collect();
        ProbeLayout { grids }
    }

    /// Probes on the grids of `layout` (which must come from a solid with the
    /// same structure). Probes that fall off a composite's surface keep their
    /// slot with weight zero. Weights sum to one.
    pub fn probes(&self, layout: &ProbeLayout) -> Vec<SurfaceProbe> {
        let mut leaves = Vec::new();
        self.signed_leaves(1.0, &mut leaves);
        let composite = leaves.len() > 1;
        let mut out = Vec::with_capacity(layout.len());
        let mut grid = layout.grids.iter();
        for (leaf, sign) in leaves {
            for (i, patch) in leaf.patches().iter().enumerate() {
                let &(na, nb) = grid.next().expect("layout matches solid structure");
                let area = leaf.patch_area(i) / (na * nb) as f64;
                for iu in 0..na {
                    let u = grid_coord(iu, na, patch.periodic_u);
                    for iv in 0..nb {
                        let (point, normal, density) = (patch.map)(u, grid_coord(iv, nb, false));
                        let on_surface = !composite || self.sdf(&point).abs() <= 1e-9;
                        let weight = if on_surface { area * density } else { 0.0 };
                        out.push(SurfaceProbe { point, normal: normal * sign, weight });
                    }
                }
            }
        }
        let total: f64 = out.iter().map(|p| p.weight).sum();
        if total > 0.0 {
            out.iter_mut().for_each(|p| p.weight /= total);
        }
        out
    }

    /// About `total` on-surface probes with weights summing to one.
    pub fn surface_probes(&self, total: usize) -> Vec<SurfaceProbe> {
        let mut out = self.probes(&self.probe_layout(total));
        out.retain(|p| p.weight > 0.0);
        out
    }
}

/// Unit normal sample helper shared with the noise models.
pub(crate) fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Vec3 {
    let d = StandardNormal;
    Vec3::new(d.sample(rng), d.sample(rng), d.sample(rng)) * sigma
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_on_surface(s: &Solid) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts = s.sample_surface(2000, &mut rng);
        assert_eq!(pts.len(), 2000);
        for p in pts {
            assert!(s.sdf(&p).abs() <= 1e-9, "{:?} off surface by {}", p, s.sdf(&p));
        }
    }

    #[test]
    fn primitives_sample_on_surface() {
        check_on_surface(&Solid::Cuboid { center: Vec3::new(0.1, 0.0, 0.0), half: Vec3::new(0.2, 0.05, 0.1) });
        check_on_surface(&Solid::Cylinder { center: Vec3::zeros(), axis: 1, radius: 0.03, half_len: 0.02 });
        check_on_surface(&Solid::Annulus { inner: 0.02, outer: 0.04, half_thickness: 0.005 });
        check_on_surface(&Solid::ArcTube { radius: 0.05, tube: 0.008, half_angle: 0.8 });
    }

    #[test]
    fn composites_sample_on_surface() {
        let bar = Solid::Union(vec![
            Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.1, 0.01, 0.01) },
            Solid::Cuboid { center: Vec3::new(0.09, 0.02, 0.0), half: Vec3::new(0.01, 0.02, 0.01) },
        ]);
        check_on_surface(&bar);
        let slab = Solid::Difference(
            Box::new(Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.2, 0.01, 0.15) }),
            Box::new(Solid::Cuboid { center: Vec3::new(0.0, -0.01, 0.0), half: Vec3::new(0.17, 0.004, 0.12) }),
        );
        check_on_surface(&slab);
        assert!(slab.sdf(&Vec3::zeros()) < 0.0);
        assert!(slab.sdf(&Vec3::new(0.0, -0.009, 0.0)) > 0.0);
    }

    #[test]
    fn arc_tube_distance_matches_brute_force() {
        let s = Solid::ArcTube { radius: 0.05, tube: 0.008, half_angle: 0.9 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Dense polyline along the arc centerline; distance minus tube radius.
        let center: Vec<Vec3> = (0..=20000)
            .map(|i| arc_dir(-0.9 + 1.8 * i as f64 / 20000.0) * 0.05)
            .collect();
        for _ in 0..200 {
            let p = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.05..0.05));
            let brute = center.iter().map(|c| (p - c).norm()).fold(f64::INFINITY, f64::min) - 0.008;
            assert!((brute - s.sdf(&p)).abs() < 1e-5, "{} vs {}", brute, s.sdf(&p));
        }
    }

    #[test]
    fn probes_lie_on_surface_with_outward_normals() {
        let solids = [
            Solid::Cuboid { center: Vec3::new(0.1, 0.0, 0.0), half: Vec3::new(0.2, 0.05, 0.1) },
            Solid::Cylinder { center: Vec3::zeros(), axis: 1, radius: 0.03, half_len: 0.02 },
            Solid::Annulus { inner: 0.02, outer: 0.04, half_thickness: 0.005 },
            Solid::ArcTube { radius: 0.05, tube: 0.008, half_angle: 0.8 },
            Solid::Difference(
                Box::new(Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.2, 0.01, 0.15) }),
                Box::new(Solid::Cuboid { center: Vec3::new(0.0, -0.01, 0.0), half: Vec3::new(0.17, 0.004, 0.12) }),
            ),
        ];
        for s in &solids {
            let probes = s.surface_probes(300);
            assert!(probes.len() > 20);
            assert!((probes.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
            for p in &probes {
                assert!(s.sdf(&p.point).abs() <= 1e-9);
                assert!(s.sdf(&(p.point + p.normal * 1e-4)) >= -1e-12, "{s:?} {p:?}");
                assert!(s.sdf(&(p.point - p.normal * 1e-4)) <= 1e-12, "{s:?} {p:?}");
            }
        }
    }

    #[test]
    fn box_normal_points_outward() {
        let s = Solid::Cuboid { center: Vec3::zeros(), half: Vec3::new(0.1, 0.1, 0.1) };
        let n = s.normal(&Vec3::new(0.1, 0.0, 0.02));
        assert!((n - Vec3::x()).norm() < 1e-6);
    }
}
