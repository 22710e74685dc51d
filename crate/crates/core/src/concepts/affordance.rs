//! Affordance regions: surface subsets of an asset where a gripper can act.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::shape::{arc_angle, arc_dir};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// Pinch between the fingers.
    Grasp,
    /// Fingertip contact without closing.
    Push,
}

/// Parametric surface pieces in the asset's canonical frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegionSupport {
    /// Toroidal part of an arc tube, without its end caps.
    TubeArc { radius: f64, tube: f64, half_angle: f64 },
    /// Flat rectangle `center + s u + t v`, |s| <= half_u, |t| <= half_v.
    Patch { center: Vec3, u: Vec3, v: Vec3, half_u: f64, half_v: f64 },
    /// Flat annular sector at height `z`, angles measured from -y toward +x.
    AnnulusSector { inner: f64, outer: f64, z: f64, half_angle: f64 },
    /// Lateral band of a cylinder with axis `axis` through `center`, covering
    /// axial offsets in [lo, hi].
    CylinderBand { center: Vec3, axis: Vec3, radius: f64, lo: f64, hi: f64 },
}

fn perpendicular_basis(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.normalize();
    let helper = if a.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = a.cross(&helper).normalize();
    let v = a.cross(&u);
    (u, v)
}

impl RegionSupport {
    pub fn area(&self) -> f64 {
        match self {
            RegionSupport::TubeArc { radius, tube, half_angle } => 2.0 * half_angle * radius * 2.0 * PI * tube,
            RegionSupport::Patch { half_u, half_v, .. } => 4.0 * half_u * half_v,
            RegionSupport::AnnulusSector { inner, outer, half_angle, .. } => {
                half_angle * (outer * outer - inner * inner)
            }
            RegionSupport::CylinderBand { radius, lo, hi, .. } => 2.0 * PI * radius * (hi - lo),
        }
    }

    /// Point at normalized coordinates `(s, t)` in [0, 1]^2; area-uniform
    /// when `(s, t)` is uniform except for the tube, which uses exact
    /// inverse sampling only along the arc.
    fn at(&self, s: f64, t: f64) -> Vec3 {
        match self {
            RegionSupport::TubeArc { radius, tube, half_angle } => {
                let phi = (2.0 * s - 1.0) * half_angle;
                let psi = 2.0 * PI * t;
                arc_dir(phi) * (radius + tube * psi.cos()) + Vec3::z() * (tube * psi.sin())
            }
            RegionSupport::Patch { center, u, v, half_u, half_v } => {
                center + u * ((2.0 * s - 1.0) * half_u) + v * ((2.0 * t - 1.0) * half_v)
            }
            RegionSupport::AnnulusSector { inner, outer, z, half_angle } => {
                let r = (inner * inner + s * (outer * outer - inner * inner)).sqrt();
                let phi = (2.0 * t - 1.0) * half_angle;
                arc_dir(phi) * r + Vec3::z() * *z
            }
            RegionSupport::CylinderBand { center, axis, radius, lo, hi } => {
                let (u, v) = perpendicular_basis(axis);
                let a = axis.normalize();
                let theta = 2.0 * PI * t;
                center + a * (lo + s * (hi - lo)) + (u * theta.cos() + v * theta.sin()) * *radius
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        if let RegionSupport::TubeArc { radius, tube, .. } = self {
            loop {
                let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
                let psi = 2.0 * PI * t;
                if rng.random::<f64>() * (radius + tube) <= radius + tube * psi.cos() {
                    return self.at(s, t);
                }
            }
        }
        self.at(rng.random(), rng.random())
    }

    /// Regular grid with roughly `spacing` between neighbours along both
    /// parametric directions.
    pub fn grid(&self, spacing: f64) -> Vec<Vec3> {
        let (len_s, len_t) = match self {
            RegionSupport::TubeArc { radius, tube, half_angle } => {
                (2.0 * half_angle * (radius + tube), 2.0 * PI * tube)
            }
            RegionSupport::Patch { half_u, half_v, .. } => (2.0 * half_u, 2.0 * half_v),
            RegionSupport::AnnulusSector { inner, outer, half_angle, .. } => {
                (outer - inner, 2.0 * half_angle * outer)
            }
            RegionSupport::CylinderBand { radius, lo, hi, .. } => (hi - lo, 2.0 * PI * radius),
        };
        let ns = ((len_s / spacing).ceil() as usize).max(1);
        let nt = ((len_t / spacing).ceil() as usize).max(1);
        let mut out = Vec::with_capacity((ns + 1) * (nt + 1));
        let wraps = matches!(self, RegionSupport::TubeArc { .. } | RegionSupport::CylinderBand { .. });
        let nt_points = if wraps { nt } else { nt + 1 };
        for i in 0..=ns {
            let s = i as f64 / ns as f64;
            for j in 0..nt_points {
                let t = j as f64 / nt as f64;
                let s_eff = if let RegionSupport::AnnulusSector { inner, outer, .. } = self {
                    // Linear spacing in radius rather than in area.
                    let r = inner + s * (outer - inner);
                    (r * r - inner * inner) / (outer * outer - inner * inner)
                } else {
                    s
                };
                out.push(self.at(s_eff, t));
            }
        }
        out
    }

    /// Whether `p` lies within the parametric extent of this support (the
    /// caller is responsible for checking that it is on the surface).
    pub fn contains_extent(&self, p: &Vec3, tol: f64) -> bool {
        match self {
            RegionSupport::TubeArc { half_angle, .. } => arc_angle(p).abs() <= half_angle + tol,
            RegionSupport::Patch { center, u, v, half_u, half_v } => {
                let d = p - center;
                d.dot(u).abs() <= half_u + tol && d.dot(v).abs() <= half_v + tol
            }
            RegionSupport::AnnulusSector { half_angle, .. } => arc_angle(p).abs() <= half_angle + tol,
            RegionSupport::CylinderBand { center, axis, lo, hi, .. } => {
                let h = (p - center).dot(&axis.normalize());
                h >= lo - tol && h <= hi + tol
            }
        }
    }
}

/// A bound affordance region of an asset instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceRegion {
    pub region_id: String,
    pub kind: RegionKind,
    pub supports: Vec<RegionSupport>,
    /// Preferred gripper approach direction (direction of gripper motion).
    pub approach_axis: Vec3,
    /// Half-angle of the admissible approach cone, radians.
    pub approach_half_angle: f64,
}

impl AffordanceRegion {
    pub fn area(&self) -> f64 {
        self.supports.iter().map(|s| s.area()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec3> {
        let areas: Vec<f64> = self.supports.iter().map(|s| s.area()).collect();
        let total: f64 = areas.iter().sum();
        (0..n)
            .map(|_| {
                let mut pick = rng.random::<f64>() * total;
                for (s, a) in self.supports.iter().zip(&areas) {
                    if pick < *a {
                        return s.sample(rng);
                    }
                    pick -= a;
                }
                self.supports.last().expect("non-empty region").sample(rng)
            })
            .collect()
    }

    pub fn grid(&self, spacing: f64) -> Vec<Vec3> {
        self.supports.iter().flat_map(|s| s.grid(spacing)).collect()
    }

    /// Whether a gripper approaching along `dir` is inside the admissible cone.
    pub fn admits_approach(&self, dir: &Vec3) -> bool {
        let c = dir.normalize().dot(&self.approach_axis.normalize()).clamp(-1.0, 1.0);
        c.acos() <= self.approach_half_angle + 1e-12
    }
}
