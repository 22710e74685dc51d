//! Rigid-body math shared by every other module.
//!
//! Rotations are plain 3x3 orthonormal matrices and transforms are
//! `(rotation, translation)` pairs acting as `p -> R p + t`. Euler triples
//! follow the fixed-axis roll-pitch-yaw convention: rotate about x by `a`,
//! then about the fixed y by `b`, then about the fixed z by `c`, which gives
//! the matrix `Rz(c) * Ry(b) * Rx(a)`.

use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Point or direction in meters (or unitless for directions).
pub type Vec3 = Vector3<f64>;

/// Orthonormality tolerance used by the constructors below.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("candidate rotation list is empty")]
    EmptyCandidates,
    #[error("matrix is not a rotation (orthonormality error {0:.3e})")]
    NotRotation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Proper rotation matrix (orthonormal columns, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Default for Rotation3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Accepts a matrix that is already a rotation up to [`ROTATION_TOL`];
    /// small drift beyond that is projected back with a polar decomposition,
    /// anything far from SO(3) is rejected.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeomError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite("rotation matrix"));
        }
        let err = orthonormality_error(&m);
        if err <= ROTATION_TOL && m.determinant() > 0.0 {
            return Ok(Self(m));
        }
        if err > 1e-3 || m.determinant() <= 0.0 {
            return Err(GeomError::NotRotation(err));
        }
        Ok(Self::orthonormalized(m))
    }

    /// Nearest rotation in the Frobenius sense (polar factor of `m`).
    pub fn orthonormalized(m: Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * v_t;
        }
        Self(r)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn about_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(b: f64) -> Self {
        let (s, c) = b.sin_cos();
        Self(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(c: f64) -> Self {
        let (s, co) = c.sin_cos();
        Self(Matrix3::new(co, -s, 0.0, s, co, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rotation by `angle` about a (not necessarily unit) axis, Rodrigues form.
    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let k = axis / n;
        let (s, c) = angle.sin_cos();
        let kx = skew(&k);
        Self(Matrix3::identity() + kx * s + kx * kx * (1.0 - c))
    }

    /// Exponential map of a rotation vector.
    pub fn exp(omega: &Vec3) -> Self {
        let angle = omega.norm();
        if angle < 1e-300 {
            return Self::identity();
        }
        Self::about_axis(omega, angle)
    }

    /// Rotation vector (inverse of [`Rotation3::exp`]) with angle in [0, pi].
    pub fn log(&self) -> Vec3 {
        let angle = self.angle();
        let m = &self.0;
        let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
        if angle < 1e-12 {
            return w * 0.5;
        }
        if std::f64::consts::PI - angle < 1e-6 {
            // Near a half-turn: recover the axis from the symmetric part.
            let b = (m + Matrix3::identity()) * 0.5;
            let mut best = 0;
            for i in 1..3 {
                if b[(i, i)] > b[(best, best)] {
                    best = i;
                }
            }
            let mut axis: Vec3 = b.column(best).into_owned();
            axis /= axis.norm();
            if axis.dot(&w) < 0.0 {
                axis = -axis;
            }
            return axis * angle;
        }
        w * (angle / (2.0 * angle.sin()))
    }

    /// Rotation angle in [0, pi].
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        c.acos()
    }

    /// Geodesic distance on SO(3): the angle of `self^T other`.
    pub fn geodesic_angle(&self, other: &Rotation3) -> f64 {
        (self.inverse() * *other).angle()
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn column(&self, i: usize) -> Vec3 {
        self.0.column(i).into_owned()
    }

    /// Recovers (roll, pitch, yaw) such that `rot_rpy(roll, pitch, yaw) == self`.
    pub fn to_rpy(&self) -> [f64; 3] {
        let m = &self.0;
        let sp = (-m[(2, 0)]).clamp(-1.0, 1.0);
        let pitch = sp.asin();
        if sp.abs() > 1.0 - 1e-12 {
            // Gimbal lock: roll and yaw share one degree of freedom; put it all in yaw.
            let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
            return [0.0, pitch, yaw];
        }
        let roll = m[(2, 1)].atan2(m[(2, 2)]);
        let yaw = m[(1, 0)].atan2(m[(0, 0)]);
        [roll, pitch, yaw]
    }
}

impl Mul for Rotation3 {
    type Output = Rotation3;
    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation3 {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

fn skew(k: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0)
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// Fixed-axis roll-pitch-yaw rotation, `Rz(c) * Ry(b) * Rx(a)`.
pub fn rot_rpy(a: f64, b: f64, c: f64) -> Rotation3 {
    Rotation3::about_z(c) * Rotation3::about_y(b) * Rotation3::about_x(a)
}

/// Homogeneous rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Transform3 {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl Transform3 {
    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_rotation(rotation: Rotation3) -> Self {
        Self { rotation, translation: Vec3::zeros() }
    }

    pub fn from_translation_rpy(translation: Vec3, rpy: [f64; 3]) -> Self {
        Self { rotation: rot_rpy(rpy[0], rpy[1], rpy[2]), translation }
    }

    /// `(A * B)(p) == A(B(p))`.
    pub fn compose(&self, other: &Transform3) -> Transform3 {
        Transform3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.apply(&other.translation) + self.translation,
        }
    }

    pub fn invert(&self) -> Transform3 {
        let r_inv = self.rotation.inverse();
        Transform3 { rotation: r_inv, translation: -(r_inv.apply(&self.translation)) }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + self.translation
    }

    pub fn apply_dir(&self, d: &Vec3) -> Vec3 {
        self.rotation.apply(d)
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn rpy(&self) -> [f64; 3] {
        self.rotation.to_rpy()
    }

    /// Rotation angle (radians) and translation distance between two poses.
    pub fn distance_to(&self, other: &Transform3) -> (f64, f64) {
        (
            self.rotation.geodesic_angle(&other.rotation),
            (self.translation - other.translation).norm(),
        )
    }
}

impl Mul for Transform3 {
    type Output = Transform3;
    fn mul(self, rhs: Transform3) -> Transform3 {
        self.compose(&rhs)
    }
}

/// Pure translation.
pub fn translate(x: f64, y: f64, z: f64) -> Transform3 {
    Transform3 { rotation: Rotation3::identity(), translation: Vec3::new(x, y, z) }
}

pub fn compose(a: &Transform3, b: &Transform3) -> Transform3 {
    a.compose(b)
}

pub fn invert(a: &Transform3) -> Transform3 {
    a.invert()
}

pub fn apply_point(a: &Transform3, p: &Vec3) -> Vec3 {
    a.apply_point(p)
}

pub fn apply_dir(a: &Transform3, d: &Vec3) -> Vec3 {
    a.apply_dir(d)
}

/// Index of the candidate closest (geodesically) to `reference`; ties keep the
/// lowest index.
pub fn minimal_rotation_index(
    candidates: &[Rotation3],
    reference: &Rotation3,
) -> Result<usize, GeomError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let angle = reference.geodesic_angle(c);
        match best {
            Some((_, a)) if angle >= a => {}
            _ => best = Some((i, angle)),
        }
    }
    best.map(|(i, _)| i).ok_or(GeomError::EmptyCandidates)
}

pub fn minimal_rotation(
    candidates: &[Rotation3],
    reference: &Rotation3,
) -> Result<Rotation3, GeomError> {
    minimal_rotation_index(candidates, reference).map(|i| candidates[i])
}

/// Serializable pose record: translation plus fixed-axis roll-pitch-yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub translation: [f64; 3],
    pub rpy: [f64; 3],
}

impl From<&Transform3> for PoseRecord {
    fn from(t: &Transform3) -> Self {
        PoseRecord { translation: t.translation.into(), rpy: t.rpy() }
    }
}

impl From<&PoseRecord> for Transform3 {
    fn from(r: &PoseRecord) -> Self {
        Transform3::from_translation_rpy(Vec3::from(r.translation), r.rpy)
    }
}

impl Serialize for Transform3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Transform3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = PoseRecord::deserialize(d)?;
        Ok(Transform3::from(&rec))
    }
}

/// Ordered point set with optional per-point part labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, labels: None }
    }

    pub fn labeled(points: Vec<Vec3>, labels: Vec<u32>) -> Self {
        assert_eq!(points.len(), labels.len(), "labels must cover every point");
        Self { points, labels: Some(labels) }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
        Some(sum / self.points.len() as f64)
    }

    /// Points carrying `label`, unlabeled.
    pub fn with_label(&self, label: u32) -> PointCloud {
        match &self.labels {
            None => PointCloud::default(),
            Some(labels) => PointCloud::new(
                self.points
                    .iter()
                    .zip(labels)
                    .filter(|(_, l)| **l == label)
                    .map(|(p, _)| *p)
                    .collect(),
            ),
        }
    }

    pub fn transformed(&self, t: &Transform3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply_point(p)).collect(),
            labels: self.labels.clone(),
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.labels, &other.labels) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            (None, None) => {}
            _ => panic!("cannot merge labeled and unlabeled clouds"),
        }
        self.points.extend_from_slice(&other.points);
    }

    /// Every `stride`-th point, used for cheap coarse evaluations.
    pub fn subsample(&self, max_points: usize) -> PointCloud {
        if self.points.len() <= max_points || max_points == 0 {
            return self.clone();
        }
        let stride = self.points.len() as f64 / max_points as f64;
        let idx: Vec<usize> = (0..max_points).map(|i| (i as f64 * stride) as usize).collect();
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn assert_mat_eq(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) {
        assert!((a - b).abs().max() <= tol, "{a} != {b}");
    }

    #[test]
    fn rpy_zero_is_identity() {
        assert_eq!(*rot_rpy(0.0, 0.0, 0.0).matrix(), Matrix3::identity());
    }

    #[test]
    fn rpy_half_turn_about_x() {
        let r = rot_rpy(PI, 0.0, 0.0);
        assert_mat_eq(r.matrix(), &Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)), 1e-15);
    }

    // Hand-rolled quaternion product, kept independent of the matrix path.
    fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
        let [w1, x1, y1, z1] = a;
        let [w2, x2, y2, z2] = b;
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    }

    fn quat_rotate(q: [f64; 4], v: [f64; 3]) -> [f64; 3] {
        let p = [0.0, v[0], v[1], v[2]];
        let qc = [q[0], -q[1], -q[2], -q[3]];
        let r = quat_mul(quat_mul(q, p), qc);
        [r[1], r[2], r[3]]
    }

    #[test]
    fn rpy_matches_quaternion_composition() {
        let h = FRAC_PI_4; // half of pi/2
        let qx = [h.cos(), h.sin(), 0.0, 0.0];
        let qz = [h.cos(), 0.0, 0.0, h.sin()];
        let q = quat_mul(qz, qx);
        let r = rot_rpy(FRAC_PI_2, 0.0, FRAC_PI_2);
        for (i, e) in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].iter().enumerate() {
            let expected = quat_rotate(q, *e);
            let got = r.column(i);
            for k in 0..3 {
                assert_relative_eq!(got[k], expected[k], epsilon = 1e-12);
            }
        }
        // Frozen from the quaternion oracle: x -> y, y -> z, z -> x.
        assert_relative_eq!(r.apply(&Vec3::x()), Vec3::y(), epsilon = 1e-12);
        assert_relative_eq!(r.apply(&Vec3::y()), Vec3::z(), epsilon = 1e-12);
        assert_relative_eq!(r.apply(&Vec3::z()), Vec3::x(), epsilon = 1e-12);
    }

    #[test]
    fn translations() {
        let t = translate(0.0, -0.05, 0.0);
        assert_eq!(t.apply_point(&Vec3::zeros()), Vec3::new(0.0, -0.05, 0.0));
        let c = compose(&translate(1.0, 0.0, 0.0), &translate(0.0, 1.0, 0.0));
        assert_eq!(c.translation, Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(translate(0.0, 0.0, 0.0), Transform3::identity());
        assert_eq!(invert(&translate(1.0, 2.0, 3.0)).translation, Vec3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn inverse_of_rotation_is_transpose() {
        let r = Transform3::from_rotation(rot_rpy(0.3, 0.7, -1.1));
        assert_mat_eq(
            invert(&r).rotation.matrix(),
            &r.rotation.matrix().transpose(),
            1e-15,
        );
        assert_eq!(invert(&Transform3::identity()), Transform3::identity());
    }

    #[test]
    fn pure_translation_fixes_directions() {
        let t = translate(5.0, 5.0, 5.0);
        let d = Vec3::new(0.3, -0.2, 0.9);
        assert_eq!(apply_dir(&t, &d), d);
        assert_eq!(apply_point(&translate(1.0, 0.0, 0.0), &Vec3::zeros()), Vec3::x());
    }

    #[test]
    fn minimal_rotation_cases() {
        let id = Rotation3::identity();
        let rz_pi = Rotation3::about_z(PI);
        assert_eq!(minimal_rotation(&[id, rz_pi], &id).unwrap(), id);
        assert_eq!(minimal_rotation(&[rz_pi], &id).unwrap(), rz_pi);
        assert_eq!(minimal_rotation(&[], &id), Err(GeomError::EmptyCandidates));
        // Ties resolve to the lowest index.
        let a = Rotation3::about_z(0.5);
        let b = Rotation3::about_z(-0.5);
        assert_eq!(minimal_rotation_index(&[a, b], &id).unwrap(), 0);
    }

    #[test]
    fn minimal_rotation_over_knob_orbit() {
        // Oracle: wrapped angular distances |0.3 - 2 pi k / 8|.
        let orbit: Vec<Rotation3> =
            (0..8).map(|k| Rotation3::about_z(2.0 * PI * k as f64 / 8.0)).collect();
        let reference = Rotation3::about_z(0.3);
        let expected = (0..8)
            .map(|k| {
                let d = (0.3 - 2.0 * PI * k as f64 / 8.0).rem_euclid(2.0 * PI);
                (k, d.min(2.0 * PI - d))
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(expected, 0);
        assert_eq!(minimal_rotation_index(&orbit, &reference).unwrap(), expected);
        let r2 = Rotation3::about_z(0.5);
        assert_eq!(minimal_rotation_index(&orbit, &r2).unwrap(), 1);
        assert_mat_eq(
            minimal_rotation(&orbit, &r2).unwrap().matrix(),
            Rotation3::about_z(FRAC_PI_4).matrix(),
            1e-15,
        );
    }

    #[test]
    fn rpy_round_trip() {
        for &(a, b, c) in &[(0.3, 0.7, -1.1), (-2.0, 1.2, 3.0), (0.0, FRAC_PI_2, 0.4)] {
            let r = rot_rpy(a, b, c);
            let [a2, b2, c2] = r.to_rpy();
            assert_mat_eq(rot_rpy(a2, b2, c2).matrix(), r.matrix(), 1e-12);
        }
    }

    #[test]
    fn log_exp_round_trip() {
        for w in [Vec3::new(0.1, -0.4, 0.2), Vec3::new(0.0, 0.0, 3.1), Vec3::new(1e-9, 0.0, 0.0)] {
            let r = Rotation3::exp(&w);
            assert_relative_eq!(r.log(), w, epsilon = 1e-9);
        }
    }

    #[test]
    fn drifted_matrix_is_reorthonormalized() {
        let mut m = *rot_rpy(0.2, 0.1, -0.3).matrix();
        m[(0, 0)] += 1e-6;
        let r = Rotation3::from_matrix(m).unwrap();
        assert!(orthonormality_error(r.matrix()) < 1e-12);
        assert!(Rotation3::from_matrix(Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
    }

    #[test]
    fn subsample_and_labels() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::labeled(pts, (0..10).map(|i| i % 2).collect());
        assert_eq!(cloud.with_label(1).len(), 5);
        assert_eq!(cloud.subsample(5).len(), 5);
        assert_eq!(cloud.centroid().unwrap(), Vec3::new(4.5, 0.0, 0.0));
    }
}
