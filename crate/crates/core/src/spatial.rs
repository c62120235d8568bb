//! Rigid-body geometry primitives shared by every planning and evaluation stage.
//!
//! Rotations are kept as orthonormal matrices; quaternions only appear at the
//! JSON boundary (`{translation: [x,y,z], rotation_quaternion: [w,x,y,z]}`).

use std::ops::Mul;

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

/// Rigid transform: `x_parent = rotation * x_child + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Rotation3<f64>) -> Self {
        Self {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    /// Build from a rotation matrix that is only approximately orthonormal.
    pub fn from_matrix(m: Mat3, translation: Vec3) -> Self {
        Self {
            rotation: Rotation3::from_matrix(&m),
            translation,
        }
    }

    pub fn from_quaternion(wxyz: [f64; 4], translation: Vec3) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            wxyz[0], wxyz[1], wxyz[2], wxyz[3],
        ));
        Self {
            rotation: q.to_rotation_matrix(),
            translation,
        }
    }

    /// `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = UnitQuaternion::from_rotation_matrix(&self.rotation);
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    /// Applies `b` first, then `self`.
    pub fn compose(&self, b: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * b.rotation,
            translation: self.rotation * b.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose {
            rotation: r_inv,
            translation: -(r_inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn x_axis(&self) -> Vec3 {
        self.rotation.matrix().column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.rotation.matrix().column(1).into_owned()
    }

    pub fn z_axis(&self) -> Vec3 {
        self.rotation.matrix().column(2).into_owned()
    }

    /// Re-orthonormalizes the rotation (Gram-Schmidt on the columns).
    pub fn renormalized(&self) -> Pose {
        let m = self.rotation.matrix();
        let x = m.column(0).normalize();
        let y0 = m.column(1).into_owned();
        let y = (y0 - x * x.dot(&y0)).normalize();
        let z = x.cross(&y);
        Pose {
            rotation: Rotation3::from_matrix_unchecked(Mat3::from_columns(&[x, y, z])),
            translation: self.translation,
        }
    }

    /// Deviation of the rotation from orthonormality, `‖RᵀR − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let m = self.rotation.matrix();
        (m.transpose() * m - Mat3::identity()).amax()
    }

    /// Geodesic interpolation: linear translation, rotation-vector rotation.
    pub fn interpolate(&self, other: &Pose, s: f64) -> Pose {
        let rel = self.rotation.inverse() * other.rotation;
        let omega = rotation_log(&rel);
        Pose {
            rotation: self.rotation * rotation_exp(&(omega * s)),
            translation: self.translation + (other.translation - self.translation) * s,
        }
    }

    /// Position and orientation distance `(‖Δp‖, ‖log(Ra⁻¹ Rb)‖)`.
    pub fn distance(&self, other: &Pose) -> (f64, f64) {
        let dp = (other.translation - self.translation).norm();
        let dr = rotation_log(&(self.rotation.inverse() * other.rotation)).norm();
        (dp, dr)
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    translation: [f64; 3],
    rotation_quaternion: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            translation: [self.translation.x, self.translation.y, self.translation.z],
            rotation_quaternion: self.quaternion_wxyz(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(deserializer)?;
        let n = r.rotation_quaternion.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 1e-12) {
            return Err(serde::de::Error::custom("zero rotation quaternion"));
        }
        Ok(Pose::from_quaternion(
            r.rotation_quaternion,
            Vec3::from(r.translation),
        ))
    }
}

pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation vector to rotation (Rodrigues).
pub fn rotation_exp(omega: &Vec3) -> Rotation3<f64> {
    Rotation3::from_scaled_axis(*omega)
}

/// Rotation to rotation vector with angle in `[0, π]`.
pub fn rotation_log(r: &Rotation3<f64>) -> Vec3 {
    let m = r.matrix();
    let cos = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = cos.acos();
    let w = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    if theta < 1e-6 {
        // first-order series, accurate to O(θ³)
        return w * (0.5 + theta * theta / 12.0);
    }
    if std::f64::consts::PI - theta < 1e-4 {
        // near π: axis from the symmetric part
        let b = (m + m.transpose()) * 0.5 - Mat3::identity() * cos;
        let mut axis = Vec3::zeros();
        let mut best = -1.0;
        for c in 0..3 {
            let col = b.column(c).into_owned();
            if col.norm() > best {
                best = col.norm();
                axis = col;
            }
        }
        let mut axis = axis.normalize();
        if axis.dot(&w) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    w * (theta / (2.0 * theta.sin()))
}

/// Intrinsic roll-pitch-yaw: rotate about x, then the new y, then the new z.
pub fn rotation_intrinsic_rpy(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), roll)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), pitch)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
}

pub fn axis_angle(axis: &Vec3, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle)
}

/// Rotation whose columns are `x`, `y = z × x`, `z`, with `x` projected onto
/// the plane normal to `z`.
pub fn frame_from_z_and_x(z: &Vec3, x_hint: &Vec3) -> Option<Rotation3<f64>> {
    let z = z.try_normalize(1e-12)?;
    let x = (x_hint - z * z.dot(x_hint)).try_normalize(1e-12)?;
    let y = z.cross(&x);
    Some(Rotation3::from_matrix_unchecked(Mat3::from_columns(&[x, y, z])))
}

/// Linear and angular velocity. The linear part is the velocity of the
/// frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(linear: Vec3, angular: Vec3) -> Self {
        Self { linear, angular }
    }

    /// Integrates a constant world-frame twist over `dt`.
    pub fn integrate(&self, pose: &Pose, dt: f64) -> Pose {
        Pose {
            rotation: rotation_exp(&(self.angular * dt)) * pose.rotation,
            translation: pose.translation + self.linear * dt,
        }
    }
}

/// Force and torque with the point the torque is taken about.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub reference_point: Vec3,
}

impl Wrench {
    pub fn zero_at(point: Vec3) -> Self {
        Self {
            force: Vec3::zeros(),
            torque: Vec3::zeros(),
            reference_point: point,
        }
    }

    pub fn new(force: Vec3, torque: Vec3, reference_point: Vec3) -> Self {
        Self {
            force,
            torque,
            reference_point,
        }
    }

    /// Same wrench expressed about `new_point`.
    pub fn transform_to(&self, new_point: &Vec3) -> Wrench {
        Wrench {
            force: self.force,
            torque: self.torque + (self.reference_point - new_point).cross(&self.force),
            reference_point: *new_point,
        }
    }

    /// Re-expresses force, torque and reference point in another frame.
    /// `frame` maps the current coordinates into the new ones.
    pub fn rotate_into(&self, frame: &Pose) -> Wrench {
        Wrench {
            force: frame.transform_vector(&self.force),
            torque: frame.transform_vector(&self.torque),
            reference_point: frame.transform_point(&self.reference_point),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.force == Vec3::zeros() && self.torque == Vec3::zeros()
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        ]
    }
}

pub fn transform_wrench(w: &Wrench, new_point: &Vec3) -> Wrench {
    w.transform_to(new_point)
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub centroid: Vec3,
}

impl Plane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.centroid))
    }

    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.signed_distance(p)
    }
}

/// Least-squares plane through `points`. The normal points to the side of
/// `up_hint` (global +z when the hint is orthogonal to the normal).
pub fn best_fit_plane(points: &[Vec3], up_hint: Option<&Vec3>) -> Result<Plane, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateGeometry(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (lmin, lmid, lmax) = (
        eig.eigenvalues[order[0]],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if lmax <= 0.0 || lmid <= 1e-12 * lmax.max(1e-300) {
        return Err(GeometryError::DegenerateGeometry(
            "points are coincident or collinear".into(),
        ));
    }
    let _ = lmin;
    let mut normal = eig.eigenvectors.column(order[0]).normalize();
    let up = Vec3::z();
    let s = up_hint.map(|h| normal.dot(h)).unwrap_or(0.0);
    let s = if s.abs() > 1e-12 { s } else { normal.dot(&up) };
    if s < 0.0 {
        normal = -normal;
    }
    Ok(Plane { normal, centroid })
}
