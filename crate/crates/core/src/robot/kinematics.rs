use nalgebra::{Matrix6, Rotation3, Vector6};
use thiserror::Error;

use super::{
    JointState, LimbJoints, RobotModel, JOINTS_PER_LIMB, JOINT_AXES, NUM_LIMBS,
};
use crate::spatial::{rotation_log, Pose, Twist, Vec3};

fn axis_rotation(axis: usize, angle: f64) -> Rotation3<f64> {
    let (s, c) = angle.sin_cos();
    let m = match axis {
        0 => nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        1 => nalgebra::Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        _ => nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    };
    Rotation3::from_matrix_unchecked(m)
}

/// Gripper frame relative to the last body: z points back along the gripper.
fn tool_rotation() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
        0.0, 0.0, -1.0, //
        0.0, 1.0, 0.0, //
        1.0, 0.0, 0.0,
    ))
}

/// Body frames of one limb, expressed in the base frame.
#[derive(Debug, Clone, Copy)]
pub struct LimbFrames {
    /// Frame of body `k` (origin at joint `k`, rotated by `q[k]`).
    pub bodies: [Pose; JOINTS_PER_LIMB],
    pub end_effector: Pose,
}

impl LimbFrames {
    pub fn joint_axis(&self, k: usize) -> Vec3 {
        self.bodies[k].rotation.matrix().column(JOINT_AXES[k]).into_owned()
    }

    pub fn joint_origin(&self, k: usize) -> Vec3 {
        self.bodies[k].translation
    }
}

pub fn limb_frames(model: &RobotModel, limb: usize, q: &LimbJoints) -> LimbFrames {
    let spec = &model.limbs[limb];
    let mut frame = model.limb_mount_poses[limb];
    let mut bodies = [Pose::identity(); JOINTS_PER_LIMB];
    for k in 0..JOINTS_PER_LIMB {
        let offset = spec.joint_offset(k);
        frame = Pose::new(
            frame.rotation * axis_rotation(JOINT_AXES[k], q[k]),
            frame.translation + frame.rotation * offset,
        );
        bodies[k] = frame;
    }
    let end_effector = Pose::new(
        frame.rotation * tool_rotation(),
        frame.translation + frame.rotation * Vec3::new(spec.link_lengths[2], 0.0, 0.0),
    );
    LimbFrames {
        bodies,
        end_effector,
    }
}

/// End-effector (gripper) pose in the base frame.
pub fn forward_kinematics(model: &RobotModel, limb: usize, q: &LimbJoints) -> Pose {
    limb_frames(model, limb, q).end_effector
}

/// Geometric Jacobian in the base frame; rows 0..3 map to the gripper
/// origin's linear velocity, rows 3..6 to angular velocity.
pub fn jacobian(model: &RobotModel, limb: usize, q: &LimbJoints) -> Matrix6<f64> {
    jacobian_from_frames(&limb_frames(model, limb, q))
}

fn jacobian_from_frames(frames: &LimbFrames) -> Matrix6<f64> {
    let p = frames.end_effector.translation;
    let mut j = Matrix6::zeros();
    for k in 0..JOINTS_PER_LIMB {
        let z = frames.joint_axis(k);
        let lin = z.cross(&(p - frames.joint_origin(k)));
        j.fixed_view_mut::<3, 1>(0, k).copy_from(&lin);
        j.fixed_view_mut::<3, 1>(3, k).copy_from(&z);
    }
    j
}

/// `√det(J Jᵀ)`, which for a square Jacobian is `|det J|`.
pub fn manipulability(model: &RobotModel, limb: usize, q: &LimbJoints) -> f64 {
    jacobian(model, limb, q).determinant().abs()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IkError {
    #[error("target unreachable for limb {limb} (residual {residual:.3e})")]
    Unreachable { limb: usize, residual: f64 },
    #[error("solution for limb {limb} is near a singularity (manipulability {manipulability:.3e})")]
    NearSingular { limb: usize, manipulability: f64 },
    #[error("solution for limb {limb} violates the limits of joint {joint}")]
    JointLimit { limb: usize, joint: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkOptions {
    pub max_iterations: usize,
    /// Early-exit tolerance (m, rad).
    pub tolerance: f64,
    /// Largest residual accepted when the iteration budget runs out.
    pub acceptance: f64,
    pub singularity_threshold: f64,
    /// Largest joint step per iteration (rad).
    pub max_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-11,
            acceptance: 1e-6,
            singularity_threshold: 1e-3,
            max_step: 0.4,
        }
    }
}

fn pose_error(current: &Pose, target: &Pose) -> Vector6<f64> {
    let dp = target.translation - current.translation;
    let dr = rotation_log(&(target.rotation * current.rotation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}

/// Damped least-squares refinement from `seed`. Damping shrinks with the
/// residual (Levenberg–Marquardt) and grows near singular configurations.
pub fn inverse_kinematics(
    model: &RobotModel,
    limb: usize,
    target: &Pose,
    seed: &LimbJoints,
    opts: &IkOptions,
) -> Result<LimbJoints, IkError> {
    let spec = &model.limbs[limb];
    let mount = model.limb_mount_poses[limb].translation;
    let distance = (target.translation - mount).norm();
    if distance > spec.reach() + 1e-12 {
        return Err(IkError::Unreachable {
            limb,
            residual: distance - spec.reach(),
        });
    }

    let mut q = *seed;
    let mut frames = limb_frames(model, limb, &q);
    let mut err = pose_error(&frames.end_effector, target);
    let mut err_norm = err.norm();
    let mut mu = 1e-2;
    for _ in 0..opts.max_iterations {
        if err_norm < opts.tolerance {
            break;
        }
        let j = jacobian_from_frames(&frames);
        let w = j.determinant().abs();
        let w0 = 10.0 * opts.singularity_threshold;
        let singular_damping = if w < w0 { 1e-3 * (1.0 - w / w0).powi(2) } else { 0.0 };
        let jt = j.transpose();
        let jtj = jt * j;
        let g = jt * err;
        let mut accepted = false;
        for _ in 0..8 {
            let lambda = mu * err_norm * err_norm + singular_damping * err_norm.min(1.0);
            let a = jtj + Matrix6::identity() * lambda;
            let Some(mut dq) = a.cholesky().map(|c| c.solve(&g)) else {
                mu *= 10.0;
                continue;
            };
            let step = dq.amax();
            if step > opts.max_step {
                dq *= opts.max_step / step;
            }
            let q_new = q + dq;
            let f_new = limb_frames(model, limb, &q_new);
            let e_new = pose_error(&f_new.end_effector, target);
            let n_new = e_new.norm();
            if n_new < err_norm {
                q = q_new;
                frames = f_new;
                err = e_new;
                err_norm = n_new;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                break;
            }
            mu = (mu * 10.0).max(1e-6);
        }
        if !accepted {
            break;
        }
    }
    let pos_err = err.fixed_rows::<3>(0).norm();
    let rot_err = err.fixed_rows::<3>(3).norm();
    if pos_err > opts.acceptance || rot_err > opts.acceptance {
        return Err(IkError::Unreachable {
            limb,
            residual: err_norm,
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    for k in 0..JOINTS_PER_LIMB {
        let [lo, hi] = spec.joint_angle_limits[k];
        while q[k] > hi && q[k] - two_pi >= lo {
            q[k] -= two_pi;
        }
        while q[k] < lo && q[k] + two_pi <= hi {
            q[k] += two_pi;
        }
        if q[k] < lo || q[k] > hi {
            return Err(IkError::JointLimit { limb, joint: k });
        }
    }
    let m = jacobian_from_frames(&frames).determinant().abs();
    if m < opts.singularity_threshold {
        return Err(IkError::NearSingular {
            limb,
            manipulability: m,
        });
    }
    Ok(q)
}

/// World-frame kinematic state of a single rigid body.
#[derive(Debug, Clone, Copy)]
pub struct BodyState {
    pub pose: Pose,
    /// Joint origin for limb bodies; base origin for the base.
    pub origin_velocity: Vec3,
    pub angular_velocity: Vec3,
    pub com: Vec3,
    pub com_velocity: Vec3,
    pub mass: f64,
    /// World-frame rotational inertia about the COM.
    pub inertia: nalgebra::Matrix3<f64>,
}

/// Base plus every limb body, world frame.
#[derive(Debug, Clone)]
pub struct TreeState {
    pub base: BodyState,
    pub limbs: [[BodyState; JOINTS_PER_LIMB]; NUM_LIMBS],
}

impl TreeState {
    pub fn bodies(&self) -> impl Iterator<Item = &BodyState> {
        std::iter::once(&self.base).chain(self.limbs.iter().flatten())
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies().map(|b| b.mass).sum()
    }

    pub fn com(&self) -> Vec3 {
        self.bodies().fold(Vec3::zeros(), |a, b| a + b.com * b.mass) / self.total_mass()
    }

    pub fn com_velocity(&self) -> Vec3 {
        self.bodies().fold(Vec3::zeros(), |a, b| a + b.com_velocity * b.mass) / self.total_mass()
    }

    /// Total angular momentum about `point`, which is taken to be at rest.
    pub fn angular_momentum_about(&self, point: &Vec3) -> Vec3 {
        self.bodies().fold(Vec3::zeros(), |a, b| {
            a + b.inertia * b.angular_velocity + (b.com - point).cross(&(b.com_velocity * b.mass))
        })
    }

    /// Angular momentum about the COM (moving with the COM).
    pub fn centroidal_angular_momentum(&self) -> Vec3 {
        let c = self.com();
        let vc = self.com_velocity();
        self.bodies().fold(Vec3::zeros(), |a, b| {
            a + b.inertia * b.angular_velocity
                + (b.com - c).cross(&((b.com_velocity - vc) * b.mass))
        })
    }
}

fn body_state(
    pose: Pose,
    origin_velocity: Vec3,
    angular_velocity: Vec3,
    inertial: &super::BodyInertial,
) -> BodyState {
    let r = pose.rotation.matrix();
    let com_offset = r * inertial.com;
    BodyState {
        pose,
        origin_velocity,
        angular_velocity,
        com: pose.translation + com_offset,
        com_velocity: origin_velocity + angular_velocity.cross(&com_offset),
        mass: inertial.mass,
        inertia: r * inertial.inertia * r.transpose(),
    }
}

/// Forward velocity pass over the whole tree.
pub fn tree_state(
    model: &RobotModel,
    base_pose: &Pose,
    base_twist: &Twist,
    q: &super::JointVector,
    dq: &super::JointVector,
) -> TreeState {
    let base = body_state(*base_pose, base_twist.linear, base_twist.angular, &model.base_inertial());
    let limbs = std::array::from_fn(|limb| {
        let ql: LimbJoints = q.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned();
        let frames = limb_frames(model, limb, &ql);
        let mut parent_origin = base_pose.translation;
        let mut parent_v = base_twist.linear;
        let mut omega = base_twist.angular;
        std::array::from_fn(|k| {
            let pose = base_pose.compose(&frames.bodies[k]);
            let origin = pose.translation;
            let v = parent_v + omega.cross(&(origin - parent_origin));
            let axis = pose.rotation.matrix().column(JOINT_AXES[k]).into_owned();
            omega += axis * dq[limb * JOINTS_PER_LIMB + k];
            parent_origin = origin;
            parent_v = v;
            body_state(pose, v, omega, &model.limbs[limb].body_inertial(k))
        })
    });
    TreeState { base, limbs }
}

/// Whole-robot COM, COM velocity and total mass (world frame).
pub fn com_state(
    model: &RobotModel,
    base_pose: &Pose,
    base_twist: &Twist,
    joints: &JointState,
) -> (Vec3, Vec3, f64) {
    let s = tree_state(model, base_pose, base_twist, &joints.q, &joints.dq);
    (s.com(), s.com_velocity(), s.total_mass())
}
