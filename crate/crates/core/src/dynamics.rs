use serde::{Deserialize, Serialize};

use crate::robot::limb_frames;
use crate::robot::{BodyInertial, JointState, JointVector, LimbJoints, ModelError, RobotModel, JOINTS_PER_LIMB, JOINT_AXES, NUM_JOINTS, NUM_LIMBS};
use crate::spatial::{Mat3, Pose, Twist, Vec3, Wrench};

/// Mass properties of the base and all 24 links.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaModel {
    pub model: RobotModel,
    pub base: BodyInertial,
    pub links: [[BodyInertial; JOINTS_PER_LIMB]; NUM_LIMBS],
}

fn symmetric_positive_definite(m: &Mat3) -> bool {
    (m - m.transpose()).abs().max() <= 1e-12 * m.abs().max().max(1.0) && m.cholesky().is_some()
}

impl InertiaModel {
    pub fn from_model(model: &RobotModel) -> Result<Self, ModelError> {
        let out = Self {
            model: model.clone(),
            base: model.base_inertial(),
            links: std::array::from_fn(|l| std::array::from_fn(|k| model.limbs[l].body_inertial(k))),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for b in std::iter::once(&self.base).chain(self.links.iter().flatten()) {
            if !(b.mass > 0.0) || !symmetric_positive_definite(&b.inertia) {
                return Err(ModelError::Invalid("body masses must be positive and inertias SPD".into()));
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.base.mass + self.links.iter().flatten().map(|b| b.mass).sum::<f64>()
    }
}

/// Full second-order state: base motion is prescribed, joints are tracked exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicState {
    pub base_pose: Pose,
    pub base_twist: Twist,
    /// Acceleration of the base origin (world).
    pub base_linear_acceleration: Vec3,
    pub base_angular_acceleration: Vec3,
    pub joints: JointState,
}

impl DynamicState {
    pub fn at_rest(base_pose: Pose, q: JointVector) -> Self {
        Self {
            base_pose,
            base_twist: Twist::zero(),
            base_linear_acceleration: Vec3::zeros(),
            base_angular_acceleration: Vec3::zeros(),
            joints: JointState::at_rest(q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseDynamics {
    pub torques: JointVector,
    /// Net wrench on the base needed to realize the motion (world axes, base origin).
    pub base_reaction: Wrench,
    /// Wrench each limb exerts on the base at its mount (world axes, base origin).
    pub limb_reactions: [Wrench; NUM_LIMBS],
}

struct BodyMotion {
    omega: Vec3,
    alpha: Vec3,
    origin: Vec3,
    com: Vec3,
    com_acceleration: Vec3,
    axis: Vec3,
}

fn body_wrench(inertial: &BodyInertial, rotation: &Mat3, m: &BodyMotion) -> (Vec3, Vec3) {
    let i = rotation * inertial.inertia * rotation.transpose();
    let f = m.com_acceleration * inertial.mass;
    let n = i * m.alpha + m.omega.cross(&(i * m.omega));
    (f, n)
}

/// Recursive Newton–Euler over the floating-base tree with zero gravity.
pub fn inverse_dynamics(inertia: &InertiaModel, state: &DynamicState) -> InverseDynamics {
    let base = &state.base_pose;
    let rb = *base.rotation.matrix();
    let w0 = state.base_twist.angular;
    let a0 = state.base_linear_acceleration;
    let al0 = state.base_angular_acceleration;
    let o0 = base.translation;
    let c0 = base.transform_point(&inertia.base.com);
    let base_motion = BodyMotion {
        omega: w0,
        alpha: al0,
        origin: o0,
        com: c0,
        com_acceleration: a0 + al0.cross(&(c0 - o0)) + w0.cross(&w0.cross(&(c0 - o0))),
        axis: Vec3::zeros(),
    };
    let (fb, nb) = body_wrench(&inertia.base, &rb, &base_motion);
    let mut force = fb;
    let mut torque = nb + (c0 - o0).cross(&fb);
    let mut torques = JointVector::zeros();
    let mut limb_reactions = [Wrench::zero_at(o0); NUM_LIMBS];
    for limb in 0..NUM_LIMBS {
        let j0 = limb * JOINTS_PER_LIMB;
        let q: LimbJoints = state.joints.q.fixed_rows::<JOINTS_PER_LIMB>(j0).into_owned();
        let frames = limb_frames(&inertia.model, limb, &q);
        let mut motions: Vec<BodyMotion> = Vec::with_capacity(JOINTS_PER_LIMB);
        let mut rotations = [Mat3::zeros(); JOINTS_PER_LIMB];
        let (mut omega, mut alpha, mut origin, mut acc) = (w0, al0, o0, a0);
        for k in 0..JOINTS_PER_LIMB {
            let pose = base.compose(&frames.bodies[k]);
            let r = pose.translation - origin;
            acc += alpha.cross(&r) + omega.cross(&omega.cross(&r));
            origin = pose.translation;
            let axis = pose.rotation.matrix().column(JOINT_AXES[k]).into_owned();
            let dq = state.joints.dq[j0 + k];
            let ddq = state.joints.ddq[j0 + k];
            alpha += axis * ddq + omega.cross(&(axis * dq));
            omega += axis * dq;
            let com = pose.transform_point(&inertia.links[limb][k].com);
            let c = com - origin;
            motions.push(BodyMotion {
                omega,
                alpha,
                origin,
                com,
                com_acceleration: acc + alpha.cross(&c) + omega.cross(&omega.cross(&c)),
                axis,
            });
            rotations[k] = *pose.rotation.matrix();
        }
        // backward pass: (f, n) transmitted from body k-1 into body k, about joint k
        let mut f_child = Vec3::zeros();
        let mut n_child = Vec3::zeros();
        let mut child_origin = Vec3::zeros();
        for k in (0..JOINTS_PER_LIMB).rev() {
            let m = &motions[k];
            let (fk, nk) = body_wrench(&inertia.links[limb][k], &rotations[k], m);
            let f = fk + f_child;
            let n = nk + (m.com - m.origin).cross(&fk) + n_child + (child_origin - m.origin).cross(&f_child);
            torques[j0 + k] = m.axis.dot(&n);
            f_child = f;
            n_child = n;
            child_origin = m.origin;
        }
        let n_base = n_child + (child_origin - o0).cross(&f_child);
        force += f_child;
        torque += n_base;
        limb_reactions[limb] = Wrench::new(-f_child, -n_base, o0);
    }
    InverseDynamics {
        torques,
        base_reaction: Wrench::new(force, torque, o0),
        limb_reactions,
    }
}

/// Joint-space mass matrix for the prescribed-base tree (block diagonal per limb).
pub fn mass_matrix(inertia: &InertiaModel, base_pose: &Pose, q: &JointVector) -> nalgebra::SMatrix<f64, NUM_JOINTS, NUM_JOINTS> {
    let mut m = nalgebra::SMatrix::<f64, NUM_JOINTS, NUM_JOINTS>::zeros();
    let mut state = DynamicState::at_rest(*base_pose, *q);
    for j in 0..NUM_JOINTS {
        state.joints.ddq = JointVector::zeros();
        state.joints.ddq[j] = 1.0;
        let tau = inverse_dynamics(inertia, &state).torques;
        let limb = j / JOINTS_PER_LIMB;
        for i in limb * JOINTS_PER_LIMB..(limb + 1) * JOINTS_PER_LIMB {
            m[(i, j)] = tau[i];
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub kp: [f64; NUM_JOINTS],
    pub kd: [f64; NUM_JOINTS],
}

impl ControllerGains {
    pub fn uniform(kp: f64, kd: f64) -> Self {
        Self {
            kp: [kp; NUM_JOINTS],
            kd: [kd; NUM_JOINTS],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.kp.iter().chain(self.kd.iter()).all(|g| *g > 0.0 && g.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::Invalid("controller gains must be positive".into()))
        }
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self::uniform(100.0, 20.0)
    }
}

/// `τ = M(q)(q̈_des + K_P e + K_D ė) + C(q, q̇)q̇`, where the bias term also
/// carries the prescribed base acceleration.
pub fn controller_torque(
    inertia: &InertiaModel,
    actual: &DynamicState,
    q_des: &JointVector,
    dq_des: &JointVector,
    ddq_des: &JointVector,
    gains: &ControllerGains,
) -> JointVector {
    let e = q_des - actual.joints.q;
    let de = dq_des - actual.joints.dq;
    let feedback = JointVector::from_fn(|i, _| ddq_des[i] + gains.kp[i] * e[i] + gains.kd[i] * de[i]);
    let mut bias_state = *actual;
    bias_state.joints.ddq = JointVector::zeros();
    let bias = inverse_dynamics(inertia, &bias_state).torques;
    mass_matrix(inertia, &actual.base_pose, &actual.joints.q) * feedback + bias
}

/// Centered moving average over `window` samples, shrinking at the ends.
/// Averages deviations from the centre sample so constant input is returned exactly.
pub fn moving_average(x: &[Vec3], window: usize) -> Vec<Vec3> {
    let h = window / 2;
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let dev = x[lo..=hi].iter().fold(Vec3::zeros(), |a, v| a + (v - x[i]));
            x[i] + dev / (hi - lo + 1) as f64
        })
        .collect()
}

/// Central difference at uniform spacing, one-sided at the ends.
pub fn finite_difference(x: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = x.len();
    if n < 2 {
        return vec![Vec3::zeros(); n];
    }
    (0..n)
        .map(|i| match i {
            0 => (x[1] - x[0]) / dt,
            i if i == n - 1 => (x[n - 1] - x[n - 2]) / dt,
            _ => (x[i + 1] - x[i - 1]) / (2.0 * dt),
        })
        .collect()
}

/// Motion-induced wrench sample. The torque channel is reported both about the
/// COM and about the base origin; all vectors in base axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionWrench {
    pub force: Vec3,
    pub torque_about_com: Vec3,
    pub torque_about_base: Vec3,
}

/// Raw samples the whole-body wrench is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumSample {
    pub base_pose: Pose,
    pub com: Vec3,
    pub com_velocity: Vec3,
    pub centroidal_momentum: Vec3,
}

/// Whole-body motion wrench from finite differences of the COM velocity and
/// centroidal angular momentum; smoothed by a centered moving average of
/// `window_s` unless it is zero.
pub fn motion_wrench_series(samples: &[MomentumSample], total_mass: f64, rate_hz: f64, window_s: f64) -> Vec<MotionWrench> {
    let dt = 1.0 / rate_hz;
    let v: Vec<Vec3> = samples.iter().map(|s| s.com_velocity).collect();
    let l: Vec<Vec3> = samples.iter().map(|s| s.centroidal_momentum).collect();
    let mut force: Vec<Vec3> = finite_difference(&v, dt).into_iter().map(|a| a * total_mass).collect();
    let mut torque = finite_difference(&l, dt);
    let window = (window_s * rate_hz).round() as usize;
    if window > 1 {
        force = moving_average(&force, window);
        torque = moving_average(&torque, window);
    }
    samples
        .iter()
        .zip(force.iter().zip(&torque))
        .map(|(s, (f, t))| {
            let r = s.base_pose.rotation.inverse();
            let at_base = Wrench::new(*f, *t, s.com).transform_to(&s.base_pose.translation);
            MotionWrench {
                force: r * f,
                torque_about_com: r * t,
                torque_about_base: r * at_base.torque,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PeakRms {
    pub peak: f64,
    pub rms: f64,
}

impl PeakRms {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut peak, mut sq, mut n) = (0.0f64, 0.0, 0usize);
        for v in values {
            peak = peak.max(v.abs());
            sq += v * v;
            n += 1;
        }
        let rms = if n > 0 { (sq / n as f64).sqrt() } else { 0.0 };
        Self { peak, rms: rms.min(peak) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WrenchStats {
    pub force: PeakRms,
    pub torque: PeakRms,
}

impl WrenchStats {
    pub fn of<'a>(series: impl Iterator<Item = (&'a Vec3, &'a Vec3)> + Clone) -> Self {
        Self {
            force: PeakRms::of(series.clone().map(|(f, _)| f.norm())),
            torque: PeakRms::of(series.map(|(_, t)| t.norm())),
        }
    }
}

/// `∫ Σ_j |τ_j ω_j| dt` by the trapezoidal rule over uniform samples.
pub fn mechanical_work(torques: &[JointVector], velocities: &[JointVector], dt: f64) -> f64 {
    let power: Vec<f64> = torques
        .iter()
        .zip(velocities)
        .map(|(t, w)| t.iter().zip(w.iter()).map(|(a, b)| (a * b).abs()).sum())
        .collect();
    power.windows(2).map(|p| 0.5 * (p[0] + p[1]) * dt).sum()
}

/// Duration-weighted mean of `(duration, score)` pairs.
pub fn normalized_contact_score(intervals: &[(f64, f64)]) -> f64 {
    let total: f64 = intervals.iter().map(|(d, _)| d).sum();
    if total > 0.0 {
        intervals.iter().map(|(d, s)| d * s).sum::<f64>() / total
    } else {
        0.0
    }
}
