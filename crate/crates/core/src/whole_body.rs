use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Rotation3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{wrench_membership_with, ContactModel, ContactPoint, ContactSet, Refinement};
use crate::dynamics::{inverse_dynamics, DynamicState, InertiaModel};
use crate::environment::Environment;
use crate::gait::{FailureInfo, FailureKind, StrideGoal};
use crate::robot::{
    forward_kinematics, inverse_kinematics, jacobian, limb_frames, tree_state, IkError, IkOptions, JointState,
    JointVector, LimbJoints, Morphology, RobotModel, JOINTS_PER_LIMB, JOINT_AXES, NUM_JOINTS, NUM_LIMBS,
};
use crate::spatial::{Mat3, Pose, Twist, Vec3, Wrench};
use crate::trajectory::{MotionSample, Stage, StrideTrajectory, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attachment {
    Attached(usize),
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub base_pose: Pose,
    pub base_twist: Twist,
    pub joints: JointState,
    pub attachment: [Attachment; NUM_LIMBS],
    pub time: f64,
}

impl RobotState {
    pub fn anchors(&self) -> Option<[usize; NUM_LIMBS]> {
        let mut out = [0; NUM_LIMBS];
        for (o, a) in out.iter_mut().zip(&self.attachment) {
            match a {
                Attachment::Attached(id) => *o = *id,
                Attachment::Free => return None,
            }
        }
        Some(out)
    }

    /// World gripper pose of `limb`.
    pub fn end_effector(&self, model: &RobotModel, limb: usize) -> Pose {
        self.base_pose.compose(&forward_kinematics(model, limb, &self.joints.limb_q(limb)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonitorThresholds {
    /// Largest gripper-to-anchor distance of an attached limb (m).
    pub proximity: f64,
    /// Required membership margin of the estimated wrench.
    pub margin: f64,
}

impl Default for MonitorThresholds {
    fn default() -> Self {
        Self {
            proximity: 0.002,
            margin: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecutionConfig {
    pub playback_rate_hz: f64,
    /// Monitor evaluations per second; zero disables the monitor.
    pub monitor_rate_hz: f64,
    /// Trailing window of the monitor's wrench estimate (s).
    pub monitor_window_s: f64,
    pub thresholds: MonitorThresholds,
    /// Abort on torque or velocity limit violations instead of only logging them.
    pub hard_fail_limits: bool,
    pub contact_model: ContactModel,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        Self {
            playback_rate_hz: 1000.0,
            monitor_rate_hz: 10.0,
            monitor_window_s: 0.1,
            thresholds: MonitorThresholds::default(),
            hard_fail_limits: false,
            contact_model: ContactModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum CoordinationError {
    #[error("key-stage IK failed for limb {limb} at {stage:?} (t = {time:.3} s)")]
    KeyStageIk { stage: Stage, limb: usize, time: f64 },
    #[error("key stage {stage:?} of limb {limb} is near a singularity (t = {time:.3} s)")]
    NearSingularity { stage: Stage, limb: usize, time: f64 },
    #[error("dense IK failed for limb {limb} at t = {time:.3} s")]
    DenseIk { time: f64, limb: usize, stage: Stage },
}

impl CoordinationError {
    pub fn failure(&self) -> FailureInfo {
        match *self {
            CoordinationError::KeyStageIk { stage, limb, time } => FailureInfo {
                limb,
                stage,
                time,
                kind: FailureKind::KeyStageIk,
            },
            CoordinationError::NearSingularity { stage, limb, time } => FailureInfo {
                limb,
                stage,
                time,
                kind: FailureKind::NearSingular,
            },
            CoordinationError::DenseIk { time, limb, stage } => FailureInfo {
                limb,
                stage,
                time,
                kind: FailureKind::DenseIk,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSample {
    /// Stride-local time.
    pub t: f64,
    pub base: MotionSample,
    pub joints: JointState,
    pub stages: [Stage; NUM_LIMBS],
}

/// Commanded whole-body motion of one stride at the playback rate.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    pub rate_hz: f64,
    /// Sample `i` is at `min(i / rate, duration)`.
    pub samples: Vec<JointSample>,
    pub duration: f64,
    pub start_anchors: [usize; NUM_LIMBS],
    pub target_anchors: [usize; NUM_LIMBS],
}

/// Nominal postures tried when a warm start fails.
pub fn nominal_seeds(morphology: Morphology) -> Vec<LimbJoints> {
    match morphology {
        Morphology::Ypp => vec![
            LimbJoints::from_row_slice(&[0.0, -0.5, 1.6, 0.47, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[0.3, -0.3, 1.4, 0.5, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[-0.3, -0.3, 1.4, 0.5, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[0.0, -0.9, 2.0, 0.5, 0.0, 0.0]),
        ],
        Morphology::Rpp => vec![
            LimbJoints::from_row_slice(&[0.7, -0.6, 1.2, -0.6, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[-0.7, -0.6, 1.2, -0.6, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[0.7, 0.6, -1.2, 0.6, 0.0, 0.0]),
            LimbJoints::from_row_slice(&[-0.7, 0.6, -1.2, 0.6, 0.0, 0.0]),
        ],
    }
}

/// IK from `warm`, falling back to the nominal seeds. Reports the warm-start error.
pub fn solve_limb(model: &RobotModel, limb: usize, target: &Pose, warm: &LimbJoints, opts: &IkOptions) -> Result<LimbJoints, IkError> {
    let first = match inverse_kinematics(model, limb, target, warm, opts) {
        Ok(q) => return Ok(q),
        Err(e) => e,
    };
    if (target.translation - model.limb_mount_poses[limb].translation).norm() > model.limb_reach(limb) {
        return Err(first);
    }
    for seed in nominal_seeds(model.morphology()) {
        if let Ok(q) = inverse_kinematics(model, limb, target, &seed, opts) {
            return Ok(q);
        }
    }
    Err(first)
}

/// Gripper target in the base frame.
fn relative_target(base: &Pose, ee: &Pose) -> Pose {
    base.inverse().compose(ee)
}

/// `J̇q̇` for the base-fixed limb chain, from the forward acceleration recursion with q̈ = 0.
fn bias_acceleration(model: &RobotModel, limb: usize, q: &LimbJoints, dq: &LimbJoints) -> Vector6<f64> {
    let frames = limb_frames(model, limb, q);
    let (mut omega, mut alpha, mut acc) = (Vec3::zeros(), Vec3::zeros(), Vec3::zeros());
    let mut origin = frames.bodies[0].translation;
    for k in 0..JOINTS_PER_LIMB {
        let o = frames.bodies[k].translation;
        let r = o - origin;
        acc += alpha.cross(&r) + omega.cross(&omega.cross(&r));
        origin = o;
        let axis = frames.bodies[k].rotation.matrix().column(JOINT_AXES[k]).into_owned();
        alpha += omega.cross(&(axis * dq[k]));
        omega += axis * dq[k];
    }
    let r = frames.end_effector.translation - origin;
    acc += alpha.cross(&r) + omega.cross(&omega.cross(&r));
    Vector6::new(acc.x, acc.y, acc.z, alpha.x, alpha.y, alpha.z)
}

fn stack(a: &Vec3, b: &Vec3) -> Vector6<f64> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Joint rates and accelerations that make limb `limb` follow `ee` while the base follows `base`.
fn joint_derivatives(
    model: &RobotModel,
    limb: usize,
    q: &LimbJoints,
    base: &MotionSample,
    ee: &MotionSample,
) -> Option<(LimbJoints, LimbJoints)> {
    let rt = base.pose.rotation.inverse();
    let wb = base.twist.angular;
    let d = ee.pose.translation - base.pose.translation;
    let dd = ee.twist.linear - base.twist.linear;
    let u = dd - wb.cross(&d);
    let w = ee.twist.angular - wb;
    let du = ee.linear_acceleration - base.linear_acceleration - base.angular_acceleration.cross(&d) - wb.cross(&dd);
    let dw = ee.angular_acceleration - base.angular_acceleration;
    let xd = stack(&(rt * u), &(rt * w));
    let xdd = stack(&(rt * (du - wb.cross(&u))), &(rt * (dw - wb.cross(&w))));
    let lu = jacobian(model, limb, q).lu();
    let dq = lu.solve(&xd)?;
    let ddq = lu.solve(&(xdd - bias_acceleration(model, limb, q, &dq)))?;
    Some((dq, ddq))
}

fn key_times(traj: &StrideTrajectory) -> Vec<f64> {
    let mut t = vec![0.0, traj.duration()];
    for s in traj.swings.iter().flatten() {
        t.extend(s.stage_starts());
        t.push(s.end_time());
    }
    t.retain(|x| *x <= traj.duration());
    t.sort_by(f64::total_cmp);
    t.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    t
}

/// Key-stage IK at every swing-phase boundary, then warm-started dense IK at
/// the playback rate.
pub fn coordinate_stride(
    model: &RobotModel,
    goal: &StrideGoal,
    traj: &StrideTrajectory,
    state: &RobotState,
    rate_hz: f64,
    ik: &IkOptions,
) -> Result<JointTrajectory, CoordinationError> {
    let start_anchors = state.anchors().expect("stride must start with every limb attached");
    let target_anchors: [usize; NUM_LIMBS] = std::array::from_fn(|l| {
        if traj.swings[l].is_some() {
            goal.target_anchor_per_limb[l].unwrap_or(start_anchors[l])
        } else {
            start_anchors[l]
        }
    });
    let mut q = state.joints.q;
    for &t in &key_times(traj) {
        let s = traj.sample_clamped(t);
        for limb in 0..NUM_LIMBS {
            let target = relative_target(&s.base.pose, &s.limbs[limb].motion.pose);
            match solve_limb(model, limb, &target, &q.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned(), ik) {
                Ok(ql) => q.fixed_rows_mut::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).copy_from(&ql),
                Err(IkError::NearSingular { .. }) => {
                    return Err(CoordinationError::NearSingularity {
                        stage: s.limbs[limb].stage,
                        limb,
                        time: t,
                    })
                }
                Err(_) => {
                    return Err(CoordinationError::KeyStageIk {
                        stage: s.limbs[limb].stage,
                        limb,
                        time: t,
                    })
                }
            }
        }
    }
    let duration = traj.duration();
    let n = (duration * rate_hz - 1e-9).ceil().max(0.0) as usize;
    let mut samples = Vec::with_capacity(n + 1);
    let mut q = state.joints.q;
    for i in 0..=n {
        // the final sample lands exactly on the stride end
        let t = if i == n { duration } else { (i as f64 / rate_hz).min(duration) };
        let s: TrajectorySample = traj.sample_clamped(t);
        let mut joints = JointState::at_rest(q);
        for limb in 0..NUM_LIMBS {
            let motion = &s.limbs[limb].motion;
            let target = relative_target(&s.base.pose, &motion.pose);
            let fail = || CoordinationError::DenseIk {
                time: t,
                limb,
                stage: s.limbs[limb].stage,
            };
            let warm = q.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned();
            let ql = inverse_kinematics(model, limb, &target, &warm, ik).map_err(|_| fail())?;
            let (dq, ddq) = joint_derivatives(model, limb, &ql, &s.base, motion).ok_or_else(fail)?;
            let r = limb * JOINTS_PER_LIMB;
            joints.q.fixed_rows_mut::<JOINTS_PER_LIMB>(r).copy_from(&ql);
            joints.dq.fixed_rows_mut::<JOINTS_PER_LIMB>(r).copy_from(&dq);
            joints.ddq.fixed_rows_mut::<JOINTS_PER_LIMB>(r).copy_from(&ddq);
        }
        q = joints.q;
        samples.push(JointSample {
            t,
            base: s.base,
            joints,
            stages: s.limbs.map(|l| l.stage),
        });
    }
    Ok(JointTrajectory {
        rate_hz,
        samples,
        duration,
        start_anchors,
        target_anchors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum MonitorStatus {
    Ok,
    GraspRisk { limb: usize, distance: f64 },
    WrenchInfeasible { margin: f64 },
}

/// Grasp proximity of attached limbs, then membership of the estimated wrench
/// (scaled by the margin threshold) in the feasible contact wrench space.
pub fn monitor_stability(
    model: &RobotModel,
    env: &Environment,
    state: &RobotState,
    estimated: &Wrench,
    contacts: &ContactSet,
    thresholds: &MonitorThresholds,
) -> MonitorStatus {
    for limb in 0..NUM_LIMBS {
        if let Attachment::Attached(a) = state.attachment[limb] {
            let distance = (state.end_effector(model, limb).translation - env.anchor(a).position()).norm();
            if distance > thresholds.proximity {
                return MonitorStatus::GraspRisk { limb, distance };
            }
        }
    }
    if estimated.is_zero() {
        return MonitorStatus::Ok;
    }
    let k = thresholds.margin;
    let scaled = Wrench::new(estimated.force * k, estimated.torque * k, estimated.reference_point);
    match wrench_membership_with(contacts, &scaled, Refinement::Decision) {
        Ok(m) if m.feasible => MonitorStatus::Ok,
        Ok(m) => MonitorStatus::WrenchInfeasible { margin: m.margin * k },
        Err(_) => MonitorStatus::WrenchInfeasible { margin: 0.0 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Torque,
    Velocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum EventKind {
    StrideStart { stride: usize },
    StageTransition { limb: usize, from: Stage, to: Stage },
    Release { limb: usize, anchor: usize },
    Grasp { limb: usize, anchor: usize },
    Monitor { status: MonitorStatus },
    LimitViolation { joint: usize, kind: LimitKind, value: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub sample: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub base_pose: Pose,
    pub base_twist: Twist,
    pub base_linear_acceleration: Vec3,
    pub base_angular_acceleration: Vec3,
    pub joints: JointState,
    pub torques: JointVector,
    pub attachment: [Attachment; NUM_LIMBS],
    pub stages: [Stage; NUM_LIMBS],
    pub com: Vec3,
    pub com_velocity: Vec3,
    pub centroidal_momentum: Vec3,
    /// Net wrench the contacts supply (world axes, base origin).
    pub base_reaction: Wrench,
}

impl TraceSample {
    pub fn dynamic_state(&self) -> DynamicState {
        DynamicState {
            base_pose: self.base_pose,
            base_twist: self.base_twist,
            base_linear_acceleration: self.base_linear_acceleration,
            base_angular_acceleration: self.base_angular_acceleration,
            joints: self.joints,
        }
    }

    pub fn attached_count(&self) -> usize {
        self.attachment.iter().filter(|a| matches!(a, Attachment::Attached(_))).count()
    }
}

/// Uniformly sampled playback record: sample `i` is at `i / rate_hz`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionTrace {
    pub rate_hz: f64,
    pub samples: Vec<TraceSample>,
    pub events: Vec<TraceEvent>,
    /// First sample index of each stride.
    pub stride_starts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecutionError {
    #[error("locomotion paused at t = {time:.3} s: {status:?}")]
    MonitorPause { time: f64, status: MonitorStatus },
    #[error("joint {joint} exceeded its {kind:?} limit ({value:.3} > {limit:.3})")]
    LimitViolation { joint: usize, kind: LimitKind, value: f64, limit: f64 },
}

impl ExecutionTrace {
    pub fn new(rate_hz: f64) -> Self {
        Self {
            rate_hz,
            ..Self::default()
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.rate_hz
    }

    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 / self.rate_hz
    }

    fn push_event(&mut self, kind: EventKind) {
        let sample = self.samples.len().saturating_sub(1);
        self.events.push(TraceEvent {
            t: self.time(sample),
            sample,
            kind,
        });
    }
}

fn trace_sample(inertia: &InertiaModel, state: DynamicState, attachment: [Attachment; NUM_LIMBS], stages: [Stage; NUM_LIMBS]) -> TraceSample {
    let id = inverse_dynamics(inertia, &state);
    let tree = tree_state(&inertia.model, &state.base_pose, &state.base_twist, &state.joints.q, &state.joints.dq);
    TraceSample {
        base_pose: state.base_pose,
        base_twist: state.base_twist,
        base_linear_acceleration: state.base_linear_acceleration,
        base_angular_acceleration: state.base_angular_acceleration,
        joints: state.joints,
        torques: id.torques,
        attachment,
        stages,
        com: tree.com(),
        com_velocity: tree.com_velocity(),
        centroidal_momentum: tree.centroidal_angular_momentum(),
        base_reaction: id.base_reaction,
    }
}

/// Contact set of the attached limbs.
pub fn active_contacts(env: &Environment, attachment: &[Attachment; NUM_LIMBS], model: ContactModel) -> ContactSet {
    let contacts = attachment
        .iter()
        .enumerate()
        .filter_map(|(l, a)| match a {
            Attachment::Attached(id) => Some(ContactPoint::new(l, env.anchor(*id).grasp_pose)),
            Attachment::Free => None,
        })
        .collect();
    ContactSet { contacts, model }
}

/// Appends a static hold of `duration` at the current state.
pub fn hold(inertia: &InertiaModel, state: &RobotState, duration: f64, trace: &mut ExecutionTrace) -> RobotState {
    let n = (duration * trace.rate_hz).round() as usize;
    let s = DynamicState::at_rest(state.base_pose, state.joints.q);
    let sample = trace_sample(inertia, s, state.attachment, [Stage::Stance; NUM_LIMBS]);
    let skip = usize::from(!trace.samples.is_empty());
    for _ in skip..=n {
        trace.samples.push(sample);
    }
    RobotState {
        base_twist: Twist::zero(),
        joints: JointState::at_rest(state.joints.q),
        time: trace.duration(),
        ..state.clone()
    }
}

/// Kinematic playback of a coordinated stride: inverse-dynamics torques,
/// contact events, limit checks and the stability monitor at every sample.
pub fn execute_stride(
    inertia: &InertiaModel,
    joint_traj: &JointTrajectory,
    env: &Environment,
    cfg: &ExecutionConfig,
    trace: &mut ExecutionTrace,
    state: &RobotState,
) -> Result<RobotState, ExecutionError> {
    let model = &inertia.model;
    let stride = trace.stride_starts.len();
    // the first sample repeats the previous stride's last one
    let skip = usize::from(!trace.samples.is_empty());
    trace.stride_starts.push(trace.samples.len().saturating_sub(skip));
    if skip == 0 {
        trace.samples.reserve(joint_traj.samples.len());
    }
    trace.push_event(EventKind::StrideStart { stride });
    let monitor_every = if cfg.monitor_rate_hz > 0.0 {
        ((cfg.playback_rate_hz / cfg.monitor_rate_hz).round() as usize).max(1)
    } else {
        usize::MAX
    };
    let window = ((cfg.monitor_window_s * cfg.playback_rate_hz).round() as usize).max(1);
    let mut attachment = state.attachment;
    let mut stages = [Stage::Stance; NUM_LIMBS];
    let mut over_limit = [[false; 2]; NUM_JOINTS];
    let mut current = state.clone();
    for (i, js) in joint_traj.samples.iter().enumerate() {
        for limb in 0..NUM_LIMBS {
            let to = js.stages[limb];
            let from = stages[limb];
            if to == from {
                continue;
            }
            stages[limb] = to;
            if from == Stage::Stance && to != Stage::Stance {
                attachment[limb] = Attachment::Free;
            }
            if to == Stage::Stance {
                attachment[limb] = Attachment::Attached(joint_traj.target_anchors[limb]);
            }
        }
        let dyn_state = DynamicState {
            base_pose: js.base.pose,
            base_twist: js.base.twist,
            base_linear_acceleration: js.base.linear_acceleration,
            base_angular_acceleration: js.base.angular_acceleration,
            joints: js.joints,
        };
        let sample = trace_sample(inertia, dyn_state, attachment, stages);
        if i > 0 || skip == 0 {
            trace.samples.push(sample);
        }
        // events are stamped with the sample just written
        let prev = if i == 0 { [Stage::Stance; NUM_LIMBS] } else { joint_traj.samples[i - 1].stages };
        for limb in 0..NUM_LIMBS {
            let (from, to) = (prev[limb], js.stages[limb]);
            if from == to {
                continue;
            }
            if from == Stage::Stance {
                trace.push_event(EventKind::Release {
                    limb,
                    anchor: joint_traj.start_anchors[limb],
                });
            }
            trace.push_event(EventKind::StageTransition { limb, from, to });
            if to == Stage::Stance {
                trace.push_event(EventKind::Grasp {
                    limb,
                    anchor: joint_traj.target_anchors[limb],
                });
            }
        }
        for j in 0..NUM_JOINTS {
            let checks = [
                (LimitKind::Torque, sample.torques[j], model.torque_limit(j)),
                (LimitKind::Velocity, sample.joints.dq[j], model.velocity_limit(j)),
            ];
            for (c, (kind, value, limit)) in checks.into_iter().enumerate() {
                let exceeded = value.abs() > limit;
                if exceeded && !over_limit[j][c] {
                    trace.push_event(EventKind::LimitViolation {
                        joint: j,
                        kind,
                        value: value.abs(),
                        limit,
                    });
                    if cfg.hard_fail_limits {
                        return Err(ExecutionError::LimitViolation {
                            joint: j,
                            kind,
                            value: value.abs(),
                            limit,
                        });
                    }
                }
                over_limit[j][c] = exceeded;
            }
        }
        current = RobotState {
            base_pose: js.base.pose,
            base_twist: js.base.twist,
            joints: js.joints,
            attachment,
            time: trace.duration(),
        };
        if i % monitor_every == 0 && i > 0 {
            let n = trace.samples.len();
            let lo = n.saturating_sub(window);
            let base = sample.base_pose.translation;
            let mut estimate = Wrench::zero_at(base);
            for s in &trace.samples[lo..n] {
                let w = s.base_reaction.transform_to(&base);
                estimate.force += w.force;
                estimate.torque += w.torque;
            }
            estimate.force /= (n - lo) as f64;
            estimate.torque /= (n - lo) as f64;
            let contacts = active_contacts(env, &attachment, cfg.contact_model);
            let status = monitor_stability(model, env, &current, &estimate, &contacts, &cfg.thresholds);
            if status != MonitorStatus::Ok {
                trace.push_event(EventKind::Monitor { status });
                return Err(ExecutionError::MonitorPause {
                    time: current.time,
                    status,
                });
            }
        }
    }
    Ok(current)
}

/// On-disk trace layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed trace row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    rate_hz: f64,
    samples: usize,
    stride_starts: Vec<usize>,
    events: Vec<TraceEvent>,
    #[serde(default)]
    config: serde_json::Value,
}

const ROW_WIDTH: usize = 12 + 6 + 6 + 4 * NUM_JOINTS + 4 + 4 + 9 + 6;

fn stage_code(s: Stage) -> f64 {
    s.index() as f64
}

fn stage_from(v: f64) -> Option<Stage> {
    Some(match v as usize {
        0 => Stage::Stance,
        1 => Stage::Release,
        2 => Stage::Retreat,
        3 => Stage::Transfer,
        4 => Stage::Approach,
        5 => Stage::Grasp,
        _ => return None,
    })
}

impl TraceSample {
    fn to_row(self) -> Vec<f64> {
        let mut r = Vec::with_capacity(ROW_WIDTH);
        r.extend(self.base_pose.rotation.matrix().iter());
        r.extend(self.base_pose.translation.iter());
        r.extend(self.base_twist.linear.iter().chain(self.base_twist.angular.iter()));
        r.extend(self.base_linear_acceleration.iter().chain(self.base_angular_acceleration.iter()));
        for v in [&self.joints.q, &self.joints.dq, &self.joints.ddq, &self.torques] {
            r.extend(v.iter());
        }
        r.extend(self.attachment.iter().map(|a| match a {
            Attachment::Attached(id) => *id as f64,
            Attachment::Free => -1.0,
        }));
        r.extend(self.stages.iter().map(|s| stage_code(*s)));
        for v in [&self.com, &self.com_velocity, &self.centroidal_momentum, &self.base_reaction.force, &self.base_reaction.torque] {
            r.extend(v.iter());
        }
        r
    }

    fn from_row(r: &[f64]) -> Option<Self> {
        if r.len() != ROW_WIDTH {
            return None;
        }
        let v3 = |i: usize| Vec3::new(r[i], r[i + 1], r[i + 2]);
        let jv = |i: usize| JointVector::from_column_slice(&r[i..i + NUM_JOINTS]);
        let rotation = Rotation3::from_matrix_unchecked(Mat3::from_column_slice(&r[0..9]));
        let base_pose = Pose::new(rotation, v3(9));
        let j = 24;
        let a = j + 4 * NUM_JOINTS;
        let mut attachment = [Attachment::Free; NUM_LIMBS];
        let mut stages = [Stage::Stance; NUM_LIMBS];
        for l in 0..NUM_LIMBS {
            attachment[l] = if r[a + l] < 0.0 { Attachment::Free } else { Attachment::Attached(r[a + l] as usize) };
            stages[l] = stage_from(r[a + 4 + l])?;
        }
        let m = a + 8;
        Some(Self {
            base_pose,
            base_twist: Twist::new(v3(12), v3(15)),
            base_linear_acceleration: v3(18),
            base_angular_acceleration: v3(21),
            joints: JointState {
                q: jv(j),
                dq: jv(j + NUM_JOINTS),
                ddq: jv(j + 2 * NUM_JOINTS),
            },
            torques: jv(j + 3 * NUM_JOINTS),
            attachment,
            stages,
            com: v3(m),
            com_velocity: v3(m + 3),
            centroidal_momentum: v3(m + 6),
            base_reaction: Wrench::new(v3(m + 9), v3(m + 12), base_pose.translation),
        })
    }
}

impl ExecutionTrace {
    /// Writes `<stem>.csv` (or `<stem>.trace.json`) plus the `<stem>.json` sidecar.
    /// Floats use shortest round-trip formatting, so reading back is exact.
    pub fn save(&self, dir: &Path, stem: &str, format: TraceFormat, config: serde_json::Value) -> Result<(), TraceIoError> {
        std::fs::create_dir_all(dir)?;
        let sidecar = Sidecar {
            rate_hz: self.rate_hz,
            samples: self.samples.len(),
            stride_starts: self.stride_starts.clone(),
            events: self.events.clone(),
            config,
        };
        std::fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&sidecar)?)?;
        let rows = self.samples.iter().map(|s| s.to_row());
        match format {
            TraceFormat::Csv => {
                let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?);
                writeln!(w, "# {ROW_WIDTH} columns per sample; t = row / rate_hz")?;
                for row in rows {
                    let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
                    writeln!(w, "{}", line.join(","))?;
                }
                w.flush()?;
            }
            TraceFormat::Json => {
                let all: Vec<Vec<f64>> = rows.collect();
                std::fs::write(dir.join(format!("{stem}.trace.json")), serde_json::to_string(&all)?)?;
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str, format: TraceFormat) -> Result<Self, TraceIoError> {
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let rows: Vec<Vec<f64>> = match format {
            TraceFormat::Csv => {
                let f = std::io::BufReader::new(std::fs::File::open(dir.join(format!("{stem}.csv")))?);
                let mut rows = Vec::new();
                for (i, line) in f.lines().enumerate() {
                    let line = line?;
                    if line.starts_with('#') {
                        continue;
                    }
                    let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
                    rows.push(row.map_err(|e| TraceIoError::Malformed {
                        row: i,
                        reason: format!("{e}"),
                    })?);
                }
                rows
            }
            TraceFormat::Json => serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.trace.json")))?)?,
        };
        let samples = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                TraceSample::from_row(r).ok_or_else(|| TraceIoError::Malformed {
                    row: i,
                    reason: "wrong width or stage code".into(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if samples.len() != sidecar.samples {
            return Err(TraceIoError::Malformed {
                row: samples.len(),
                reason: "sample count differs from sidecar".into(),
            });
        }
        Ok(Self {
            rate_hz: sidecar.rate_hz,
            samples,
            events: sidecar.events,
            stride_starts: sidecar.stride_starts,
        })
    }
}
