//! Trial-level performance metrics computed from an execution trace.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    inverse_dynamics, mechanical_work, motion_wrench_series, normalized_contact_score, InertiaModel, MomentumSample,
    MotionWrench, PeakRms, WrenchStats,
};
use crate::robot::{JointVector, NUM_LIMBS};
use crate::spatial::{Vec3, Wrench};
use crate::whole_body::{Attachment, ExecutionTrace};

/// Smoothing window of the whole-body motion wrench (s).
pub const MOTION_WRENCH_WINDOW: f64 = 0.1;

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    /// No kinematically feasible plan within the modification budget.
    PlanFailure,
    /// The stability monitor paused the task.
    Instability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub outcome: Outcome,
    pub normalized_contact_score: f64,
    /// Torque channel about the instantaneous COM.
    pub whole_body_wrench: WrenchStats,
    /// Same force channel, torque re-referenced to the base origin.
    pub whole_body_wrench_base: WrenchStats,
    /// Torque about the base origin.
    pub swing_wrench: WrenchStats,
    pub mechanical_work: f64,
    /// RMS over every joint and sample.
    pub rms_joint_torque: f64,
    pub rms_joint_velocity: f64,
    pub peak_joint_torque: f64,
    /// Trace duration; `None` unless the trial succeeded.
    pub traversal_time: Option<f64>,
    pub elapsed: f64,
    pub strides: usize,
    pub forward_progress: f64,
}

/// Centered-average whole-body motion wrench, in base axes.
pub fn whole_body_motion_wrench(trace: &ExecutionTrace, total_mass: f64, window_s: f64) -> Vec<MotionWrench> {
    if trace.samples.len() < 2 {
        return vec![
            MotionWrench {
                force: Vec3::zeros(),
                torque_about_com: Vec3::zeros(),
                torque_about_base: Vec3::zeros(),
            };
            trace.samples.len()
        ];
    }
    let raw: Vec<MomentumSample> = trace
        .samples
        .iter()
        .map(|s| MomentumSample {
            base_pose: s.base_pose,
            com: s.com,
            com_velocity: s.com_velocity,
            centroidal_momentum: s.centroidal_momentum,
        })
        .collect();
    motion_wrench_series(&raw, total_mass, trace.rate_hz, window_s)
}

/// Wrench the swinging limbs exert on the base, summed, in base axes about the
/// base origin. Zero while every limb is attached.
pub fn swing_induced_wrench(trace: &ExecutionTrace, inertia: &InertiaModel) -> Vec<Wrench> {
    trace
        .samples
        .iter()
        .map(|s| {
            let origin = s.base_pose.translation;
            let mut total = Wrench::zero_at(origin);
            let free: Vec<usize> = (0..NUM_LIMBS).filter(|&l| s.attachment[l] == Attachment::Free).collect();
            if free.is_empty() {
                return Wrench::zero_at(Vec3::zeros());
            }
            let id = inverse_dynamics(inertia, &s.dynamic_state());
            for l in free {
                let w = id.limb_reactions[l].transform_to(&origin);
                total.force += w.force;
                total.torque += w.torque;
            }
            let r = s.base_pose.rotation.inverse();
            Wrench::new(r * total.force, r * total.torque, Vec3::zeros())
        })
        .collect()
}

fn rms_all(values: impl Iterator<Item = JointVector>) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for v in values {
        sq += v.norm_squared();
        n += v.len();
    }
    if n > 0 {
        (sq / n as f64).sqrt()
    } else {
        0.0
    }
}

/// Bookkeeping the trace itself does not carry.
#[derive(Debug, Clone, Default)]
pub struct TrialRecord {
    /// `(duration, score)` of every executed support configuration.
    pub interval_scores: Vec<(f64, f64)>,
    pub strides: usize,
    pub forward_progress: f64,
}

pub fn compute_metrics(trace: &ExecutionTrace, inertia: &InertiaModel, record: &TrialRecord, outcome: Outcome) -> TrialMetrics {
    let wb = whole_body_motion_wrench(trace, inertia.total_mass(), MOTION_WRENCH_WINDOW);
    let swing = swing_induced_wrench(trace, inertia);
    let torques: Vec<JointVector> = trace.samples.iter().map(|s| s.torques).collect();
    let velocities: Vec<JointVector> = trace.samples.iter().map(|s| s.joints.dq).collect();
    let elapsed = trace.duration();
    TrialMetrics {
        outcome,
        normalized_contact_score: normalized_contact_score(&record.interval_scores),
        whole_body_wrench: WrenchStats::of(wb.iter().map(|w| (&w.force, &w.torque_about_com))),
        whole_body_wrench_base: WrenchStats::of(wb.iter().map(|w| (&w.force, &w.torque_about_base))),
        swing_wrench: WrenchStats::of(swing.iter().map(|w| (&w.force, &w.torque))),
        mechanical_work: mechanical_work(&torques, &velocities, 1.0 / trace.rate_hz),
        rms_joint_torque: rms_all(torques.iter().copied()),
        rms_joint_velocity: rms_all(velocities.iter().copied()),
        peak_joint_torque: PeakRms::of(torques.iter().flat_map(|t| t.iter().copied().collect::<Vec<_>>())).peak,
        traversal_time: (outcome == Outcome::Success).then_some(elapsed),
        elapsed,
        strides: record.strides,
        forward_progress: record.forward_progress,
    }
}
