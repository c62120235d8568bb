use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gait::SwingSchedule;
use crate::robot::NUM_LIMBS;
use crate::spatial::{rotation_exp, rotation_log, Pose, Twist, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("duration {duration:.4} s is shorter than the minimum {minimum:.4} s")]
    DurationTooShort { duration: f64, minimum: f64 },
    #[error("swing duration {total:.4} s does not exceed the gripper stages {gripper:.4} s")]
    InsufficientDuration { total: f64, gripper: f64 },
    #[error("time {t} outside [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
}

/// Quintic smoothstep and its first two derivatives on `[0, 1]`.
pub fn quintic(x: f64) -> (f64, f64, f64) {
    let x = x.clamp(0.0, 1.0);
    let x2 = x * x;
    let x3 = x2 * x;
    (
        x3 * (10.0 - 15.0 * x + 6.0 * x2),
        30.0 * x2 * (1.0 - 2.0 * x + x2),
        60.0 * x * (1.0 - 3.0 * x + 2.0 * x2),
    )
}

/// Normalized progress `u(t) ∈ [0, 1]` whose velocity ramps with quintic
/// blends, cruises, and ramps down. Velocity and acceleration vanish at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarProfile {
    pub duration: f64,
    /// Fraction of the duration spent in each blend, in (0, 0.5].
    pub blend_fraction: f64,
}

pub const DEFAULT_BLEND_FRACTION: f64 = 0.25;

impl ScalarProfile {
    pub fn new(duration: f64, blend_fraction: f64) -> Self {
        assert!(blend_fraction > 0.0 && blend_fraction <= 0.5);
        Self {
            duration,
            blend_fraction,
        }
    }

    /// Cruise value of `du/dt`.
    pub fn cruise_rate(&self) -> f64 {
        if self.duration <= 0.0 {
            return 0.0;
        }
        1.0 / (self.duration * (1.0 - self.blend_fraction))
    }

    /// `(u, du/dt, d²u/dt²)` at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let big_t = self.duration;
        if big_t <= 0.0 {
            return (if t >= 0.0 { 1.0 } else { 0.0 }, 0.0, 0.0);
        }
        let t = t.clamp(0.0, big_t);
        let v = self.cruise_rate();
        let tb = self.blend_fraction * big_t;
        // blend: u' = v·q(τ), u = v·tb·(2.5τ⁴ − 3τ⁵ + τ⁶)
        let ramp = |t: f64| {
            let tau = t / tb;
            let (q, dq, _) = quintic(tau);
            let t4 = tau.powi(4);
            let pos = v * tb * t4 * (2.5 - 3.0 * tau + tau * tau);
            (pos, v * q, v * dq / tb)
        };
        if t <= tb {
            ramp(t)
        } else if t >= big_t - tb {
            let (p, dp, ddp) = ramp(big_t - t);
            (1.0 - p, dp, -ddp)
        } else {
            (0.5 * v * tb + v * (t - tb), v, 0.0)
        }
    }
}

/// Shortest duration keeping the peak rate of a `distance` move at or below `v_max`.
pub fn minimum_duration(distance: f64, v_max: f64, blend_fraction: f64) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    distance / (v_max * (1.0 - blend_fraction))
}

/// Pose, world twist and world acceleration (linear, angular) of one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionSample {
    pub pose: Pose,
    pub twist: Twist,
    pub linear_acceleration: Vec3,
    pub angular_acceleration: Vec3,
}

impl MotionSample {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            twist: Twist::zero(),
            linear_acceleration: Vec3::zeros(),
            angular_acceleration: Vec3::zeros(),
        }
    }
}

/// Geodesic base path timed by a blended trapezoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseTrajectory {
    pub start: Pose,
    pub goal: Pose,
    pub profile: ScalarProfile,
}

pub fn base_trajectory(start: &Pose, goal: &Pose, duration: f64, v_max: f64) -> Result<BaseTrajectory, TrajectoryError> {
    base_trajectory_with(start, goal, duration, v_max, DEFAULT_BLEND_FRACTION)
}

pub fn base_trajectory_with(
    start: &Pose,
    goal: &Pose,
    duration: f64,
    v_max: f64,
    blend_fraction: f64,
) -> Result<BaseTrajectory, TrajectoryError> {
    let distance = (goal.translation - start.translation).norm();
    let minimum = minimum_duration(distance, v_max, blend_fraction);
    if duration < minimum * (1.0 - 1e-12) || (duration <= 0.0 && start != goal) {
        return Err(TrajectoryError::DurationTooShort { duration, minimum });
    }
    Ok(BaseTrajectory {
        start: *start,
        goal: *goal,
        profile: ScalarProfile::new(duration, blend_fraction),
    })
}

impl BaseTrajectory {
    pub fn stationary(pose: Pose, duration: f64) -> Self {
        Self {
            start: pose,
            goal: pose,
            profile: ScalarProfile::new(duration, DEFAULT_BLEND_FRACTION),
        }
    }

    pub fn duration(&self) -> f64 {
        self.profile.duration
    }

    pub fn sample(&self, t: f64) -> MotionSample {
        let (u, du, ddu) = self.profile.eval(t);
        let dp = self.goal.translation - self.start.translation;
        let omega = rotation_log(&(self.start.rotation.inverse() * self.goal.rotation));
        let w = self.start.rotation * omega;
        MotionSample {
            pose: Pose::new(
                self.start.rotation * rotation_exp(&(omega * u)),
                self.start.translation + dp * u,
            ),
            twist: Twist::new(dp * du, w * du),
            linear_acceleration: dp * ddu,
            angular_acceleration: w * ddu,
        }
    }
}

/// Swing stages of one limb; `Stance` covers time outside the swing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Stance,
    Release,
    Retreat,
    Transfer,
    Approach,
    Grasp,
}

impl Stage {
    pub fn label(&self) -> &'static str {
        match self {
            Stage::Stance => "stance",
            Stage::Release => "sigma1",
            Stage::Retreat => "sigma2",
            Stage::Transfer => "sigma3",
            Stage::Approach => "sigma4",
            Stage::Grasp => "sigma5",
        }
    }

    /// Stage index 1..=5, or 0 for stance.
    pub fn index(&self) -> usize {
        match self {
            Stage::Stance => 0,
            Stage::Release => 1,
            Stage::Retreat => 2,
            Stage::Transfer => 3,
            Stage::Approach => 4,
            Stage::Grasp => 5,
        }
    }
}

/// Geometric five-stage swing path between two contact frames (world).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwingPath {
    pub current: Pose,
    pub target: Pose,
    pub clearance: f64,
}

const TRANSFER_SEGMENTS: usize = 64;

pub fn swing_path(current: &Pose, target: &Pose, clearance: f64) -> SwingPath {
    assert!(clearance > 0.0, "clearance must be positive");
    SwingPath {
        current: *current,
        target: *target,
        clearance,
    }
}

impl SwingPath {
    pub fn retreat_end(&self) -> Vec3 {
        self.current.translation + self.current.z_axis() * self.clearance
    }

    pub fn approach_start(&self) -> Vec3 {
        self.target.translation + self.target.z_axis() * self.clearance
    }

    fn transfer_log(&self) -> Vec3 {
        rotation_log(&(self.current.rotation.inverse() * self.target.rotation))
    }

    /// Pose and its first two derivatives with respect to the stage
    /// parameter `u ∈ [0, 1]`: (pose, dp, dω, d²p, d²ω) in world frame.
    fn stage_geometry(&self, stage: Stage, u: f64) -> (Pose, Vec3, Vec3, Vec3, Vec3) {
        let c = self.clearance;
        let zero = Vec3::zeros();
        match stage {
            Stage::Retreat => {
                let n = self.current.z_axis();
                let pose = Pose::new(self.current.rotation, self.current.translation + n * (c * u));
                (pose, n * c, zero, zero, zero)
            }
            Stage::Approach => {
                let n = self.target.z_axis();
                let pose = Pose::new(self.target.rotation, self.target.translation + n * (c * (1.0 - u)));
                (pose, -n * c, zero, zero, zero)
            }
            Stage::Transfer => {
                // T(u) = Trans(line(u)) · T_ref(u), T_ref(u) = (R(u), c·R(u)ẑ)
                let omega = self.transfer_log();
                let r = self.current.rotation * rotation_exp(&(omega * u));
                let line = self.current.translation + (self.target.translation - self.current.translation) * u;
                let z = Vec3::z();
                let wz = omega.cross(&z);
                let pos = line + r * z * c;
                let dp = (self.target.translation - self.current.translation) + r * wz * c;
                let ddp = r * omega.cross(&wz) * c;
                let w = self.current.rotation * omega;
                (Pose::new(r, pos), dp, w, ddp, zero)
            }
            Stage::Release | Stage::Stance => (self.current, zero, zero, zero, zero),
            Stage::Grasp => (self.target, zero, zero, zero, zero),
        }
    }

    pub fn stage_pose(&self, stage: Stage, u: f64) -> Pose {
        self.stage_geometry(stage, u).0
    }

    /// Travel lengths of σ2, σ3, σ4 under `translation + ratio·angle`.
    pub fn stage_lengths(&self, length_per_radian: f64) -> [f64; 3] {
        let mut transfer = 0.0;
        let mut prev = self.stage_pose(Stage::Transfer, 0.0).translation;
        for k in 1..=TRANSFER_SEGMENTS {
            let p = self.stage_pose(Stage::Transfer, k as f64 / TRANSFER_SEGMENTS as f64).translation;
            transfer += (p - prev).norm();
            prev = p;
        }
        transfer += length_per_radian * self.transfer_log().norm();
        [self.clearance, transfer, self.clearance]
    }
}

/// A swing path with absolute stage timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedSwing {
    pub path: SwingPath,
    pub start_time: f64,
    /// Durations of σ1..σ5.
    pub stage_durations: [f64; 5],
}

pub fn time_parameterize_swing(
    path: &SwingPath,
    start_time: f64,
    total_duration: f64,
    gripper_times: (f64, f64),
    length_per_radian: f64,
) -> Result<TimedSwing, TrajectoryError> {
    let gripper = gripper_times.0 + gripper_times.1;
    let motion = total_duration - gripper;
    if !(motion > 0.0) {
        return Err(TrajectoryError::InsufficientDuration {
            total: total_duration,
            gripper,
        });
    }
    let lengths = path.stage_lengths(length_per_radian);
    let sum: f64 = lengths.iter().sum();
    let share = |l: f64| motion * l / sum;
    Ok(TimedSwing {
        path: *path,
        start_time,
        stage_durations: [
            gripper_times.0,
            share(lengths[0]),
            share(lengths[1]),
            share(lengths[2]),
            gripper_times.1,
        ],
    })
}

const SWING_STAGES: [Stage; 5] = [Stage::Release, Stage::Retreat, Stage::Transfer, Stage::Approach, Stage::Grasp];

impl TimedSwing {
    pub fn duration(&self) -> f64 {
        self.stage_durations.iter().sum()
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration()
    }

    /// Absolute start time of each stage σ1..σ5.
    pub fn stage_starts(&self) -> [f64; 5] {
        let mut t = self.start_time;
        std::array::from_fn(|k| {
            let s = t;
            t += self.stage_durations[k];
            s
        })
    }

    pub fn stage_at(&self, t: f64) -> Stage {
        self.locate(t).0
    }

    fn locate(&self, t: f64) -> (Stage, f64, f64) {
        if t < self.start_time || t >= self.end_time() {
            return (Stage::Stance, 0.0, 0.0);
        }
        let starts = self.stage_starts();
        for k in (0..5).rev() {
            if t >= starts[k] && self.stage_durations[k] > 0.0 {
                return (SWING_STAGES[k], (t - starts[k]) / self.stage_durations[k], self.stage_durations[k]);
            }
        }
        (Stage::Release, 0.0, 0.0)
    }

    /// World-frame end-effector motion at absolute time `t`.
    pub fn sample(&self, t: f64) -> (Stage, MotionSample) {
        if t < self.start_time {
            return (Stage::Stance, MotionSample::at_rest(self.path.current));
        }
        if t >= self.end_time() {
            return (Stage::Stance, MotionSample::at_rest(self.path.target));
        }
        let (stage, x, d) = self.locate(t);
        let (s, ds, dds) = quintic(x);
        let (pose, dp, dw, ddp, ddw) = self.path.stage_geometry(stage, s);
        let (sd, sdd) = if d > 0.0 { (ds / d, dds / (d * d)) } else { (0.0, 0.0) };
        (
            stage,
            MotionSample {
                pose,
                twist: Twist::new(dp * sd, dw * sd),
                linear_acceleration: ddp * sd * sd + dp * sdd,
                angular_acceleration: ddw * sd * sd + dw * sdd,
            },
        )
    }
}

/// Base motion plus per-limb swings over one stride, `t ∈ [0, duration]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideTrajectory {
    pub base: BaseTrajectory,
    /// World grasp pose of every limb at stride start.
    pub initial_contacts: [Pose; NUM_LIMBS],
    /// `None` for limbs that keep their anchor.
    pub swings: [Option<TimedSwing>; NUM_LIMBS],
    pub schedule: SwingSchedule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbSample {
    pub stage: Stage,
    pub motion: MotionSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub base: MotionSample,
    pub limbs: [LimbSample; NUM_LIMBS],
}

impl StrideTrajectory {
    pub fn duration(&self) -> f64 {
        self.base.duration()
    }

    pub fn final_contacts(&self) -> [Pose; NUM_LIMBS] {
        std::array::from_fn(|l| match &self.swings[l] {
            Some(s) => s.path.target,
            None => self.initial_contacts[l],
        })
    }

    pub fn sample(&self, t: f64) -> Result<TrajectorySample, TrajectoryError> {
        let duration = self.duration();
        if !(t >= 0.0 && t <= duration * (1.0 + 1e-12) + 1e-12) {
            return Err(TrajectoryError::OutOfRange { t, duration });
        }
        Ok(self.sample_clamped(t.min(duration)))
    }

    pub fn sample_clamped(&self, t: f64) -> TrajectorySample {
        // every swing has landed by stride end, whatever the rounding of its own end time
        let t_swing = if t >= self.duration() { f64::INFINITY } else { t };
        TrajectorySample {
            t,
            base: self.base.sample(t),
            limbs: std::array::from_fn(|l| match &self.swings[l] {
                Some(s) => {
                    let (stage, motion) = s.sample(t_swing);
                    LimbSample { stage, motion }
                }
                None => LimbSample {
                    stage: Stage::Stance,
                    motion: MotionSample::at_rest(self.initial_contacts[l]),
                },
            }),
        }
    }

    /// Uniformly sampled CSV: time, base pose, per-limb pose and stage label.
    pub fn write_csv<W: std::io::Write>(&self, out: W, rate_hz: f64) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        let pose_cols = ["x", "y", "z", "qw", "qx", "qy", "qz"];
        header.extend(pose_cols.iter().map(|c| format!("base_{c}")));
        for name in crate::robot::LIMB_NAMES {
            header.extend(pose_cols.iter().map(|c| format!("{name}_{c}")));
            header.push(format!("{name}_stage"));
        }
        w.write_record(&header)?;
        let n = (self.duration() * rate_hz).round() as usize;
        for i in 0..=n {
            let s = self.sample_clamped(i as f64 / rate_hz);
            let mut row = vec![format!("{:.6}", s.t)];
            let push_pose = |row: &mut Vec<String>, p: &Pose| {
                row.extend(p.translation.iter().map(|v| format!("{v:.9}")));
                row.extend(p.quaternion_wxyz().iter().map(|v| format!("{v:.9}")));
            };
            push_pose(&mut row, &s.base.pose);
            for l in &s.limbs {
                push_pose(&mut row, &l.motion.pose);
                row.push(l.stage.label().to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
