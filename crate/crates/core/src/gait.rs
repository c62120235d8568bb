use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{
    contact_config_score, ContactModel, ContactPoint, ContactSet, DirectionPair, ScoreBreakdown, ScoreConfig,
};
use crate::environment::{candidate_anchors, AnchorQuery, Environment, RankedAnchor};
use crate::robot::{limb_side, RobotModel, NUM_LIMBS};
use crate::spatial::{best_fit_plane, frame_from_z_and_x, GeometryError, Plane, Pose, Vec3};
use crate::trajectory::{
    base_trajectory_with, minimum_duration, swing_path, time_parameterize_swing, BaseTrajectory, Stage,
    StrideTrajectory, TimedSwing, TrajectoryError,
};

pub const LF: usize = 0;
pub const RF: usize = 1;
pub const LH: usize = 2;
pub const RH: usize = 3;
pub const AMBLE_ORDER: [usize; 4] = [LF, RH, RF, LH];
pub const TROT_ORDER: [usize; 4] = [LF, RH, RF, LH];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("no candidate anchor for limb {0}")]
    NoCandidates(usize),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("degenerate contact geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("trajectory: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("all plan modifications exhausted after {0} attempts")]
    MotionPlanningFailure(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwingOrderMode {
    Opt,
    Amble,
    Trot,
    Fixed([usize; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Fraction of the shorter swing of each overlapping pair.
    Fraction(f64),
    Opt,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitParams {
    pub swing_order_mode: SwingOrderMode,
    pub overlap_mode: OverlapMode,
    pub stride_length: f64,
    pub base_speed_max: f64,
    /// Peak-free average speed along the σ2–σ4 path metric.
    pub swing_speed_max: f64,
    pub nominal_base_height: f64,
    pub ee_clearance: f64,
    /// Durations of σ1 and σ5.
    pub gripper_stage_durations: (f64, f64),
    /// Largest overlap fraction the opt overlap mode may choose.
    pub max_overlap_fraction: f64,
    pub blend_fraction: f64,
    /// Δx/Δθ: metres of travel equivalent to one radian of rotation.
    pub length_per_radian: f64,
    /// Anchor alternates tried per limb by the plan modification module.
    pub max_anchor_alternates: usize,
    pub plan_modification: bool,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            swing_order_mode: SwingOrderMode::Opt,
            overlap_mode: OverlapMode::Fraction(0.3),
            stride_length: 0.6,
            base_speed_max: 0.15,
            swing_speed_max: 0.85,
            nominal_base_height: 0.8,
            ee_clearance: 0.1,
            gripper_stage_durations: (0.25, 0.25),
            max_overlap_fraction: 0.5,
            blend_fraction: crate::trajectory::DEFAULT_BLEND_FRACTION,
            length_per_radian: 1.0,
            max_anchor_alternates: 5,
            plan_modification: true,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        let positive = [
            ("stride_length", self.stride_length),
            ("base_speed_max", self.base_speed_max),
            ("swing_speed_max", self.swing_speed_max),
            ("nominal_base_height", self.nominal_base_height),
            ("ee_clearance", self.ee_clearance),
            ("length_per_radian", self.length_per_radian),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlanError::InfeasibleSchedule(format!("{name} must be positive")));
            }
        }
        if let OverlapMode::Fraction(f) = self.overlap_mode {
            if !(0.0..1.0).contains(&f) {
                return Err(PlanError::InfeasibleSchedule("overlap fraction must lie in [0, 1)".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.max_overlap_fraction) {
            return Err(PlanError::InfeasibleSchedule("max overlap fraction must lie in [0, 1]".into()));
        }
        let (g1, g5) = self.gripper_stage_durations;
        if !(g1 >= 0.0 && g5 >= 0.0) {
            return Err(PlanError::InfeasibleSchedule("gripper stage durations must be nonnegative".into()));
        }
        if let SwingOrderMode::Fixed(order) = self.swing_order_mode {
            if !is_permutation(&order) {
                return Err(PlanError::InfeasibleSchedule("fixed order must be a permutation".into()));
            }
        }
        Ok(())
    }

    /// Whether the modification module may change the swing order.
    pub fn order_adjustable(&self) -> bool {
        self.swing_order_mode == SwingOrderMode::Opt
    }

    /// Orders the planner may choose from, in enumeration order.
    pub fn order_candidates(&self) -> Vec<[usize; 4]> {
        match self.swing_order_mode {
            SwingOrderMode::Opt => all_permutations(),
            SwingOrderMode::Amble => vec![AMBLE_ORDER],
            SwingOrderMode::Trot => vec![TROT_ORDER],
            SwingOrderMode::Fixed(o) => vec![o],
        }
    }
}

fn is_permutation(order: &[usize; 4]) -> bool {
    let mut seen = [false; 4];
    order.iter().all(|&l| l < 4 && !std::mem::replace(&mut seen[l], true))
}

/// All 24 limb orders in lexicographic order.
pub fn all_permutations() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let o = [a, b, c, d];
                    if is_permutation(&o) {
                        out.push(o);
                    }
                }
            }
        }
    }
    out
}

/// Current attachments and base pose at the start of a stride.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerState {
    pub base_pose: Pose,
    pub anchors: [usize; NUM_LIMBS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideGoal {
    pub target_anchor_per_limb: [Option<usize>; NUM_LIMBS],
    pub target_base_pose: Pose,
    pub contact_plane: Plane,
}

impl StrideGoal {
    pub fn anchor(&self, limb: usize, state: &PlannerState) -> usize {
        self.target_anchor_per_limb[limb].unwrap_or(state.anchors[limb])
    }
}

/// Ranked reachable anchors for every limb, measured from its mount.
pub fn stride_candidates(
    env: &Environment,
    state: &PlannerState,
    model: &RobotModel,
    params: &GaitParams,
) -> Result<[Vec<RankedAnchor>; NUM_LIMBS], PlanError> {
    let heading = Vec3::x();
    let mut out: [Vec<RankedAnchor>; NUM_LIMBS] = Default::default();
    for limb in 0..NUM_LIMBS {
        let mount = state.base_pose.compose(&model.limb_mount_poses[limb]);
        let query = AnchorQuery {
            side: limb_side(limb),
            mount_world: mount,
            search_center: mount.translation,
            heading,
            stride_length: params.stride_length,
            limb_reach: model.limb_reach(limb),
        };
        out[limb] = candidate_anchors(env, &query);
        if out[limb].is_empty() {
            return Err(PlanError::NoCandidates(limb));
        }
    }
    Ok(out)
}

/// Base goal from the chosen anchors: z along the best-fit plane normal,
/// heading bisecting the left and right hind-to-front directions, origin
/// `nominal_base_height` above the contact centroid.
pub fn goal_from_anchors(
    env: &Environment,
    anchors: [usize; NUM_LIMBS],
    current_base: &Pose,
    params: &GaitParams,
) -> Result<StrideGoal, PlanError> {
    let points: Vec<Vec3> = anchors.iter().map(|&a| env.anchor(a).position()).collect();
    let up = current_base.z_axis();
    let plane = best_fit_plane(&points, Some(&up))?;
    let n = plane.normal;
    let project = |v: Vec3| v - n * n.dot(&v);
    let left = project(points[LF] - points[LH]);
    let right = project(points[RF] - points[RH]);
    let unit = |v: Vec3| if v.norm() > 1e-9 { v.normalize() } else { project(current_base.x_axis()).normalize() };
    let heading = unit(unit(left) + unit(right));
    let rotation = frame_from_z_and_x(&n, &heading).ok_or_else(|| GeometryError::DegenerateGeometry("heading parallel to contact normal".into()))?;
    Ok(StrideGoal {
        target_anchor_per_limb: anchors.map(Some),
        target_base_pose: Pose::new(rotation, plane.centroid + n * params.nominal_base_height),
        contact_plane: plane,
    })
}

/// Top-ranked anchor per limb and the resulting base goal.
pub fn plan_stride_goal(
    env: &Environment,
    state: &PlannerState,
    model: &RobotModel,
    params: &GaitParams,
) -> Result<StrideGoal, PlanError> {
    let candidates = stride_candidates(env, state, model, params)?;
    goal_from_anchors(env, std::array::from_fn(|l| candidates[l][0].anchor), &state.base_pose, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingSchedule {
    /// Limbs by swing position.
    pub order: [usize; 4],
    /// Per limb, seconds from stride start; zero duration for limbs that stay attached.
    pub start_times: [f64; NUM_LIMBS],
    pub durations: [f64; NUM_LIMBS],
    pub start_phase: [f64; NUM_LIMBS],
    pub end_phase: [f64; NUM_LIMBS],
    /// Overlap of positions (1,2) and (3,4), seconds.
    pub overlaps: [f64; 2],
    pub overlap_fraction: f64,
    pub stride_duration: f64,
    /// Stretch applied to swing motion so the swings fill the stride.
    pub motion_scale: f64,
    pub gripper_times: (f64, f64),
}

impl SwingSchedule {
    pub fn swings(&self, limb: usize) -> bool {
        self.durations[limb] > 0.0
    }

    pub fn end_time(&self, limb: usize) -> f64 {
        self.start_times[limb] + self.durations[limb]
    }
}

/// Overlap fraction implied by the order and overlap modes.
fn overlap_fraction(params: &GaitParams, d: &[f64; 4], base_time: f64) -> f64 {
    if params.swing_order_mode == SwingOrderMode::Trot {
        return 1.0;
    }
    match params.overlap_mode {
        OverlapMode::Fraction(f) => f,
        OverlapMode::None => 0.0,
        OverlapMode::Opt => {
            let total: f64 = d.iter().sum();
            let pairs = d[0].min(d[1]) + d[2].min(d[3]);
            if total <= base_time || pairs <= 0.0 {
                0.0
            } else {
                ((total - base_time) / pairs).clamp(0.0, params.max_overlap_fraction)
            }
        }
    }
}

/// `distances[limb]` is the σ2–σ4 path length; zero means the limb stays attached.
pub fn build_schedule(
    params: &GaitParams,
    order: [usize; 4],
    distances: &[f64; NUM_LIMBS],
    base_displacement: f64,
) -> Result<SwingSchedule, PlanError> {
    if !is_permutation(&order) {
        return Err(PlanError::InfeasibleSchedule("order is not a permutation".into()));
    }
    if distances.iter().any(|d| !(*d >= 0.0 && d.is_finite())) || !(base_displacement >= 0.0) {
        return Err(PlanError::InfeasibleSchedule("distances must be finite and nonnegative".into()));
    }
    if !(params.swing_speed_max > 0.0) || !(params.base_speed_max > 0.0) {
        return Err(PlanError::InfeasibleSchedule("speed limits must be positive".into()));
    }
    let (g1, g5) = params.gripper_stage_durations;
    let grip = g1 + g5;
    // position-indexed gripper and motion times
    let g: [f64; 4] = std::array::from_fn(|k| if distances[order[k]] > 0.0 { grip } else { 0.0 });
    let m: [f64; 4] = std::array::from_fn(|k| distances[order[k]] / params.swing_speed_max);
    let durations_at = |scale: f64| -> [f64; 4] { std::array::from_fn(|k| g[k] + scale * m[k]) };
    let base_time = minimum_duration(base_displacement, params.base_speed_max, params.blend_fraction);
    let f = overlap_fraction(params, &durations_at(1.0), base_time);
    let critical = |d: &[f64; 4]| {
        let a12 = f * d[0].min(d[1]);
        let a34 = f * d[2].min(d[3]);
        d.iter().sum::<f64>() - a12 - a34
    };
    let cp1 = critical(&durations_at(1.0));
    let stride = base_time.max(cp1);
    let cp0 = critical(&durations_at(0.0));
    let scale = if stride > cp1 && cp1 > cp0 { (stride - cp0) / (cp1 - cp0) } else { 1.0 };
    if !scale.is_finite() || !stride.is_finite() {
        return Err(PlanError::InfeasibleSchedule("stride duration is not finite".into()));
    }
    let d = durations_at(scale);
    let a12 = f * d[0].min(d[1]);
    let a34 = f * d[2].min(d[3]);
    let s1 = 0.0;
    let s2 = s1 + d[0] - a12;
    let s3 = s2 + d[1];
    let s4 = s3 + d[2] - a34;
    let starts = [s1, s2, s3, s4];
    let mut start_times = [0.0; NUM_LIMBS];
    let mut durations = [0.0; NUM_LIMBS];
    for k in 0..4 {
        start_times[order[k]] = starts[k];
        durations[order[k]] = d[k];
    }
    let phase = |t: f64| if stride > 0.0 { (t / stride).clamp(0.0, 1.0) } else { 0.0 };
    Ok(SwingSchedule {
        order,
        start_times,
        durations,
        start_phase: start_times.map(phase),
        end_phase: std::array::from_fn(|l| phase(start_times[l] + durations[l])),
        overlaps: [a12, a34],
        overlap_fraction: f,
        stride_duration: stride,
        motion_scale: scale,
        gripper_times: (g1, g5),
    })
}

/// A time interval with a fixed set of attached limbs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportInterval {
    pub start: f64,
    pub end: f64,
    pub swinging: [bool; NUM_LIMBS],
    /// Limbs already moved to their target anchor.
    pub moved: [bool; NUM_LIMBS],
}

impl SupportInterval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

pub fn support_intervals(schedule: &SwingSchedule) -> Vec<SupportInterval> {
    let mut cuts = vec![0.0, schedule.stride_duration];
    for l in 0..NUM_LIMBS {
        if schedule.swings(l) {
            cuts.push(schedule.start_times[l]);
            cuts.push(schedule.end_time(l));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts.windows(2)
        .filter(|w| w[1] - w[0] > 1e-12)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            SupportInterval {
                start: w[0],
                end: w[1],
                swinging: std::array::from_fn(|l| {
                    schedule.swings(l) && mid >= schedule.start_times[l] && mid < schedule.end_time(l)
                }),
                moved: std::array::from_fn(|l| schedule.swings(l) && mid >= schedule.end_time(l)),
            }
        })
        .collect()
}

/// Swing paths and base motion of one stride for a given order.
pub fn stride_trajectory(
    env: &Environment,
    state: &PlannerState,
    goal: &StrideGoal,
    order: [usize; 4],
    params: &GaitParams,
) -> Result<StrideTrajectory, PlanError> {
    let initial: [Pose; NUM_LIMBS] = std::array::from_fn(|l| env.anchor(state.anchors[l]).grasp_pose);
    let paths: [Option<_>; NUM_LIMBS] = std::array::from_fn(|l| {
        let target = goal.anchor(l, state);
        (target != state.anchors[l]).then(|| swing_path(&initial[l], &env.anchor(target).grasp_pose, params.ee_clearance))
    });
    let distances: [f64; NUM_LIMBS] = std::array::from_fn(|l| {
        paths[l].map_or(0.0, |p| p.stage_lengths(params.length_per_radian).iter().sum())
    });
    let displacement = (goal.target_base_pose.translation - state.base_pose.translation).norm();
    let schedule = build_schedule(params, order, &distances, displacement)?;
    let base = base_trajectory_with(
        &state.base_pose,
        &goal.target_base_pose,
        schedule.stride_duration,
        params.base_speed_max,
        params.blend_fraction,
    )?;
    let mut swings: [Option<TimedSwing>; NUM_LIMBS] = [None; NUM_LIMBS];
    for l in 0..NUM_LIMBS {
        if let Some(p) = &paths[l] {
            swings[l] = Some(time_parameterize_swing(
                p,
                schedule.start_times[l],
                schedule.durations[l],
                params.gripper_stage_durations,
                params.length_per_radian,
            )?);
        }
    }
    Ok(StrideTrajectory {
        base,
        initial_contacts: initial,
        swings,
        schedule,
    })
}

fn unit_or(v: Vec3, fallback: Vec3) -> Vec3 {
    if v.norm() > 1e-9 {
        v.normalize()
    } else {
        fallback
    }
}

/// Base-motion disturbance directions: ± base displacement, with the
/// rotation axis (or the moment of the displacement about `pivot`).
pub fn base_directions(base: &BaseTrajectory, pivot: &Vec3) -> Vec<DirectionPair> {
    let up = base.start.z_axis();
    let d = base.goal.translation - base.start.translation;
    let uf = unit_or(d, base.start.x_axis());
    let rot = crate::spatial::rotation_log(&(base.goal.rotation * base.start.rotation.inverse()));
    let ut = if rot.norm() > 1e-6 {
        rot.normalize()
    } else {
        unit_or((base.start.translation - pivot).cross(&uf), up)
    };
    vec![DirectionPair::new(uf, ut), DirectionPair::new(-uf, -ut)]
}

/// Swing disturbance directions: ± each swinging limb's displacement, with
/// the moment it induces about the base origin.
pub fn swing_directions(traj: &StrideTrajectory, swinging: &[bool; NUM_LIMBS], base_origin: &Vec3) -> Vec<DirectionPair> {
    let mut out = Vec::new();
    for (l, s) in traj.swings.iter().enumerate() {
        let (true, Some(s)) = (swinging[l], s) else { continue };
        let d = s.path.target.translation - s.path.current.translation;
        let uf = unit_or(d, s.path.current.z_axis());
        let mid = 0.5 * (s.path.target.translation + s.path.current.translation);
        let ut = unit_or((mid - base_origin).cross(&uf), traj.base.start.z_axis());
        out.push(DirectionPair::new(uf, ut));
        out.push(DirectionPair::new(-uf, -ut));
    }
    out
}

/// Contact set active during `interval`.
pub fn interval_contacts(
    env: &Environment,
    state: &PlannerState,
    goal: &StrideGoal,
    interval: &SupportInterval,
    model: ContactModel,
) -> ContactSet {
    let contacts = (0..NUM_LIMBS)
        .filter(|&l| !interval.swinging[l])
        .map(|l| {
            let a = if interval.moved[l] { goal.anchor(l, state) } else { state.anchors[l] };
            ContactPoint::new(l, env.anchor(a).grasp_pose)
        })
        .collect();
    ContactSet { contacts, model }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScore {
    pub start: f64,
    pub end: f64,
    pub contacts: usize,
    pub score: ScoreBreakdown,
}

/// Per-interval configuration scores of a planned stride.
pub fn score_stride(
    env: &Environment,
    state: &PlannerState,
    goal: &StrideGoal,
    traj: &StrideTrajectory,
    contact_model: ContactModel,
    score: &ScoreConfig,
) -> Vec<IntervalScore> {
    support_intervals(&traj.schedule)
        .iter()
        .map(|iv| {
            let set = interval_contacts(env, state, goal, iv, contact_model);
            let base = traj.base.sample(0.5 * (iv.start + iv.end)).pose.translation;
            let centroid = set.contacts.iter().fold(Vec3::zeros(), |a, c| a + c.position) / set.len().max(1) as f64;
            let base_dirs = base_directions(&traj.base, &centroid);
            let mut swing_dirs = swing_directions(traj, &iv.swinging, &base);
            if swing_dirs.is_empty() {
                swing_dirs = base_dirs.clone();
            }
            let s = contact_config_score(&set, score, &swing_dirs, &base_dirs, &base).unwrap_or_default();
            IntervalScore {
                start: iv.start,
                end: iv.end,
                contacts: set.len(),
                score: s,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderValue {
    pub minimum: f64,
    pub weighted_mean: f64,
}

impl OrderValue {
    pub fn of(intervals: &[(f64, f64)]) -> Self {
        let total: f64 = intervals.iter().map(|(d, _)| d).sum();
        let minimum = intervals.iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        let weighted_mean = if total > 0.0 {
            intervals.iter().map(|(d, s)| d * s).sum::<f64>() / total
        } else {
            0.0
        };
        Self {
            minimum: if minimum.is_finite() { minimum } else { 0.0 },
            weighted_mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedOrder {
    pub order: [usize; 4],
    pub value: OrderValue,
}

/// Ranks candidate orders by (minimum score, duration-weighted mean) descending,
/// ties broken lexicographically. `evaluate` returns (duration, score) per
/// support interval, or `None` when the order cannot be scheduled.
pub fn optimize_swing_order<F>(candidates: &[[usize; 4]], mut evaluate: F) -> Vec<RankedOrder>
where
    F: FnMut(&[usize; 4]) -> Option<Vec<(f64, f64)>>,
{
    let mut ranked: Vec<RankedOrder> = candidates
        .iter()
        .filter_map(|o| {
            evaluate(o).map(|iv| RankedOrder {
                order: *o,
                value: OrderValue::of(&iv),
            })
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.value
            .minimum
            .total_cmp(&a.value.minimum)
            .then(b.value.weighted_mean.total_cmp(&a.value.weighted_mean))
            .then(a.order.cmp(&b.order))
    });
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    KeyStageIk,
    NearSingular,
    DenseIk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureInfo {
    pub limb: usize,
    pub stage: Stage,
    pub time: f64,
    pub kind: FailureKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modification {
    NextOrder([usize; 4]),
    NextAnchor { limb: usize, anchor: usize },
}

/// Retry state of the plan modification module for one stride.
#[derive(Debug, Clone, PartialEq)]
pub struct StrideSearch {
    pub candidates: [Vec<RankedAnchor>; NUM_LIMBS],
    pub choice: [usize; NUM_LIMBS],
    pub ranking: Vec<RankedOrder>,
    pub order_index: usize,
    pub attempts: usize,
}

/// Upper bound on modification attempts per stride (24 orders × 5 anchors × 4 limbs).
pub const MODIFICATION_CAP: usize = 24 * 5 * 4;

impl StrideSearch {
    pub fn new(candidates: [Vec<RankedAnchor>; NUM_LIMBS]) -> Self {
        Self {
            candidates,
            choice: [0; NUM_LIMBS],
            ranking: Vec::new(),
            order_index: 0,
            attempts: 0,
        }
    }

    pub fn anchors(&self) -> [usize; NUM_LIMBS] {
        std::array::from_fn(|l| self.candidates[l][self.choice[l]].anchor)
    }

    pub fn order(&self) -> Option<[usize; 4]> {
        self.ranking.get(self.order_index).map(|r| r.order)
    }
}

/// Next modification after `failure`: the next-best order while any remain
/// (opt mode only), then the next-ranked anchor of the failing limb. After an
/// anchor change the caller re-ranks orders into `search.ranking`.
pub fn modify_plan(search: &mut StrideSearch, failure: &FailureInfo, params: &GaitParams) -> Result<Modification, PlanError> {
    search.attempts += 1;
    if !params.plan_modification || search.attempts > MODIFICATION_CAP {
        return Err(PlanError::MotionPlanningFailure(search.attempts));
    }
    if params.order_adjustable() && search.order_index + 1 < search.ranking.len() {
        search.order_index += 1;
        return Ok(Modification::NextOrder(search.ranking[search.order_index].order));
    }
    let l = failure.limb;
    let limit = search.candidates[l].len().min(params.max_anchor_alternates + 1);
    if search.choice[l] + 1 < limit {
        search.choice[l] += 1;
        search.order_index = 0;
        search.ranking.clear();
        return Ok(Modification::NextAnchor {
            limb: l,
            anchor: search.candidates[l][search.choice[l]].anchor,
        });
    }
    Err(PlanError::MotionPlanningFailure(search.attempts))
}

/// Audit record of one planned stride.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StridePlanRecord {
    pub stride: usize,
    pub anchors: [usize; NUM_LIMBS],
    pub base_pose: Pose,
    pub order: [usize; 4],
    pub schedule: SwingSchedule,
    pub order_value: OrderValue,
    pub intervals: Vec<IntervalScore>,
    pub modifications: usize,
}
