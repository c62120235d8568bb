//! Trial execution, parameter sweeps and paired statistical comparison.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::contact::ScoreConfig;
use crate::dynamics::InertiaModel;
use crate::environment::{generate_environment, Environment, EnvironmentError, EnvironmentSpec};
use crate::gait::{
    goal_from_anchors, modify_plan, optimize_swing_order, score_stride, stride_candidates, stride_trajectory, FailureInfo,
    FailureKind, GaitParams, OrderValue, OverlapMode, PlanError, PlannerState, StridePlanRecord, StrideSearch,
    SwingOrderMode,
};
use crate::metrics::{compute_metrics, Outcome, TrialMetrics, TrialRecord};
use crate::robot::{limb_side, IkOptions, JointState, JointVector, Morphology, RobotModel, JOINTS_PER_LIMB, NUM_LIMBS};
use crate::spatial::Twist;
use crate::trajectory::{Stage, StrideTrajectory};
use crate::whole_body::{
    coordinate_stride, execute_stride, nominal_seeds, solve_limb, Attachment, ExecutionConfig, ExecutionError,
    ExecutionTrace, JointTrajectory, RobotState,
};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const BASELINE_LABEL: &str = "baseline";
/// Significance level of every paired comparison.
pub const ALPHA: f64 = 0.05;
/// Reported p for zero-variance, nonzero-mean deltas: the true value is below it.
pub const P_SENTINEL: f64 = f64::MIN_POSITIVE;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

/// Everything a single trial depends on besides the environment and morphology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSettings {
    pub params: GaitParams,
    pub execution: ExecutionConfig,
    pub score: ScoreConfig,
    /// Forward base travel that counts as a completed traversal (m).
    pub target_distance: f64,
}

impl Default for TrialSettings {
    fn default() -> Self {
        Self {
            params: GaitParams::default(),
            execution: ExecutionConfig::default(),
            score: ScoreConfig::default(),
            target_distance: 10.0,
        }
    }
}

/// A stride that passed planning, coordination and order selection.
#[derive(Debug, Clone)]
pub struct PlannedStride {
    pub record: StridePlanRecord,
    pub trajectory: StrideTrajectory,
    pub joints: JointTrajectory,
}

fn synthetic_failure(limb: usize) -> FailureInfo {
    FailureInfo {
        limb,
        stage: Stage::Stance,
        time: 0.0,
        kind: FailureKind::KeyStageIk,
    }
}

/// Plans the next stride from `state`: anchor candidates, order ranking by
/// contact score, IK coordination, and plan modification on failure.
pub fn plan_next_stride(
    env: &Environment,
    model: &RobotModel,
    state: &RobotState,
    settings: &TrialSettings,
    stride: usize,
) -> Result<PlannedStride, PlanError> {
    let params = &settings.params;
    let anchors = state.anchors().expect("strides start fully attached");
    let ps = PlannerState {
        base_pose: state.base_pose,
        anchors,
    };
    let mut search = StrideSearch::new(stride_candidates(env, &ps, model, params)?);
    let candidates = params.order_candidates();
    let ik = IkOptions::default();
    let model_contact = settings.execution.contact_model;
    loop {
        let goal = match goal_from_anchors(env, search.anchors(), &state.base_pose, params) {
            Ok(g) => g,
            Err(_) => {
                let limb = search.attempts % NUM_LIMBS;
                modify_plan(&mut search, &synthetic_failure(limb), params)?;
                continue;
            }
        };
        if search.ranking.is_empty() {
            search.ranking = optimize_swing_order(&candidates, |order| {
                let traj = stride_trajectory(env, &ps, &goal, *order, params).ok()?;
                let scores = score_stride(env, &ps, &goal, &traj, model_contact, &settings.score);
                Some(scores.iter().map(|s| (s.end - s.start, s.score.total)).collect())
            });
            if search.ranking.is_empty() {
                let limb = search.attempts % NUM_LIMBS;
                search.order_index = 0;
                modify_plan(&mut search, &synthetic_failure(limb), params)?;
                continue;
            }
        }
        let ranked = search.ranking[search.order_index];
        let traj = stride_trajectory(env, &ps, &goal, ranked.order, params)?;
        match coordinate_stride(model, &goal, &traj, state, settings.execution.playback_rate_hz, &ik) {
            Ok(joints) => {
                let intervals = score_stride(env, &ps, &goal, &traj, model_contact, &settings.score);
                let record = StridePlanRecord {
                    stride,
                    anchors: std::array::from_fn(|l| goal.anchor(l, &ps)),
                    base_pose: goal.target_base_pose,
                    order: ranked.order,
                    schedule: traj.schedule.clone(),
                    order_value: OrderValue::of(&intervals.iter().map(|s| (s.end - s.start, s.score.total)).collect::<Vec<_>>()),
                    intervals,
                    modifications: search.attempts,
                };
                return Ok(PlannedStride {
                    record,
                    trajectory: traj,
                    joints,
                });
            }
            Err(e) => {
                modify_plan(&mut search, &e.failure(), params)?;
            }
        }
    }
}

/// Pair whose left handrail lies closest to forward position `x`.
fn pair_near(env: &Environment, x: f64) -> Option<usize> {
    (0..env.pair_count()).min_by(|&a, &b| {
        let da = (env.center_anchor(a, limb_side(0)).map_or(f64::INFINITY, |h| h.position().x) - x).abs();
        let db = (env.center_anchor(b, limb_side(0)).map_or(f64::INFINITY, |h| h.position().x) - x).abs();
        da.total_cmp(&db).then(a.cmp(&b))
    })
}

/// Fully attached starting posture: hind limbs on the second pair, front limbs
/// on the pair one nominal stance length ahead, base at the nominal height.
pub fn initial_state(env: &Environment, model: &RobotModel, params: &GaitParams) -> Result<RobotState, PlanError> {
    let first = |p: usize| env.center_anchor(p, limb_side(0)).map(|a| a.position().x);
    let stance = 2.0 * model.limb_mount_poses[0].translation.x.abs();
    let mut tries = Vec::new();
    for hind in [1usize, 0, 2] {
        let Some(xh) = first(hind) else { continue };
        if let Some(front) = pair_near(env, xh + stance) {
            for f in [front, front + 1, front.saturating_sub(1)] {
                if f > hind && f < env.pair_count() && !tries.contains(&(hind, f)) {
                    tries.push((hind, f));
                }
            }
        }
    }
    for (hind, front) in tries {
        let pairs = [front, front, hind, hind];
        let Some(anchors) = (0..NUM_LIMBS)
            .map(|l| env.center_anchor(pairs[l], limb_side(l)).map(|a| a.id))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let anchors: [usize; NUM_LIMBS] = [anchors[0], anchors[1], anchors[2], anchors[3]];
        let Ok(goal) = goal_from_anchors(env, anchors, &crate::spatial::Pose::identity(), params) else {
            continue;
        };
        let base = goal.target_base_pose;
        let mut q = JointVector::zeros();
        let solved = (0..NUM_LIMBS).all(|l| {
            let target = base.inverse().compose(&env.anchor(anchors[l]).grasp_pose);
            nominal_seeds(model.morphology()).iter().any(|seed| {
                match solve_limb(model, l, &target, seed, &IkOptions::default()) {
                    Ok(ql) => {
                        q.fixed_rows_mut::<JOINTS_PER_LIMB>(l * JOINTS_PER_LIMB).copy_from(&ql);
                        true
                    }
                    Err(_) => false,
                }
            })
        });
        if solved {
            return Ok(RobotState {
                base_pose: base,
                base_twist: Twist::zero(),
                joints: JointState::at_rest(q),
                attachment: anchors.map(Attachment::Attached),
                time: 0.0,
            });
        }
    }
    Err(PlanError::NoCandidates(0))
}

/// Result of one traversal attempt.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub metrics: TrialMetrics,
    pub trace: ExecutionTrace,
    pub plans: Vec<StridePlanRecord>,
    /// Cause of a non-successful outcome.
    pub failure: Option<String>,
}

/// Plans and executes strides until the base has advanced `target_distance`,
/// planning fails, or the monitor pauses the task.
pub fn run_trial(env: &Environment, morphology: Morphology, settings: &TrialSettings) -> TrialRun {
    let model = RobotModel::table_defaults(morphology);
    let inertia = InertiaModel::from_model(&model).expect("default robot model is valid");
    let mut trace = ExecutionTrace::new(settings.execution.playback_rate_hz);
    let mut record = TrialRecord::default();
    let mut plans = Vec::new();
    let finish = |trace: ExecutionTrace, record: TrialRecord, plans, outcome, failure: Option<String>| {
        let metrics = compute_metrics(&trace, &inertia, &record, outcome);
        TrialRun {
            metrics,
            trace,
            plans,
            failure,
        }
    };
    if let Err(e) = settings.params.validate() {
        return finish(trace, record, plans, Outcome::PlanFailure, Some(e.to_string()));
    }
    let mut state = match initial_state(env, &model, &settings.params) {
        Ok(s) => s,
        Err(e) => return finish(trace, record, plans, Outcome::PlanFailure, Some(format!("initial placement: {e}"))),
    };
    let start_x = state.base_pose.translation.x;
    let max_strides = (3.0 * settings.target_distance / settings.params.stride_length).ceil() as usize + 10;
    let mut stalled = 0;
    for stride in 0..max_strides {
        let progress = state.base_pose.translation.x - start_x;
        record.forward_progress = progress;
        if progress >= settings.target_distance {
            return finish(trace, record, plans, Outcome::Success, None);
        }
        let planned = match plan_next_stride(env, &model, &state, settings, stride) {
            Ok(p) => p,
            Err(e) => return finish(trace, record, plans, Outcome::PlanFailure, Some(format!("stride {stride}: {e}"))),
        };
        match execute_stride(&inertia, &planned.joints, env, &settings.execution, &mut trace, &state) {
            Ok(next) => {
                let moved = next.base_pose.translation.x - state.base_pose.translation.x;
                stalled = if moved < 1e-3 { stalled + 1 } else { 0 };
                state = next;
                record.strides += 1;
                record
                    .interval_scores
                    .extend(planned.record.intervals.iter().map(|s| (s.end - s.start, s.score.total)));
                plans.push(planned.record);
                if stalled >= 3 {
                    return finish(trace, record, plans, Outcome::PlanFailure, Some("no forward progress".into()));
                }
            }
            Err(e) => {
                let outcome = match e {
                    ExecutionError::MonitorPause { .. } => Outcome::Instability,
                    ExecutionError::LimitViolation { .. } => Outcome::Instability,
                };
                plans.push(planned.record);
                return finish(trace, record, plans, outcome, Some(format!("stride {stride}: {e}")));
            }
        }
    }
    record.forward_progress = state.base_pose.translation.x - start_x;
    let outcome = if record.forward_progress >= settings.target_distance {
        Outcome::Success
    } else {
        Outcome::PlanFailure
    };
    let failure = (outcome != Outcome::Success).then(|| "stride budget exhausted".to_string());
    finish(trace, record, plans, outcome, failure)
}

/// Plans up to `max_strides` strides assuming each executes exactly as planned.
pub fn plan_trial(
    env: &Environment,
    morphology: Morphology,
    settings: &TrialSettings,
    max_strides: usize,
) -> (Vec<StridePlanRecord>, Option<PlanError>) {
    let model = RobotModel::table_defaults(morphology);
    let mut state = match initial_state(env, &model, &settings.params) {
        Ok(s) => s,
        Err(e) => return (Vec::new(), Some(e)),
    };
    let start_x = state.base_pose.translation.x;
    let mut plans = Vec::new();
    for stride in 0..max_strides {
        if state.base_pose.translation.x - start_x >= settings.target_distance {
            break;
        }
        match plan_next_stride(env, &model, &state, settings, stride) {
            Ok(p) => {
                let last = p.joints.samples.last().expect("joint trajectory is never empty");
                state = RobotState {
                    base_pose: last.base.pose,
                    base_twist: Twist::zero(),
                    joints: JointState::at_rest(last.joints.q),
                    attachment: p.joints.target_anchors.map(Attachment::Attached),
                    time: state.time + p.trajectory.duration(),
                };
                plans.push(p.record);
            }
            Err(e) => return (plans, Some(e)),
        }
    }
    (plans, None)
}

/// A one-parameter change relative to the baseline gait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "parameter", content = "value")]
pub enum ParamDelta {
    SwingOrder(SwingOrderMode),
    Overlap(OverlapMode),
    StrideLength(f64),
    BaseSpeed(f64),
    BaseHeight(f64),
}

impl ParamDelta {
    pub fn apply(&self, baseline: &GaitParams) -> GaitParams {
        let mut p = baseline.clone();
        match *self {
            ParamDelta::SwingOrder(m) => p.swing_order_mode = m,
            ParamDelta::Overlap(m) => p.overlap_mode = m,
            ParamDelta::StrideLength(v) => p.stride_length = v,
            ParamDelta::BaseSpeed(v) => p.base_speed_max = v,
            ParamDelta::BaseHeight(v) => p.nominal_base_height = v,
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub delta: ParamDelta,
}

impl Variant {
    pub fn new(label: &str, delta: ParamDelta) -> Self {
        Self {
            label: label.to_string(),
            delta,
        }
    }
}

/// The seven one-at-a-time variants of the evaluation.
pub fn standard_variants() -> Vec<Variant> {
    vec![
        Variant::new("amble", ParamDelta::SwingOrder(SwingOrderMode::Amble)),
        Variant::new("trot", ParamDelta::SwingOrder(SwingOrderMode::Trot)),
        Variant::new("overlap_opt", ParamDelta::Overlap(OverlapMode::Opt)),
        Variant::new("overlap_50", ParamDelta::Overlap(OverlapMode::Fraction(0.5))),
        Variant::new("stride_0.3", ParamDelta::StrideLength(0.3)),
        Variant::new("speed_0.10", ParamDelta::BaseSpeed(0.10)),
        Variant::new("height_0.6", ParamDelta::BaseHeight(0.6)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Template for every environment; its seed is replaced per trial.
    pub environment: EnvironmentSpec,
    pub seeds: Vec<u64>,
    pub morphologies: Vec<Morphology>,
    pub baseline: GaitParams,
    pub variants: Vec<Variant>,
    pub execution: ExecutionConfig,
    pub score: ScoreConfig,
    pub target_distance: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            environment: EnvironmentSpec::default(),
            seeds: (0..100).collect(),
            morphologies: vec![Morphology::Ypp, Morphology::Rpp],
            baseline: GaitParams::default(),
            variants: standard_variants(),
            execution: ExecutionConfig::default(),
            score: ScoreConfig::default(),
            target_distance: 10.0,
            output_dir: None,
        }
    }
}

/// One (label, gait) condition of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub params: GaitParams,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.seeds.is_empty() || self.morphologies.is_empty() {
            return bad("at least one seed and one morphology are required".into());
        }
        if !(self.target_distance > 0.0) {
            return bad("target_distance must be positive".into());
        }
        self.environment.validate()?;
        if let Err(e) = self.baseline.validate() {
            return bad(format!("baseline: {e}"));
        }
        let mut labels = vec![BASELINE_LABEL];
        for v in &self.variants {
            if labels.contains(&v.label.as_str()) {
                return bad(format!("duplicate condition label {:?}", v.label));
            }
            labels.push(&v.label);
            let p = v.delta.apply(&self.baseline);
            if p == self.baseline {
                return bad(format!("variant {:?} does not change the baseline", v.label));
            }
            if let Err(e) = p.validate() {
                return bad(format!("variant {:?}: {e}", v.label));
            }
        }
        Ok(())
    }

    /// Baseline first, then variants in configured order.
    pub fn conditions(&self) -> Vec<Condition> {
        std::iter::once(Condition {
            label: BASELINE_LABEL.to_string(),
            params: self.baseline.clone(),
        })
        .chain(self.variants.iter().map(|v| Condition {
            label: v.label.clone(),
            params: v.delta.apply(&self.baseline),
        }))
        .collect()
    }

    pub fn settings(&self, params: &GaitParams) -> TrialSettings {
        TrialSettings {
            params: params.clone(),
            execution: self.execution.clone(),
            score: self.score.clone(),
            target_distance: self.target_distance,
        }
    }

    pub fn environment_for(&self, seed: u64) -> Result<Environment, EnvironmentError> {
        generate_environment(&EnvironmentSpec {
            seed,
            ..self.environment.clone()
        })
    }

    /// Hash of everything that determines a condition's trials except the seed.
    pub fn condition_hash(&self, params: &GaitParams) -> String {
        let mut env = self.environment.clone();
        env.seed = 0;
        let canonical = serde_json::json!({
            "schema_version": self.schema_version,
            "environment": env,
            "settings": self.settings(params),
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }
}

/// Per-trial result file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub schema_version: u32,
    pub config_hash: String,
    pub variant: String,
    pub morphology: Morphology,
    pub seed: u64,
    pub metrics: TrialMetrics,
    pub failure: Option<String>,
}

impl TrialResult {
    pub fn file_name(variant: &str, morphology: Morphology, seed: u64) -> String {
        format!("{variant}__{}__{seed:06}.json", morphology.label())
    }
}

/// Success counts per condition and morphology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub condition: String,
    pub morphology: Morphology,
    pub trials: usize,
    pub success: usize,
    pub plan_failure: usize,
    pub instability: usize,
}

pub fn success_table(results: &[TrialResult], conditions: &[String], morphologies: &[Morphology]) -> Vec<SuccessRow> {
    let mut rows = Vec::new();
    for c in conditions {
        for &m in morphologies {
            let subset: Vec<&TrialResult> = results.iter().filter(|r| &r.variant == c && r.morphology == m).collect();
            let count = |o: Outcome| subset.iter().filter(|r| r.metrics.outcome == o).count();
            rows.push(SuccessRow {
                condition: c.clone(),
                morphology: m,
                trials: subset.len(),
                success: count(Outcome::Success),
                plan_failure: count(Outcome::PlanFailure),
                instability: count(Outcome::Instability),
            });
        }
    }
    rows
}

pub fn write_success_csv(rows: &[SuccessRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["condition", "morphology", "trials", "success", "plan_failure", "instability"])?;
    for r in rows {
        w.write_record([
            r.condition.clone(),
            r.morphology.label().to_string(),
            r.trials.to_string(),
            r.success.to_string(),
            r.plan_failure.to_string(),
            r.instability.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Worker count: `MICROGAIT_THREADS` when set and positive, else rayon's default.
pub fn worker_threads() -> usize {
    std::env::var("MICROGAIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

pub const TRIALS_DIR: &str = "trials";
pub const SUCCESS_CSV: &str = "success_table.csv";
pub const SUMMARY_JSON: &str = "summary.json";
/// Wall-clock metadata lives apart from the deterministic outputs.
pub const RUN_INFO_JSON: &str = "run_info.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub condition_hashes: Vec<(String, String)>,
    pub success: Vec<SuccessRow>,
}

/// Runs every (condition, morphology, seed) trial, reusing result files whose
/// config hash matches. Results come back in condition, morphology, seed order.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<TrialResult>, HarnessError> {
    cfg.validate()?;
    let trials_dir = out_dir.join(TRIALS_DIR);
    fs::create_dir_all(&trials_dir)?;
    let conditions = cfg.conditions();
    let hashes: Vec<String> = conditions.iter().map(|c| cfg.condition_hash(&c.params)).collect();
    let mut jobs = Vec::new();
    for (ci, _) in conditions.iter().enumerate() {
        for &m in &cfg.morphologies {
            for &seed in &cfg.seeds {
                jobs.push((ci, m, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(worker_threads()).build()?;
    let results: Vec<Result<TrialResult, HarnessError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ci, m, seed)| {
                let c = &conditions[ci];
                let path = trials_dir.join(TrialResult::file_name(&c.label, m, seed));
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(prev) = serde_json::from_str::<TrialResult>(&text) {
                        if prev.config_hash == hashes[ci] {
                            return Ok(prev);
                        }
                    }
                }
                let env = cfg.environment_for(seed)?;
                let run = run_trial(&env, m, &cfg.settings(&c.params));
                let result = TrialResult {
                    schema_version: CONFIG_SCHEMA_VERSION,
                    config_hash: hashes[ci].clone(),
                    variant: c.label.clone(),
                    morphology: m,
                    seed,
                    metrics: run.metrics,
                    failure: run.failure,
                };
                // write-then-rename so an interrupted sweep never leaves a torn file
                let tmp = path.with_extension("json.tmp");
                fs::write(&tmp, serde_json::to_string_pretty(&result)?)?;
                fs::rename(&tmp, &path)?;
                Ok(result)
            })
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<String> = conditions.iter().map(|c| c.label.clone()).collect();
    let success = success_table(&results, &labels, &cfg.morphologies);
    write_success_csv(&success, &out_dir.join(SUCCESS_CSV))?;
    let summary = SweepSummary {
        schema_version: CONFIG_SCHEMA_VERSION,
        config: cfg.clone(),
        condition_hashes: labels.into_iter().zip(hashes).collect(),
        success,
    };
    fs::write(out_dir.join(SUMMARY_JSON), serde_json::to_string_pretty(&summary)?)?;
    Ok(results)
}

/// Reads every trial file of a sweep directory, sorted by file name.
pub fn load_results(out_dir: &Path) -> Result<Vec<TrialResult>, HarnessError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(out_dir.join(TRIALS_DIR))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&fs::read_to_string(p)?)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StatsError {
    #[error("a paired t-test needs at least two pairs, got {0}")]
    TooFewPairs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub significant: bool,
}

/// Paired t-test on per-pair differences, two-sided, at [`ALPHA`].
pub fn paired_t_test(deltas: &[f64]) -> Result<TTest, StatsError> {
    let n = deltas.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs(n));
    }
    let nf = n as f64;
    let mean = deltas.iter().sum::<f64>() / nf;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                n,
                t: 0.0,
                p: 1.0,
                significant: false,
            }
        } else {
            TTest {
                n,
                t: mean.signum() * f64::INFINITY,
                p: P_SENTINEL,
                significant: true,
            }
        });
    }
    let t = mean * nf.sqrt() / sd;
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest {
        n,
        t,
        p,
        significant: p < ALPHA,
    })
}

/// Metric columns of the comparison report.
pub const METRICS: [(&str, fn(&TrialMetrics) -> f64); 14] = [
    ("normalized_contact_score", |m| m.normalized_contact_score),
    ("whole_body_force_peak", |m| m.whole_body_wrench.force.peak),
    ("whole_body_force_rms", |m| m.whole_body_wrench.force.rms),
    ("whole_body_torque_peak", |m| m.whole_body_wrench.torque.peak),
    ("whole_body_torque_rms", |m| m.whole_body_wrench.torque.rms),
    ("swing_force_peak", |m| m.swing_wrench.force.peak),
    ("swing_force_rms", |m| m.swing_wrench.force.rms),
    ("swing_torque_peak", |m| m.swing_wrench.torque.peak),
    ("swing_torque_rms", |m| m.swing_wrench.torque.rms),
    ("mechanical_work", |m| m.mechanical_work),
    ("rms_joint_torque", |m| m.rms_joint_torque),
    ("rms_joint_velocity", |m| m.rms_joint_velocity),
    ("peak_joint_torque", |m| m.peak_joint_torque),
    ("traversal_time", |m| m.traversal_time.unwrap_or(f64::NAN)),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub variant: String,
    pub morphology: Morphology,
    pub metric: String,
    /// `(seed, variant − baseline)` over terrains where both succeeded.
    pub deltas: Vec<(u64, f64)>,
    pub baseline_mean: f64,
    pub variant_mean: f64,
    /// `None` when no terrain has two successes or the baseline mean is zero.
    pub percent_change: Option<f64>,
    pub test: Option<TTest>,
}

impl PairedComparison {
    pub fn significant(&self) -> bool {
        self.test.is_some_and(|t| t.significant)
    }
}

/// Pairs every variant with the baseline per morphology and metric, keeping
/// only seeds where both trials succeeded.
pub fn compare(results: &[TrialResult], baseline: &str) -> Vec<PairedComparison> {
    let mut variants: Vec<&str> = Vec::new();
    let mut morphs: Vec<Morphology> = Vec::new();
    for r in results {
        if r.variant != baseline && !variants.contains(&r.variant.as_str()) {
            variants.push(&r.variant);
        }
        if !morphs.contains(&r.morphology) {
            morphs.push(r.morphology);
        }
    }
    let succeeded = |label: &str, m: Morphology, seed: u64| {
        results
            .iter()
            .find(|r| r.variant == label && r.morphology == m && r.seed == seed && r.metrics.outcome == Outcome::Success)
    };
    let mut out = Vec::new();
    for v in &variants {
        for &m in &morphs {
            let mut seeds: Vec<u64> = results.iter().filter(|r| r.variant == *v && r.morphology == m).map(|r| r.seed).collect();
            seeds.sort_unstable();
            seeds.dedup();
            let pairs: Vec<(u64, &TrialMetrics, &TrialMetrics)> = seeds
                .iter()
                .filter_map(|&s| Some((s, &succeeded(baseline, m, s)?.metrics, &succeeded(v, m, s)?.metrics)))
                .collect();
            for (name, get) in METRICS {
                let deltas: Vec<(u64, f64)> = pairs.iter().map(|(s, b, x)| (*s, get(x) - get(b))).collect();
                let n = pairs.len() as f64;
                let (bm, vm) = if pairs.is_empty() {
                    (f64::NAN, f64::NAN)
                } else {
                    (
                        pairs.iter().map(|(_, b, _)| get(b)).sum::<f64>() / n,
                        pairs.iter().map(|(_, _, x)| get(x)).sum::<f64>() / n,
                    )
                };
                let percent_change = (!pairs.is_empty() && bm != 0.0).then(|| 100.0 * (vm - bm) / bm);
                let d: Vec<f64> = deltas.iter().map(|(_, d)| *d).collect();
                out.push(PairedComparison {
                    variant: v.to_string(),
                    morphology: m,
                    metric: name.to_string(),
                    deltas,
                    baseline_mean: bm,
                    variant_mean: vm,
                    percent_change,
                    test: paired_t_test(&d).ok(),
                });
            }
        }
    }
    out
}

/// Percentage-change table: one row per metric, one column per
/// (variant, morphology). Cells are `+x.x` when significant, `+x.x (ns)`
/// otherwise, and `n/a` without common successes.
pub fn percent_change_report(comparisons: &[PairedComparison]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut columns: Vec<(String, Morphology)> = Vec::new();
    for c in comparisons {
        if !columns.iter().any(|(v, m)| v == &c.variant && *m == c.morphology) {
            columns.push((c.variant.clone(), c.morphology));
        }
    }
    let header = std::iter::once("metric".to_string())
        .chain(columns.iter().map(|(v, m)| format!("{v}/{}", m.label())))
        .collect();
    let rows = METRICS
        .iter()
        .map(|(name, _)| {
            std::iter::once(name.to_string())
                .chain(columns.iter().map(|(v, m)| {
                    let cell = comparisons
                        .iter()
                        .find(|c| &c.variant == v && c.morphology == *m && c.metric == *name);
                    match cell.and_then(|c| c.percent_change.map(|p| (p, c.significant()))) {
                        Some((p, true)) => format!("{p:+.1}"),
                        Some((p, false)) => format!("{p:+.1} (ns)"),
                        None => "n/a".to_string(),
                    }
                }))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn write_comparison_csv(comparisons: &[PairedComparison], dir: &Path) -> Result<(), HarnessError> {
    let (header, rows) = percent_change_report(comparisons);
    let mut w = csv::Writer::from_path(dir.join("percent_change.csv"))?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("comparison.csv"))?;
    w.write_record(["variant", "morphology", "metric", "n_pairs", "baseline_mean", "variant_mean", "percent_change", "t", "p", "significant"])?;
    for c in comparisons {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
        w.write_record([
            c.variant.clone(),
            c.morphology.label().to_string(),
            c.metric.clone(),
            c.deltas.len().to_string(),
            format!("{:?}", c.baseline_mean),
            format!("{:?}", c.variant_mean),
            opt(c.percent_change),
            opt(c.test.map(|t| t.t)),
            opt(c.test.map(|t| t.p)),
            c.significant().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
