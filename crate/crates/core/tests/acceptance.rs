//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{Rotation3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use microgait::contact::{net_support, wrench_membership, ContactModel, ContactPoint, ContactSet, ForceComposition};
use microgait::harness::{
    compare, initial_state, paired_t_test, run_sweep, run_trial, standard_variants, ExperimentConfig, PairedComparison,
    TrialResult, TrialSettings, BASELINE_LABEL, SUCCESS_CSV, SUMMARY_JSON, TRIALS_DIR,
};
use microgait::metrics::{compute_metrics, whole_body_motion_wrench, Outcome, TrialRecord};
use microgait::robot::{forward_kinematics, inverse_kinematics, jacobian, IkError, IkOptions, LimbJoints, JointVector};
use microgait::spatial::{rotation_exp, rotation_log};
use microgait::trajectory::{base_trajectory, swing_path, time_parameterize_swing, Stage};
use microgait::whole_body::{hold, Attachment, ExecutionTrace};
use microgait::{generate_environment, EnvironmentSpec, InertiaModel, Morphology, Pose, RobotModel, Vec3, Wrench};

const MORPHS: [Morphology; 2] = [Morphology::Ypp, Morphology::Rpp];
/// Seeds of the paired trend sweep.
const SWEEP_SEEDS: u64 = 20;
/// Coarse playback keeps the sweep within its time budget; the monitor runs at
/// its own rate regardless.
const SWEEP_RATE_HZ: f64 = 100.0;

struct Report {
    lines: Vec<(String, bool, String)>,
}

impl Report {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        println!("criterion {id}: {} | {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push((id.to_string(), pass, detail));
    }
}

fn random_q(rng: &mut ChaCha8Rng) -> LimbJoints {
    LimbJoints::from_fn(|_, _| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    rotation_exp(&(axis.normalize() * rng.random_range(0.0..std::f64::consts::PI)))
}

fn kinematics(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    // the near-singular guard rejects valid targets by design; convergence is judged without it
    let opts = IkOptions {
        singularity_threshold: 0.0,
        ..IkOptions::default()
    };
    let mut worst_rate: f64 = 1.0;
    let mut worst_jac: f64 = 0.0;
    let mut detail = Vec::new();
    for morph in MORPHS {
        let model = RobotModel::table_defaults(morph);
        let mut ok = 0;
        for i in 0..1000 {
            let limb = i % 4;
            let q = random_q(&mut rng);
            let noise = LimbJoints::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let seed = q + noise * (0.3 * rng.random::<f64>() / noise.norm());
            let target = forward_kinematics(&model, limb, &q);
            match inverse_kinematics(&model, limb, &target, &seed, &opts) {
                Ok(sol) => {
                    let (dp, _) = forward_kinematics(&model, limb, &sol).distance(&target);
                    if dp < 1e-6 {
                        ok += 1;
                    }
                }
                Err(IkError::NearSingular { .. } | IkError::Unreachable { .. } | IkError::JointLimit { .. }) => {}
            }
        }
        worst_rate = worst_rate.min(ok as f64 / 1000.0);
        for _ in 0..200 {
            let limb = rng.random_range(0..4);
            let q = random_q(&mut rng);
            let j = jacobian(&model, limb, &q);
            let h = 1e-6;
            for k in 0..6 {
                let (mut qp, mut qm) = (q, q);
                qp[k] += h;
                qm[k] -= h;
                let fp = forward_kinematics(&model, limb, &qp);
                let fm = forward_kinematics(&model, limb, &qm);
                let lin = (fp.translation - fm.translation) / (2.0 * h);
                let ang = rotation_log(&(fp.rotation * fm.rotation.inverse())) / (2.0 * h);
                let fd = Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z);
                let col = j.column(k);
                worst_jac = worst_jac.max((col - fd).norm() / col.norm().max(1.0));
            }
        }
        detail.push(format!("{} round trip {ok}/1000", morph.label()));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_rate >= 0.99 && worst_jac < 1e-4 && secs < 30.0;
    report.record(
        "1 kinematics",
        pass,
        format!("{}; worst Jacobian rel err {worst_jac:.2e}; {secs:.1} s", detail.join(", ")),
    );
}

/// Sample points of one contact's admissible force set: cone vertices and
/// ball points, the ball's extreme point toward `v` included.
fn force_points(c: &ContactPoint, m: &ContactModel, v: &Vec3, rng: &mut ChaCha8Rng, samples: usize) -> Vec<Vec3> {
    let mut cone = vec![Vec3::zeros()];
    if m.normal_force_cap > 0.0 {
        let r = c.contact_frame.rotation;
        for k in 0..m.cone_facets {
            let phi = 2.0 * std::f64::consts::PI * k as f64 / m.cone_facets as f64;
            let local = Vec3::new(m.friction_coefficient * phi.cos(), m.friction_coefficient * phi.sin(), 1.0);
            cone.push(r * local * m.normal_force_cap);
        }
    }
    let mut ball = vec![Vec3::zeros()];
    if v.norm() > 0.0 {
        ball.push(v.normalize() * m.grasp_force_radius);
    }
    for _ in 0..samples {
        let u = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if u.norm() > 1e-9 {
            ball.push(u.normalize() * m.grasp_force_radius);
        }
    }
    match m.composition {
        ForceComposition::MinkowskiSum => cone.iter().flat_map(|a| ball.iter().map(move |b| a + b)).collect(),
        ForceComposition::Union => cone.into_iter().chain(ball).collect(),
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> ContactModel {
    ContactModel {
        friction_coefficient: rng.random_range(0.2..1.0),
        cone_facets: rng.random_range(4..13),
        normal_force_cap: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(50.0..400.0) },
        grasp_force_radius: rng.random_range(0.0..400.0),
        grasp_torque_radius: if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..200.0) },
        composition: if rng.random_bool(0.5) { ForceComposition::MinkowskiSum } else { ForceComposition::Union },
    }
}

fn random_set(rng: &mut ChaCha8Rng, model: ContactModel) -> ContactSet {
    let n = rng.random_range(1..5);
    let contacts = (0..n)
        .map(|l| {
            let p = Vec3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            ContactPoint::new(l, Pose::new(random_rotation(rng), p))
        })
        .collect();
    ContactSet::new(contacts, model).unwrap()
}

/// Exact support of the admissible wrench set along `(df, dt)` about
/// `reference`, with the maximizing wrench of every contact as a subgradient.
fn wrench_support(set: &ContactSet, df: &Vec3, dt: &Vec3, reference: &Vec3, rng: &mut ChaCha8Rng) -> (f64, Vector6<f64>) {
    let m = &set.model;
    let mut h = 0.0;
    let mut grad = Vector6::zeros();
    for c in &set.contacts {
        let arm = c.position - reference;
        let v = df + dt.cross(&arm);
        let best = force_points(c, m, &v, rng, 0)
            .into_iter()
            .max_by(|a, b| a.dot(&v).total_cmp(&b.dot(&v)))
            .unwrap();
        h += best.dot(&v);
        let tau = arm.cross(&best);
        grad += Vector6::new(best.x, best.y, best.z, tau.x, tau.y, tau.z);
        if dt.norm() > 0.0 {
            let t = dt.normalize() * m.grasp_torque_radius;
            h += t.dot(dt);
            grad += Vector6::new(0.0, 0.0, 0.0, t.x, t.y, t.z);
        }
    }
    (h, grad)
}

/// Frank–Wolfe projection of `w` onto the admissible wrench set. Returns the
/// best separation `d·w − h(d)` over unit directions `d` seen along the way;
/// a positive value certifies infeasibility.
fn best_separation(set: &ContactSet, w: &Wrench, rng: &mut ChaCha8Rng) -> f64 {
    let wv = Vector6::new(w.force.x, w.force.y, w.force.z, w.torque.x, w.torque.y, w.torque.z);
    let support = |d: &Vector6<f64>, rng: &mut ChaCha8Rng| {
        wrench_support(set, &d.fixed_rows::<3>(0).into(), &d.fixed_rows::<3>(3).into(), &w.reference_point, rng)
    };
    let mut x = Vector6::zeros();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..4000 {
        let r = wv - x;
        let n = r.norm();
        if n < 1e-9 * wv.norm().max(1.0) {
            break;
        }
        let d = r / n;
        let (h, s) = support(&d, rng);
        best = best.max(d.dot(&wv) - h);
        let step = s - x;
        let denom = step.norm_squared();
        if denom == 0.0 {
            break;
        }
        x += step * (r.dot(&step) / denom).clamp(0.0, 1.0);
    }
    best
}

fn wrench_oracles(report: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let model = random_model(&mut rng);
        let set = random_set(&mut rng, model);
        let u = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let reference = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let got = net_support(&set, &u, &v, &reference);
        let force: f64 = set
            .contacts
            .iter()
            .map(|c| {
                let pts = force_points(c, &set.model, &u, &mut rng, 64);
                pts.iter().map(|f| f.dot(&u)).fold(f64::NEG_INFINITY, f64::max)
            })
            .sum();
        // torque support: every (p × f + τ)·v over the sampled points
        let mut torque = 0.0;
        for c in &set.contacts {
            let arm = c.position - reference;
            let dir = v.cross(&arm);
            let pts = force_points(c, &set.model, &dir, &mut rng, 64);
            let best = pts.iter().map(|f| arm.cross(f).dot(&v)).fold(f64::NEG_INFINITY, f64::max);
            torque += best + set.model.grasp_torque_radius * v.norm();
        }
        for (a, b) in [(got.force, force), (got.torque, torque)] {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    let support_secs = start.elapsed().as_secs_f64();

    let mut false_feasible = Vec::new();
    let mut false_infeasible = Vec::new();
    let mut feasible = 0;
    for q in 0..200 {
        let mut model = random_model(&mut rng);
        model.cone_facets = 8;
        let set = random_set(&mut rng, model);
        let dir = Vector6::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let scale = rng.random_range(0.0..1500.0);
        let w = Wrench::new(
            Vec3::new(dir[0], dir[1], dir[2]) * scale,
            Vec3::new(dir[3], dir[4], dir[5]) * scale,
            Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.0),
        );
        let m = wrench_membership(&set, &w).unwrap();
        let sep = best_separation(&set, &w, &mut rng);
        let separated = sep > 1e-7 * scale.max(1.0);
        if m.feasible {
            feasible += 1;
            if separated {
                false_feasible.push(format!("query {q}: margin {:.6} but separation {sep:.3e}", m.margin));
            }
        } else if !separated {
            false_infeasible.push(format!(
                "query {q}: margin {:.6} bracket [{:.6}, {:.6}], best separation {sep:.3e}",
                m.margin, m.lower_bound, m.upper_bound
            ));
        }
    }
    for line in false_feasible.iter().chain(&false_infeasible) {
        println!("  membership disagreement, {line}");
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-6 && false_feasible.is_empty() && false_infeasible.len() * 100 < 200 && secs < 120.0;
    report.record(
        "2 wrench oracles",
        pass,
        format!(
            "net_support worst rel err {worst:.2e} ({support_secs:.1} s); membership {feasible}/200 feasible, \
             {} false-feasible, {} false-infeasible; {secs:.1} s",
            false_feasible.len(),
            false_infeasible.len()
        ),
    );
}

fn trajectories(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    // base: acceleration continuity at the blend junctions
    let mut worst_jump: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    for _ in 0..50 {
        let start = Pose::new(random_rotation(&mut rng), Vec3::new(rng.random_range(-1.0..1.0), 0.0, 0.8));
        let goal = Pose::new(
            random_rotation(&mut rng),
            start.translation + Vec3::new(rng.random_range(0.1..0.8), rng.random_range(-0.2..0.2), 0.0),
        );
        let d = (goal.translation - start.translation).norm();
        let b = base_trajectory(&start, &goal, d / 0.1 + rng.random_range(0.0..3.0), 0.15).unwrap();
        let big_t = b.duration();
        let peak = (0..=400)
            .map(|i| b.sample(big_t * i as f64 / 400.0))
            .map(|s| s.linear_acceleration.norm().max(s.angular_acceleration.norm()))
            .fold(0.0, f64::max);
        let tb = b.profile.blend_fraction * big_t;
        for t in [0.0, tb, big_t - tb, big_t] {
            let (l, r) = (b.sample((t - 1e-9).max(0.0)), b.sample((t + 1e-9).min(big_t)));
            let jump = (l.linear_acceleration - r.linear_acceleration)
                .norm()
                .max((l.angular_acceleration - r.angular_acceleration).norm());
            worst_jump = worst_jump.max(jump / peak);
        }
        // the analytic acceleration is the derivative of the analytic velocity
        let h = 1e-6;
        for i in 1..40 {
            let t = big_t * i as f64 / 40.0;
            let fd = (b.sample(t + h).twist.linear - b.sample(t - h).twist.linear) / (2.0 * h);
            worst_fd = worst_fd.max((fd - b.sample(t).linear_acceleration).norm() / peak);
        }
    }

    // swings: rest at every stage boundary, stage time proportional to length
    let mut worst_rest: f64 = 0.0;
    let mut worst_share: f64 = 0.0;
    for _ in 0..50 {
        let current = Pose::new(random_rotation(&mut rng), Vec3::new(0.0, 0.9, -0.6));
        let target = Pose::new(
            random_rotation(&mut rng),
            Vec3::new(rng.random_range(0.2..0.9), 0.9 + rng.random_range(-0.2..0.2), -0.6),
        );
        let path = swing_path(&current, &target, 0.1);
        let total = rng.random_range(1.0..5.0);
        let gripper = (0.25, 0.25);
        let s = time_parameterize_swing(&path, 1.0, total, gripper, 1.0).unwrap();
        let lengths = path.stage_lengths(1.0);
        let motion = total - gripper.0 - gripper.1;
        let sum: f64 = lengths.iter().sum();
        for k in 0..3 {
            worst_share = worst_share.max((s.stage_durations[k + 1] - motion * lengths[k] / sum).abs());
        }
        worst_share = worst_share
            .max((s.stage_durations[0] - gripper.0).abs())
            .max((s.stage_durations[4] - gripper.1).abs());
        let starts = s.stage_starts();
        let rates = |t: f64| {
            let (_, m) = s.sample(t);
            (
                Vector6::new(m.twist.linear.x, m.twist.linear.y, m.twist.linear.z, m.twist.angular.x, m.twist.angular.y, m.twist.angular.z),
                Vector6::new(
                    m.linear_acceleration.x,
                    m.linear_acceleration.y,
                    m.linear_acceleration.z,
                    m.angular_acceleration.x,
                    m.angular_acceleration.y,
                    m.angular_acceleration.z,
                ),
            )
        };
        for t in starts.iter().copied().chain([s.end_time()]) {
            // right limit exactly; left limit extrapolated, since acceleration is linear near a boundary
            let (v0, a0) = rates(t);
            let h = 1e-10;
            let ((v1, a1), (_, a2)) = (rates(t - h), rates(t - 2.0 * h));
            let a_left = a1 * 2.0 - a2;
            worst_rest = worst_rest.max(v0.norm()).max(a0.norm()).max(v1.norm()).max(a_left.norm());
        }
    }

    // stage ordering on every stride of a ten-stride run
    let env = generate_environment(&EnvironmentSpec::with_seed(7)).unwrap();
    let mut settings = TrialSettings::default();
    settings.execution.playback_rate_hz = SWEEP_RATE_HZ;
    settings.target_distance = 10.0 * settings.params.stride_length - 1e-9;
    let run = run_trial(&env, Morphology::Ypp, &settings);
    let trace = &run.trace;
    let mut violations = Vec::new();
    let mut bounds = trace.stride_starts.clone();
    bounds.push(trace.samples.len());
    for (k, w) in bounds.windows(2).enumerate() {
        for limb in 0..4 {
            let mut seq: Vec<Stage> = Vec::new();
            for s in &trace.samples[w[0]..w[1]] {
                if seq.last() != Some(&s.stages[limb]) {
                    seq.push(s.stages[limb]);
                }
                // an opening or closing gripper is no support
                let free = s.attachment[limb] == Attachment::Free;
                if free != (s.stages[limb] != Stage::Stance) {
                    violations.push(format!("stride {k} limb {limb}: attachment {:?} in {:?}", s.attachment[limb], s.stages[limb]));
                }
            }
            let swing: Vec<usize> = seq.iter().filter(|s| **s != Stage::Stance).map(|s| s.index()).collect();
            if !(swing.is_empty() || swing == [1, 2, 3, 4, 5]) {
                violations.push(format!("stride {k} limb {limb}: stages {swing:?}"));
            }
        }
    }
    let strides = trace.stride_starts.len();
    let pass = worst_jump < 1e-6
        && worst_fd < 1e-6
        && worst_rest < 1e-9
        && worst_share < 1e-12
        && run.metrics.outcome == Outcome::Success
        && strides >= 10
        && violations.is_empty();
    for v in violations.iter().take(5) {
        println!("  {v}");
    }
    report.record(
        "3 trajectories",
        pass,
        format!(
            "base accel jump {worst_jump:.2e} of peak (fd check {worst_fd:.2e}); swing boundary rest {worst_rest:.2e}; \
             stage share err {worst_share:.2e}; {strides} strides ({:?}), {} ordering violations",
            run.metrics.outcome,
            violations.len()
        ),
    );
}

fn relative_rms(a: &[Vec3], b: &[Vec3]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    let den: f64 = b.iter().map(|y| y.norm_squared()).sum();
    (num / den).sqrt()
}

fn dynamics_consistency(report: &mut Report) {
    let mut settings = TrialSettings::default();
    settings.execution.playback_rate_hz = 1000.0;
    let mut worst: f64 = 0.0;
    let mut used = Vec::new();
    for seed in 0..20u64 {
        if used.len() == 5 {
            break;
        }
        let env = generate_environment(&EnvironmentSpec::with_seed(seed)).unwrap();
        let morph = MORPHS[used.len() % 2];
        let run = run_trial(&env, morph, &settings);
        if run.metrics.outcome != Outcome::Success {
            continue;
        }
        let mass = InertiaModel::from_model(&RobotModel::table_defaults(morph)).unwrap().total_mass();
        let motion = whole_body_motion_wrench(&run.trace, mass, 0.0);
        let (mut fa, mut fb, mut ta, mut tb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (s, m) in run.trace.samples.iter().zip(&motion) {
            let r = s.base_pose.rotation.inverse();
            fa.push(m.force);
            fb.push(r * s.base_reaction.force);
            ta.push(m.torque_about_base);
            tb.push(r * s.base_reaction.torque);
        }
        let e = relative_rms(&fa, &fb).max(relative_rms(&ta, &tb));
        worst = worst.max(e);
        used.push(format!("{}/{seed} {:.2}%", morph.label(), 100.0 * e));
    }

    // a held posture: no motion, so no torque and no work
    let env = generate_environment(&EnvironmentSpec::default().regular()).unwrap();
    let model = RobotModel::table_defaults(Morphology::Ypp);
    let im = InertiaModel::from_model(&model).unwrap();
    let state = initial_state(&env, &model, &settings.params).unwrap();
    let mut trace = ExecutionTrace::new(100.0);
    hold(&im, &state, 2.0, &mut trace);
    let m = compute_metrics(&trace, &im, &TrialRecord::default(), Outcome::Success);
    let static_zero = trace.samples.iter().all(|s| s.torques == JointVector::zeros()) && m.mechanical_work == 0.0;

    let pass = used.len() == 5 && worst < 0.02 && static_zero;
    report.record(
        "4 dynamics consistency",
        pass,
        format!("motion wrench vs base reaction rel RMS: {}; static hold zero torque and work: {static_zero}", used.join(", ")),
    );
}

fn sweep_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seeds: (0..SWEEP_SEEDS).collect(),
        variants: standard_variants()
            .into_iter()
            .filter(|v| ["amble", "trot", "overlap_50", "stride_0.3", "speed_0.10"].contains(&v.label.as_str()))
            .collect(),
        ..ExperimentConfig::default()
    };
    cfg.execution.playback_rate_hz = SWEEP_RATE_HZ;
    cfg
}

fn find<'a>(cmp: &'a [PairedComparison], variant: &str, morph: Morphology, metric: &str) -> &'a PairedComparison {
    cmp.iter()
        .find(|c| c.variant == variant && c.morphology == morph && c.metric == metric)
        .unwrap_or_else(|| panic!("no comparison {variant}/{metric}"))
}

/// `+1` significantly up, `-1` significantly down, `0` no significant change.
fn direction(c: &PairedComparison) -> i32 {
    match c.test {
        Some(t) if t.significant => {
            if t.t > 0.0 {
                1
            } else {
                -1
            }
        }
        _ => 0,
    }
}

fn describe(c: &PairedComparison) -> String {
    let p = c.test.map_or(f64::NAN, |t| t.p);
    format!("{} {}/{} {:+.1}% (p {p:.2e})", c.variant, c.metric, c.morphology.label(), c.percent_change.unwrap_or(f64::NAN))
}

fn trends(report: &mut Report, results: &[TrialResult], secs: f64) {
    let cmp = compare(results, BASELINE_LABEL);
    let mut checks: Vec<(String, bool, String)> = Vec::new();
    for morph in MORPHS {
        // (a) slower base: smaller whole-body wrench and work, longer traversal
        for (metric, want) in [
            ("whole_body_force_rms", -1),
            ("whole_body_torque_rms", -1),
            ("mechanical_work", -1),
            ("traversal_time", 1),
        ] {
            let c = find(&cmp, "speed_0.10", morph, metric);
            checks.push(("a".into(), direction(c) == want, describe(c)));
        }
        // (b) shorter strides: longer traversal
        let c = find(&cmp, "stride_0.3", morph, "traversal_time");
        checks.push(("b".into(), direction(c) == 1, describe(c)));
        // (c) the optimized order is never significantly beaten on contact score
        for v in ["amble", "trot"] {
            let c = find(&cmp, v, morph, "normalized_contact_score");
            checks.push(("c".into(), direction(c) <= 0, describe(c)));
        }
        // (d) more overlap: lower contact score
        let c = find(&cmp, "overlap_50", morph, "normalized_contact_score");
        checks.push(("d".into(), direction(c) == -1, describe(c)));
    }
    for part in ["a", "b", "c", "d"] {
        let mine: Vec<&(String, bool, String)> = checks.iter().filter(|c| c.0 == part).collect();
        let pass = mine.iter().all(|c| c.1) && secs < 1200.0;
        let detail = mine.iter().map(|c| c.2.clone()).collect::<Vec<_>>().join("; ");
        report.record(&format!("5{part} trends"), pass, format!("{detail}; sweep {secs:.0} s"));
    }
}

fn success_ordering(report: &mut Report, results: &[TrialResult]) {
    let mut counts: BTreeMap<(String, &str), usize> = BTreeMap::new();
    for r in results {
        *counts.entry((r.variant.clone(), r.morphology.label())).or_default() += (r.metrics.outcome == Outcome::Success) as usize;
    }
    let n = SWEEP_SEEDS as usize;
    let mut pass = true;
    let mut detail = Vec::new();
    for morph in MORPHS {
        let get = |v: &str| counts.get(&(v.to_string(), morph.label())).copied().unwrap_or(0);
        let (b, a, t) = (get(BASELINE_LABEL), get("amble"), get("trot"));
        pass &= b >= a && b >= t && b as f64 >= 0.95 * n as f64;
        detail.push(format!("{}: baseline {b}/{n}, amble {a}, trot {t}", morph.label()));
    }
    report.record("6 success ordering", pass, detail.join("; "));
}

fn traversal_bound(report: &mut Report, results: &[TrialResult]) {
    let bound = 10.0 / 0.15;
    let times: Vec<f64> = results
        .iter()
        .filter(|r| r.variant == BASELINE_LABEL && r.metrics.outcome == Outcome::Success)
        .filter_map(|r| r.metrics.traversal_time)
        .collect();
    let min = times.iter().copied().fold(f64::INFINITY, f64::min);
    report.record(
        "7 traversal bound",
        !times.is_empty() && min >= bound,
        format!("{} successful baseline trials, shortest {min:.1} s >= {bound:.1} s", times.len()),
    );
}

fn statistics(report: &mut Report) {
    let paired = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| y - x).collect::<Vec<f64>>();
    // (name, deltas, tabulated two-sided p)
    let datasets: Vec<(&str, Vec<f64>, f64)> = vec![
        // Cushny and Peebles hyoscine sleep gain, as analysed by Student
        ("sleep", vec![1.2, 2.4, 1.3, 1.3, 0.0, 1.0, 1.8, 0.8, 4.6, 1.4], 0.002833),
        // boys' shoe sole wear, materials A and B
        (
            "shoes",
            paired(
                &[13.2, 8.2, 10.9, 14.3, 10.7, 6.6, 9.5, 10.8, 8.8, 13.3],
                &[14.0, 8.8, 11.2, 14.2, 11.8, 6.4, 9.8, 11.3, 9.3, 13.6],
            ),
            0.008539,
        ),
        // Darwin's cross- minus self-fertilized Zea mays heights, eighths of an inch
        (
            "darwin",
            vec![6.125, -8.375, 1.0, 2.0, 0.75, 2.875, 3.5, 5.125, 1.75, 3.625, 7.0, 3.0, 9.375, 7.5, -6.0],
            0.04970,
        ),
        ("one-to-five", vec![1.0, 2.0, 3.0, 4.0, 5.0], 0.013236),
        // ten pairs placed exactly on the 5% two-sided critical value for 9 df
        ("critical-9df", critical_dataset(2.262157, 10), 0.05),
    ];
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (name, d, p) in &datasets {
        let r = paired_t_test(d).unwrap();
        worst = worst.max((r.p - p).abs());
        detail.push(format!("{name} t {:.4} p {:.6}", r.t, r.p));
    }
    report.record("8 statistics", worst < 1e-3, format!("{}; worst |dp| {worst:.1e}", detail.join(", ")));
}

/// `n` deltas whose t statistic equals `t`.
fn critical_dataset(t: f64, n: usize) -> Vec<f64> {
    let base: Vec<f64> = (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect();
    let sd = (base.iter().map(|x| x * x).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    base.iter().map(|x| x + t * sd / (n as f64).sqrt()).collect()
}

fn directory_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for name in [SUCCESS_CSV, SUMMARY_JSON] {
        out.insert(name.to_string(), fs::read(dir.join(name)).unwrap());
    }
    for e in fs::read_dir(dir.join(TRIALS_DIR)).unwrap() {
        let e = e.unwrap();
        out.insert(format!("{TRIALS_DIR}/{}", e.file_name().to_string_lossy()), fs::read(e.path()).unwrap());
    }
    out
}

fn main() {
    // honour `cargo test -- --list` and filters that exclude this target
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    if let Some(filter) = args.iter().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return;
        }
    }

    // MICROGAIT_ACCEPTANCE=1,3 runs a subset; 5, 6, 7 and 9 share one sweep
    let selected: Option<Vec<u32>> = std::env::var("MICROGAIT_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |k: u32| selected.as_ref().is_none_or(|s| s.contains(&k));

    let mut report = Report { lines: Vec::new() };
    if want(1) {
        kinematics(&mut report);
    }
    if want(2) {
        wrench_oracles(&mut report);
    }
    if want(3) {
        trajectories(&mut report);
    }
    if want(4) {
        dynamics_consistency(&mut report);
    }
    if want(8) {
        statistics(&mut report);
    }
    if [5, 6, 7, 9].into_iter().any(want) {
        let cfg = sweep_config();
        let first = tempfile::tempdir().unwrap();
        let start = Instant::now();
        let results = run_sweep(&cfg, first.path()).unwrap();
        let secs = start.elapsed().as_secs_f64();
        if want(5) {
            trends(&mut report, &results, secs);
        }
        if want(6) {
            success_ordering(&mut report, &results);
        }
        if want(7) {
            traversal_bound(&mut report, &results);
        }
        if want(9) {
            let second = tempfile::tempdir().unwrap();
            run_sweep(&cfg, second.path()).unwrap();
            let (a, b) = (directory_bytes(first.path()), directory_bytes(second.path()));
            let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
            report.record(
                "9 determinism",
                a.len() == b.len() && differing.is_empty(),
                format!("{} files compared across two full sweeps, {} differ", a.len(), differing.len()),
            );
        }
    }

    let failed: Vec<&String> = report.lines.iter().filter(|l| !l.1).map(|l| &l.0).collect();
    println!("{} of {} criteria passed", report.lines.len() - failed.len(), report.lines.len());
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
