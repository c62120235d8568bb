use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use microgait::contact::{net_support, wrench_membership, ContactModel};
use microgait::dynamics::{inverse_dynamics, DynamicState, InertiaModel};
use microgait::harness::{initial_state, plan_next_stride, TrialSettings};
use microgait::robot::{forward_kinematics, inverse_kinematics, jacobian, IkOptions, JointVector, LimbJoints};
use microgait::{generate_environment, EnvironmentSpec, Pose, RobotModel, Vec3, Wrench};
use microgait_bench::{four_contacts, MORPHOLOGIES};

fn kinematics(c: &mut Criterion) {
    let mut g = c.benchmark_group("kinematics");
    for m in MORPHOLOGIES {
        let model = RobotModel::table_defaults(m);
        let q = LimbJoints::from_column_slice(&[0.2, -0.4, 1.3, -0.3, 0.2, 0.5]);
        let target = forward_kinematics(&model, 0, &q);
        let seed = q.map(|x| x + 0.1);
        g.bench_with_input(BenchmarkId::new("fk", m.label()), &q, |b, q| b.iter(|| forward_kinematics(&model, 0, black_box(q))));
        g.bench_with_input(BenchmarkId::new("jacobian", m.label()), &q, |b, q| b.iter(|| jacobian(&model, 0, black_box(q))));
        g.bench_function(BenchmarkId::new("ik", m.label()), |b| {
            b.iter(|| inverse_kinematics(&model, 0, black_box(&target), &seed, &IkOptions::default()))
        });
    }
    g.finish();
}

fn contact(c: &mut Criterion) {
    let set = four_contacts(ContactModel::default());
    let mut g = c.benchmark_group("contact");
    g.bench_function("net_support", |b| {
        b.iter(|| net_support(&set, black_box(&Vec3::new(0.3, -0.2, 0.9)), &Vec3::new(0.1, 0.7, -0.2), &Vec3::zeros()))
    });
    let w = Wrench::new(Vec3::new(40.0, -20.0, 10.0), Vec3::new(5.0, 12.0, -3.0), Vec3::zeros());
    g.bench_function("wrench_membership", |b| b.iter(|| wrench_membership(&set, black_box(&w))));
    g.finish();
}

fn dynamics(c: &mut Criterion) {
    let inertia = InertiaModel::from_model(&RobotModel::table_defaults(MORPHOLOGIES[0])).unwrap();
    let mut state = DynamicState::at_rest(Pose::identity(), JointVector::from_element(0.3));
    state.joints.dq = JointVector::from_element(0.5);
    state.joints.ddq = JointVector::from_element(-1.0);
    c.bench_function("inverse_dynamics", |b| b.iter(|| inverse_dynamics(&inertia, black_box(&state))));
}

fn planning(c: &mut Criterion) {
    let env = generate_environment(&EnvironmentSpec::with_seed(1)).unwrap();
    let mut settings = TrialSettings::default();
    settings.execution.playback_rate_hz = 100.0;
    let model = RobotModel::table_defaults(MORPHOLOGIES[1]);
    let state = initial_state(&env, &model, &settings.params).unwrap();
    let mut g = c.benchmark_group("planning");
    g.sample_size(10);
    g.bench_function("plan_next_stride", |b| b.iter(|| plan_next_stride(&env, &model, black_box(&state), &settings, 0)));
    g.finish();
}

criterion_group!(benches, kinematics, contact, dynamics, planning);
criterion_main!(benches);
