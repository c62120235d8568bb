//! Grasp-based locomotion planning and evaluation for a quadruped climbing
//! handrails in microgravity.
//!
//! The planning pipeline runs environment → gait planner → trajectory →
//! whole-body coordination → perfect-tracking execution; `metrics` and
//! `harness` turn executed traces into sweep results and paired comparisons.

pub mod contact;
pub mod dynamics;
pub mod environment;
pub mod gait;
pub mod harness;
pub mod metrics;
pub mod robot;
pub mod spatial;
pub mod trajectory;
pub mod whole_body;

pub use contact::{ContactModel, ContactSet, ScoreConfig};
pub use dynamics::{InertiaModel, WrenchStats};
pub use environment::{generate_environment, Environment, EnvironmentSpec};
pub use gait::{GaitParams, OverlapMode, PlanError, StridePlanRecord, SwingOrderMode};
pub use harness::{
    compare, paired_t_test, run_sweep, run_trial, ExperimentConfig, PairedComparison, TrialResult, TrialSettings,
    Variant,
};
pub use metrics::{Outcome, TrialMetrics};
pub use robot::{Morphology, RobotModel, Side};
pub use spatial::{Pose, Twist, Vec3, Wrench};
pub use trajectory::{Stage, StrideTrajectory};
pub use whole_body::{ExecutionConfig, ExecutionTrace};
