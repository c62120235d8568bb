//! Quadruped model: a box base carrying four identical 6-DOF limbs.
//!
//! Limb indices are fixed: 0 = LF, 1 = RF, 2 = LH, 3 = RH. Each limb is a
//! two-axis hip, a knee, and a spherical ankle (pitch, yaw, roll about the
//! gripper axis). YPP and RPP only differ in how the proximal frame is
//! mounted on the base; the joint chain expressed in that frame is shared.

mod kinematics;

use std::f64::consts::PI;

use nalgebra::{Rotation3, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spatial::{Mat3, Pose, Vec3};

pub use kinematics::{
    com_state, forward_kinematics, inverse_kinematics, jacobian, limb_frames, manipulability,
    tree_state, BodyState, IkError, IkOptions, LimbFrames, TreeState,
};

pub const NUM_LIMBS: usize = 4;
pub const JOINTS_PER_LIMB: usize = 6;
pub const NUM_JOINTS: usize = NUM_LIMBS * JOINTS_PER_LIMB;

pub type JointVector = SVector<f64, NUM_JOINTS>;
pub type LimbJoints = SVector<f64, JOINTS_PER_LIMB>;

pub const LIMB_NAMES: [&str; NUM_LIMBS] = ["LF", "RF", "LH", "RH"];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid robot model: {0}")]
    Invalid(String),
    #[error("failed to read robot config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse robot config: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Morphology {
    Ypp,
    Rpp,
}

impl Morphology {
    pub fn label(&self) -> &'static str {
        match self {
            Morphology::Ypp => "YPP",
            Morphology::Rpp => "RPP",
        }
    }
}

impl std::fmt::Display for Morphology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

pub fn limb_side(limb: usize) -> Side {
    if limb % 2 == 0 {
        Side::Left
    } else {
        Side::Right
    }
}

pub fn limb_is_front(limb: usize) -> bool {
    limb < 2
}

/// Axis of each joint in its own body frame (z, y, y, y, z, x).
pub(crate) const JOINT_AXES: [usize; JOINTS_PER_LIMB] = [2, 1, 1, 1, 2, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimbSpec {
    pub morphology: Morphology,
    /// Thigh, shank, gripper (m).
    pub link_lengths: [f64; 3],
    pub joint_torque_limits: [f64; JOINTS_PER_LIMB],
    pub joint_velocity_limits: [f64; JOINTS_PER_LIMB],
    pub joint_angle_limits: [[f64; 2]; JOINTS_PER_LIMB],
    /// Actuator point masses located at the joint origins (kg).
    pub joint_masses: [f64; JOINTS_PER_LIMB],
    /// Rod masses of the three links (kg).
    pub link_masses: [f64; 3],
    /// Radius of the solid sphere used for each joint mass (m).
    pub joint_mass_radius: f64,
}

impl LimbSpec {
    pub fn table_defaults(morphology: Morphology) -> Self {
        let link_lengths = [0.676, 0.806, 0.200];
        Self {
            morphology,
            link_lengths,
            joint_torque_limits: [200.0, 200.0, 200.0, 19.94, 19.94, 19.94],
            joint_velocity_limits: [19.4, 19.4, 19.4, 24.18, 24.18, 24.18],
            joint_angle_limits: [[-2.0 * PI, 2.0 * PI]; JOINTS_PER_LIMB],
            joint_masses: [2.93, 2.93, 2.93, 0.48, 0.48, 0.48],
            link_masses: link_lengths.map(|l| l * 1.0),
            joint_mass_radius: 0.05,
        }
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn mass(&self) -> f64 {
        self.joint_masses.iter().sum::<f64>() + self.link_masses.iter().sum::<f64>()
    }

    /// Local offset of joint `k` from the origin of body `k - 1`.
    pub(crate) fn joint_offset(&self, k: usize) -> Vec3 {
        match k {
            2 => Vec3::new(self.link_lengths[0], 0.0, 0.0),
            3 => Vec3::new(self.link_lengths[1], 0.0, 0.0),
            _ => Vec3::zeros(),
        }
    }

    /// Mass, COM and rotational inertia about the COM of body `k`, in the
    /// body frame.
    pub fn body_inertial(&self, k: usize) -> BodyInertial {
        let sphere = 0.4 * self.joint_masses[k] * self.joint_mass_radius.powi(2);
        let mut parts: Vec<(f64, Vec3, Mat3)> =
            vec![(self.joint_masses[k], Vec3::zeros(), Mat3::identity() * sphere)];
        let rod = match k {
            1 => Some((self.link_masses[0], self.link_lengths[0])),
            2 => Some((self.link_masses[1], self.link_lengths[1])),
            5 => Some((self.link_masses[2], self.link_lengths[2])),
            _ => None,
        };
        if let Some((m, l)) = rod {
            let i = m * l * l / 12.0;
            parts.push((m, Vec3::new(l / 2.0, 0.0, 0.0), Mat3::from_diagonal(&Vec3::new(0.0, i, i))));
        }
        BodyInertial::combine(&parts)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.link_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(ModelError::Invalid("link lengths must be positive".into()));
        }
        if self
            .joint_torque_limits
            .iter()
            .chain(self.joint_velocity_limits.iter())
            .any(|l| !(*l > 0.0))
        {
            return Err(ModelError::Invalid("joint limits must be positive".into()));
        }
        if self.joint_angle_limits.iter().any(|[lo, hi]| !(lo < hi)) {
            return Err(ModelError::Invalid("joint angle limits must be ordered".into()));
        }
        if self.joint_masses.iter().chain(self.link_masses.iter()).any(|m| !(*m > 0.0))
            || !(self.joint_mass_radius > 0.0)
        {
            return Err(ModelError::Invalid("masses must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyInertial {
    pub mass: f64,
    pub com: Vec3,
    /// About the COM, body axes.
    pub inertia: Mat3,
}

impl BodyInertial {
    pub fn combine(parts: &[(f64, Vec3, Mat3)]) -> Self {
        let mass: f64 = parts.iter().map(|p| p.0).sum();
        let com = parts.iter().fold(Vec3::zeros(), |a, p| a + p.1 * p.0) / mass;
        let mut inertia = Mat3::zeros();
        for (m, c, i) in parts {
            let d = c - com;
            inertia += i + (Mat3::identity() * d.dot(&d) - d * d.transpose()) * *m;
        }
        Self { mass, com, inertia }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    /// Length (x), width (y), thickness (z) of the base box (m).
    pub base_dimensions: Vec3,
    pub base_mass: f64,
    /// Proximal frame of each limb in the base frame.
    pub limb_mount_poses: [Pose; NUM_LIMBS],
    pub limbs: [LimbSpec; NUM_LIMBS],
    pub base_inertia: Mat3,
}

impl RobotModel {
    pub fn table_defaults(morphology: Morphology) -> Self {
        RobotConfig::table_defaults(morphology)
            .build()
            .expect("default robot config is valid")
    }

    pub fn morphology(&self) -> Morphology {
        self.limbs[0].morphology
    }

    pub fn total_mass(&self) -> f64 {
        self.base_mass + self.limbs.iter().map(LimbSpec::mass).sum::<f64>()
    }

    pub fn limb_reach(&self, limb: usize) -> f64 {
        self.limbs[limb].reach()
    }

    pub fn base_inertial(&self) -> BodyInertial {
        BodyInertial {
            mass: self.base_mass,
            com: Vec3::zeros(),
            inertia: self.base_inertia,
        }
    }

    pub fn torque_limit(&self, joint: usize) -> f64 {
        self.limbs[joint / JOINTS_PER_LIMB].joint_torque_limits[joint % JOINTS_PER_LIMB]
    }

    pub fn velocity_limit(&self, joint: usize) -> f64 {
        self.limbs[joint / JOINTS_PER_LIMB].joint_velocity_limits[joint % JOINTS_PER_LIMB]
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RobotConfig = serde_json::from_str(&text)?;
        cfg.build()
    }
}

/// Rotation from the base frame to a limb's lateral frame (x outward, z up).
fn lateral_frame(limb: usize) -> Rotation3<f64> {
    let (x, y) = match limb_side(limb) {
        Side::Left => (Vec3::y(), -Vec3::x()),
        Side::Right => (-Vec3::y(), Vec3::x()),
    };
    Rotation3::from_matrix_unchecked(Mat3::from_columns(&[x, y, Vec3::z()]))
}

/// Rotation from the lateral frame to the proximal frame of the chain.
fn proximal_frame(morphology: Morphology) -> Rotation3<f64> {
    match morphology {
        // first axis vertical, links extend outward
        Morphology::Ypp => Rotation3::identity(),
        // first axis along the body's fore-aft line, links hang down
        Morphology::Rpp => Rotation3::from_matrix_unchecked(Mat3::from_columns(&[
            -Vec3::z(),
            Vec3::x(),
            -Vec3::y(),
        ])),
    }
}

/// Serialized robot description. Keys follow the specification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub morphology: Morphology,
    /// `[length_x, width_y, thickness_z]` (m).
    pub base_dimensions: [f64; 3],
    pub base_mass: f64,
    pub link_lengths: [f64; 3],
    pub link_linear_density: f64,
    pub joint_masses: [f64; JOINTS_PER_LIMB],
    pub joint_mass_radius: f64,
    pub joint_torque_limits: [f64; JOINTS_PER_LIMB],
    pub joint_velocity_limits: [f64; JOINTS_PER_LIMB],
    pub joint_angle_limits: [[f64; 2]; JOINTS_PER_LIMB],
    /// Mount points in the base frame; defaults to the four vertical edges.
    pub mount_points: Option<[[f64; 3]; NUM_LIMBS]>,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self::table_defaults(Morphology::Ypp)
    }
}

impl RobotConfig {
    pub fn table_defaults(morphology: Morphology) -> Self {
        let limb = LimbSpec::table_defaults(morphology);
        Self {
            morphology,
            base_dimensions: [0.70, 0.60, 0.125],
            base_mass: 200.0,
            link_lengths: limb.link_lengths,
            link_linear_density: 1.0,
            joint_masses: limb.joint_masses,
            joint_mass_radius: limb.joint_mass_radius,
            joint_torque_limits: limb.joint_torque_limits,
            joint_velocity_limits: limb.joint_velocity_limits,
            joint_angle_limits: limb.joint_angle_limits,
            mount_points: None,
        }
    }

    pub fn build(&self) -> Result<RobotModel, ModelError> {
        let [lx, wy, tz] = self.base_dimensions;
        if !(lx > 0.0 && wy > 0.0 && tz > 0.0) || !(self.base_mass > 0.0) {
            return Err(ModelError::Invalid("base dimensions and mass must be positive".into()));
        }
        let spec = LimbSpec {
            morphology: self.morphology,
            link_lengths: self.link_lengths,
            joint_torque_limits: self.joint_torque_limits,
            joint_velocity_limits: self.joint_velocity_limits,
            joint_angle_limits: self.joint_angle_limits,
            joint_masses: self.joint_masses,
            link_masses: self.link_lengths.map(|l| l * self.link_linear_density),
            joint_mass_radius: self.joint_mass_radius,
        };
        spec.validate()?;
        let mounts = self.mount_points.unwrap_or([
            [lx / 2.0, wy / 2.0, 0.0],
            [lx / 2.0, -wy / 2.0, 0.0],
            [-lx / 2.0, wy / 2.0, 0.0],
            [-lx / 2.0, -wy / 2.0, 0.0],
        ]);
        let limb_mount_poses = std::array::from_fn(|i| {
            Pose::new(
                lateral_frame(i) * proximal_frame(self.morphology),
                Vec3::from(mounts[i]),
            )
        });
        let m = self.base_mass / 12.0;
        let base_inertia = Mat3::from_diagonal(&Vec3::new(
            m * (wy * wy + tz * tz),
            m * (lx * lx + tz * tz),
            m * (lx * lx + wy * wy),
        ));
        Ok(RobotModel {
            base_dimensions: Vec3::new(lx, wy, tz),
            base_mass: self.base_mass,
            limb_mount_poses,
            limbs: std::array::from_fn(|_| spec.clone()),
            base_inertia,
        })
    }
}

/// Joint positions, rates and accelerations for all 24 joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: JointVector,
    pub dq: JointVector,
    pub ddq: JointVector,
}

impl JointState {
    pub fn at_rest(q: JointVector) -> Self {
        Self {
            q,
            dq: JointVector::zeros(),
            ddq: JointVector::zeros(),
        }
    }

    pub fn limb_q(&self, limb: usize) -> LimbJoints {
        self.q.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned()
    }

    pub fn limb_dq(&self, limb: usize) -> LimbJoints {
        self.dq.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned()
    }

    pub fn limb_ddq(&self, limb: usize) -> LimbJoints {
        self.ddq.fixed_rows::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).into_owned()
    }

    pub fn set_limb_q(&mut self, limb: usize, q: &LimbJoints) {
        self.q.fixed_rows_mut::<JOINTS_PER_LIMB>(limb * JOINTS_PER_LIMB).copy_from(q);
    }
}
