use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robot::Side;
use crate::spatial::{rotation_intrinsic_rpy, Pose, Vec3};

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),
    #[error("environment I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("environment parse: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvironmentSpec {
    /// Forward distance the pairs must cover; ignored when `pair_count` is set.
    pub target_distance: f64,
    pub pair_count: Option<usize>,
    /// Extra distance generated past `target_distance`.
    pub overrun: f64,
    pub x_offset_range: [f64; 2],
    pub y_offset_range: [f64; 2],
    pub z_offset_range: [f64; 2],
    /// Per-axis bound on each handrail's roll, pitch and yaw (rad).
    pub max_rotation: f64,
    pub pair_y_separation_range: [f64; 2],
    pub pair_xz_offset_range: [f64; 2],
    pub handrail_length: f64,
    pub handrail_radius: f64,
    /// Anchors added on each side of the handrail centre at this spacing.
    pub extra_anchor_spacing: f64,
    pub extra_anchors_per_side: usize,
    pub seed: u64,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        Self {
            target_distance: 10.0,
            pair_count: None,
            overrun: 2.0,
            x_offset_range: [0.275, 0.325],
            y_offset_range: [-0.15, 0.15],
            z_offset_range: [-0.1, 0.1],
            max_rotation: 22.5_f64.to_radians(),
            pair_y_separation_range: [1.6, 2.0],
            pair_xz_offset_range: [-0.15, 0.15],
            handrail_length: 0.3,
            handrail_radius: 0.015,
            extra_anchor_spacing: 0.1,
            extra_anchors_per_side: 1,
            seed: 0,
        }
    }
}

impl EnvironmentSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Every range collapsed to its midpoint and rotations disabled.
    pub fn regular(&self) -> Self {
        let mid = |r: [f64; 2]| {
            let m = 0.5 * (r[0] + r[1]);
            [m, m]
        };
        Self {
            x_offset_range: mid(self.x_offset_range),
            y_offset_range: mid(self.y_offset_range),
            z_offset_range: mid(self.z_offset_range),
            max_rotation: 0.0,
            pair_y_separation_range: mid(self.pair_y_separation_range),
            pair_xz_offset_range: mid(self.pair_xz_offset_range),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        let ranges = [
            ("x_offset_range", self.x_offset_range),
            ("y_offset_range", self.y_offset_range),
            ("z_offset_range", self.z_offset_range),
            ("pair_y_separation_range", self.pair_y_separation_range),
            ("pair_xz_offset_range", self.pair_xz_offset_range),
        ];
        for (name, r) in ranges {
            if !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(EnvironmentError::InvalidSpec(format!("{name} is not well ordered")));
            }
        }
        if !(self.x_offset_range[0] > 0.0) {
            return Err(EnvironmentError::InvalidSpec("x offsets must be positive".into()));
        }
        if !(self.handrail_length > 0.0 && self.handrail_radius > 0.0) {
            return Err(EnvironmentError::InvalidSpec("handrail size must be positive".into()));
        }
        if self.extra_anchors_per_side > 0
            && 2.0 * self.extra_anchor_spacing * self.extra_anchors_per_side as f64 > self.handrail_length + 1e-12
        {
            return Err(EnvironmentError::InvalidSpec("extra anchors exceed handrail length".into()));
        }
        if !(self.max_rotation >= 0.0) || self.pair_count.is_none() && !(self.target_distance > 0.0) {
            return Err(EnvironmentError::InvalidSpec("rotation bound and distance must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handrail {
    pub id: usize,
    pub pair: usize,
    pub side: Side,
    /// x along the handrail axis, z the outward grasp normal.
    pub pose: Pose,
    pub length: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: usize,
    /// z is the outward normal; x runs along the handrail.
    pub grasp_pose: Pose,
    pub parent_handrail: usize,
    pub side: Side,
}

impl Anchor {
    pub fn position(&self) -> Vec3 {
        self.grasp_pose.translation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub spec: EnvironmentSpec,
    pub handrails: Vec<Handrail>,
    pub anchors: Vec<Anchor>,
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

pub fn generate_environment(spec: &EnvironmentSpec) -> Result<Environment, EnvironmentError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut env = Environment {
        spec: spec.clone(),
        handrails: Vec::new(),
        anchors: Vec::new(),
    };
    let limit = spec.target_distance + spec.overrun;
    let mut center = Vec3::zeros();
    let mut pair = 0;
    loop {
        match spec.pair_count {
            Some(n) if pair >= n => break,
            None if center.x >= limit => break,
            _ => {}
        }
        let sep = uniform(&mut rng, spec.pair_y_separation_range);
        let dx = uniform(&mut rng, spec.pair_xz_offset_range);
        let dz = uniform(&mut rng, spec.pair_xz_offset_range);
        for (side, sign) in [(Side::Left, 1.0), (Side::Right, -1.0)] {
            let pos = center + Vec3::new(sign * 0.5 * dx, sign * 0.5 * sep, sign * 0.5 * dz);
            let m = spec.max_rotation;
            let roll = uniform(&mut rng, [-m, m]);
            let pitch = uniform(&mut rng, [-m, m]);
            let yaw = uniform(&mut rng, [-m, m]);
            env.push_handrail(pair, side, Pose::new(rotation_intrinsic_rpy(roll, pitch, yaw), pos));
        }
        pair += 1;
        center += Vec3::new(
            uniform(&mut rng, spec.x_offset_range),
            uniform(&mut rng, spec.y_offset_range),
            uniform(&mut rng, spec.z_offset_range),
        );
    }
    Ok(env)
}

impl Environment {
    pub fn empty(spec: EnvironmentSpec) -> Self {
        Self {
            spec,
            handrails: Vec::new(),
            anchors: Vec::new(),
        }
    }

    /// Appends a handrail and its anchors.
    pub fn push_handrail(&mut self, pair: usize, side: Side, pose: Pose) -> usize {
        let id = self.handrails.len();
        self.handrails.push(Handrail {
            id,
            pair,
            side,
            pose,
            length: self.spec.handrail_length,
            radius: self.spec.handrail_radius,
        });
        let k = self.spec.extra_anchors_per_side as i64;
        for j in -k..=k {
            let offset = Vec3::new(j as f64 * self.spec.extra_anchor_spacing, 0.0, 0.0);
            self.anchors.push(Anchor {
                id: self.anchors.len(),
                grasp_pose: pose.compose(&Pose::from_translation(offset)),
                parent_handrail: id,
                side,
            });
        }
        id
    }

    pub fn pair_count(&self) -> usize {
        self.handrails.iter().map(|h| h.pair + 1).max().unwrap_or(0)
    }

    pub fn anchor(&self, id: usize) -> &Anchor {
        &self.anchors[id]
    }

    /// Centre anchor of the handrail on `side` of `pair`.
    pub fn center_anchor(&self, pair: usize, side: Side) -> Option<&Anchor> {
        let h = self.handrails.iter().find(|h| h.pair == pair && h.side == side)?;
        self.anchors
            .iter()
            .filter(|a| a.parent_handrail == h.id)
            .min_by(|a, b| {
                let da = (a.position() - h.pose.translation).norm();
                let db = (b.position() - h.pose.translation).norm();
                da.total_cmp(&db)
            })
    }

    pub fn to_json(&self) -> Result<String, EnvironmentError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, EnvironmentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), EnvironmentError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, EnvironmentError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedAnchor {
    pub anchor: usize,
    /// Forward progress from the search centre along the heading.
    pub progress: f64,
    /// `|progress − stride_length|`.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct AnchorQuery {
    pub side: Side,
    pub mount_world: Pose,
    pub search_center: Vec3,
    /// Unit forward direction used to measure progress.
    pub heading: Vec3,
    pub stride_length: f64,
    pub limb_reach: f64,
}

/// Reachable anchors on the query side, best first (ties by id).
pub fn candidate_anchors(env: &Environment, query: &AnchorQuery) -> Vec<RankedAnchor> {
    let mount = query.mount_world.translation;
    let mut out: Vec<RankedAnchor> = env
        .anchors
        .iter()
        .filter(|a| a.side == query.side)
        .filter(|a| (a.position() - mount).norm() <= query.limb_reach)
        .map(|a| {
            let progress = (a.position() - query.search_center).dot(&query.heading);
            RankedAnchor {
                anchor: a.id,
                progress,
                cost: (progress - query.stride_length).abs(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.anchor.cmp(&b.anchor)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrun() -> EnvironmentSpec {
        EnvironmentSpec {
            overrun: 0.0,
            ..EnvironmentSpec::default()
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let spec = EnvironmentSpec::with_seed(42);
        let a = generate_environment(&spec).unwrap();
        let b = generate_environment(&spec).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = generate_environment(&EnvironmentSpec::with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pair_count_matches_offset_range() {
        // pairs at x < 10 with steps in [0.275, 0.325]
        let lo = (10.0_f64 / 0.325).ceil() as usize;
        let hi = (10.0_f64 / 0.275).ceil() as usize;
        assert_eq!((lo, hi), (31, 37));
        for seed in 0..50 {
            let env = generate_environment(&EnvironmentSpec { seed, ..no_overrun() }).unwrap();
            assert!((lo..=hi).contains(&env.pair_count()), "{}", env.pair_count());
        }
        let fast = generate_environment(&EnvironmentSpec { x_offset_range: [0.325, 0.325], ..no_overrun() }).unwrap();
        let slow = generate_environment(&EnvironmentSpec { x_offset_range: [0.275, 0.275], ..no_overrun() }).unwrap();
        assert_eq!((fast.pair_count(), slow.pair_count()), (lo, hi));
    }

    #[test]
    fn midpoint_spec_is_regular_ladder() {
        let env = generate_environment(&EnvironmentSpec::default().regular()).unwrap();
        for h in &env.handrails {
            let sign = if h.side == Side::Left { 1.0 } else { -1.0 };
            let expected = Vec3::new(0.3 * h.pair as f64, sign * 0.9, 0.0);
            assert!((h.pose.translation - expected).norm() < 1e-12);
            assert!((h.pose.rotation.matrix() - nalgebra::Matrix3::identity()).amax() < 1e-15);
        }
    }

    #[test]
    fn anchors_lie_on_their_handrail() {
        let env = generate_environment(&EnvironmentSpec::with_seed(7)).unwrap();
        for a in &env.anchors {
            let h = &env.handrails[a.parent_handrail];
            let local = h.pose.inverse().transform_point(&a.position());
            assert!(local.y.abs() < 1e-12 && local.z.abs() < 1e-12);
            assert!(local.x.abs() <= 0.5 * h.length + 1e-12);
            assert!(a.grasp_pose.z_axis().dot(&h.pose.x_axis()).abs() < 1e-12);
            assert_eq!(a.side, h.side);
        }
    }

    #[test]
    fn offsets_and_rotations_stay_in_range() {
        let spec = EnvironmentSpec {
            target_distance: 3000.0,
            overrun: 0.0,
            ..EnvironmentSpec::with_seed(11)
        };
        let env = generate_environment(&spec).unwrap();
        assert!(env.pair_count() > 5000);
        let centers: Vec<(Vec3, Vec3)> = (0..env.pair_count())
            .map(|p| {
                let l = &env.handrails[2 * p];
                let r = &env.handrails[2 * p + 1];
                assert!(l.side == Side::Left && r.side == Side::Right);
                (l.pose.translation, r.pose.translation)
            })
            .collect();
        let m = spec.max_rotation;
        for h in &env.handrails {
            // R = Rx(roll)·Ry(pitch)·Rz(yaw)
            let r = h.pose.rotation.matrix();
            let pitch_i = r[(0, 2)].asin();
            let roll_i = (-r[(1, 2)]).atan2(r[(2, 2)]);
            let yaw_i = (-r[(0, 1)]).atan2(r[(0, 0)]);
            for a in [roll_i, pitch_i, yaw_i] {
                assert!(a.abs() <= m + 1e-12);
            }
        }
        for (l, r) in &centers {
            let d = l - r;
            assert!(d.y >= 1.6 - 1e-12 && d.y <= 2.0 + 1e-12);
            assert!(d.x.abs() <= 0.15 + 1e-12 && d.z.abs() <= 0.15 + 1e-12);
        }
        for w in centers.windows(2) {
            let c0 = (w[0].0 + w[0].1) * 0.5;
            let c1 = (w[1].0 + w[1].1) * 0.5;
            let d = c1 - c0;
            assert!(d.x >= 0.275 - 1e-12 && d.x <= 0.325 + 1e-12);
            assert!(d.y.abs() <= 0.15 + 1e-12 && d.z.abs() <= 0.1 + 1e-12);
        }
    }

    fn query(side: Side, mount: Vec3, center: Vec3, reach: f64) -> AnchorQuery {
        AnchorQuery {
            side,
            mount_world: Pose::from_translation(mount),
            search_center: center,
            heading: Vec3::x(),
            stride_length: 0.6,
            limb_reach: reach,
        }
    }

    #[test]
    fn candidate_examples() {
        let empty = Environment::empty(EnvironmentSpec::default());
        assert!(candidate_anchors(&empty, &query(Side::Left, Vec3::zeros(), Vec3::zeros(), 2.0)).is_empty());

        let env = generate_environment(&EnvironmentSpec::default().regular()).unwrap();
        let start = env.center_anchor(3, Side::Left).unwrap().position();
        let ranked = candidate_anchors(&env, &query(Side::Left, Vec3::new(0.9 + 0.35, 0.3, 0.8), start, 1.68));
        let best = env.anchor(ranked[0].anchor);
        assert_eq!(env.handrails[best.parent_handrail].pair, 5);
        assert!(ranked[0].cost < 1e-12);
        assert!(ranked.iter().all(|r| env.anchor(r.anchor).side == Side::Left));
        assert!(ranked.windows(2).all(|w| w[0].cost <= w[1].cost));

        // rails sit 0.9 m to each side of the centreline
        let short = candidate_anchors(&env, &query(Side::Left, Vec3::new(0.9, 0.0, 0.0), start, 0.85));
        assert!(short.is_empty());
    }

    #[test]
    fn candidates_survive_serialization() {
        let env = generate_environment(&EnvironmentSpec::with_seed(5)).unwrap();
        let back = Environment::from_json(&env.to_json().unwrap()).unwrap();
        let q = query(Side::Right, Vec3::new(1.0, -0.3, 0.8), Vec3::new(0.6, -0.9, 0.0), 1.68);
        let a = candidate_anchors(&env, &q);
        let b = candidate_anchors(&back, &q);
        assert!(!a.is_empty());
        assert_eq!(a.iter().map(|r| r.anchor).collect::<Vec<_>>(), b.iter().map(|r| r.anchor).collect::<Vec<_>>());
        assert!(a.iter().zip(&b).all(|(x, y)| (x.cost - y.cost).abs() < 1e-12));
    }
}
