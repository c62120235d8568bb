use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::spatial::{Pose, Vec3, Wrench};

/// Margin reported for the zero wrench, which every contact set resists.
pub const MARGIN_SENTINEL: f64 = 1.0e6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContactError {
    #[error("invalid contact model: {0}")]
    InvalidModel(String),
    #[error("limb {0} appears twice in the contact set")]
    DuplicateLimb(usize),
    #[error("empty direction set")]
    EmptyDirections,
    #[error("LP solver failure: {0}")]
    Solver(String),
}

/// How the friction cone and the grasp ball combine into one admissible set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceComposition {
    MinkowskiSum,
    /// Convex hull of the union.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactModel {
    pub friction_coefficient: f64,
    pub cone_facets: usize,
    pub normal_force_cap: f64,
    pub grasp_force_radius: f64,
    /// Radius of the ball of pure torques a closed gripper transmits (N·m). The
    /// gripper holds the rail at several peripheral points, so this exceeds the
    /// wrist motor limit.
    pub grasp_torque_radius: f64,
    pub composition: ForceComposition,
}

impl Default for ContactModel {
    fn default() -> Self {
        Self {
            friction_coefficient: 0.5,
            cone_facets: 8,
            normal_force_cap: 260.0,
            grasp_force_radius: 260.0,
            grasp_torque_radius: 150.0,
            composition: ForceComposition::MinkowskiSum,
        }
    }
}

impl ContactModel {
    pub fn ball_only(radius: f64) -> Self {
        Self {
            normal_force_cap: 0.0,
            grasp_force_radius: radius,
            grasp_torque_radius: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ContactError> {
        let bad = |m: &str| Err(ContactError::InvalidModel(m.to_string()));
        if !(self.friction_coefficient > 0.0) {
            return bad("friction_coefficient must be positive");
        }
        if self.cone_facets < 4 {
            return bad("cone_facets must be at least 4");
        }
        if !(self.normal_force_cap >= 0.0) || !(self.grasp_force_radius >= 0.0) || !(self.grasp_torque_radius >= 0.0) {
            return bad("force and torque bounds must be nonnegative");
        }
        Ok(())
    }

    /// Cone edges in the frame's parent, each with unit normal component.
    pub fn cone_edges(&self, frame: &Pose) -> Vec<Vec3> {
        let n = frame.z_axis();
        let t1 = frame.x_axis();
        let t2 = frame.y_axis();
        (0..self.cone_facets)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / self.cone_facets as f64;
                n + (t1 * phi.cos() + t2 * phi.sin()) * self.friction_coefficient
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub position: Vec3,
    /// z is the outward surface normal.
    pub contact_frame: Pose,
    pub limb_index: usize,
}

impl ContactPoint {
    pub fn new(limb_index: usize, contact_frame: Pose) -> Self {
        Self {
            position: contact_frame.translation,
            contact_frame,
            limb_index,
        }
    }

    fn cone_support(&self, model: &ContactModel, v: &Vec3) -> f64 {
        if model.normal_force_cap == 0.0 {
            return 0.0;
        }
        let best = model
            .cone_edges(&self.contact_frame)
            .iter()
            .map(|e| e.dot(v))
            .fold(0.0, f64::max);
        model.normal_force_cap * best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub contacts: Vec<ContactPoint>,
    pub model: ContactModel,
}

impl ContactSet {
    pub fn new(contacts: Vec<ContactPoint>, model: ContactModel) -> Result<Self, ContactError> {
        model.validate()?;
        let mut seen = [false; 64];
        for c in &contacts {
            let slot = seen.get_mut(c.limb_index).ok_or(ContactError::DuplicateLimb(c.limb_index))?;
            if *slot {
                return Err(ContactError::DuplicateLimb(c.limb_index));
            }
            *slot = true;
        }
        Ok(Self { contacts, model })
    }

    pub fn empty(model: ContactModel) -> Self {
        Self {
            contacts: Vec::new(),
            model,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn limbs(&self) -> impl Iterator<Item = usize> + '_ {
        self.contacts.iter().map(|c| c.limb_index)
    }

    pub fn without_limb(&self, limb: usize) -> Self {
        Self {
            contacts: self.contacts.iter().copied().filter(|c| c.limb_index != limb).collect(),
            model: self.model,
        }
    }

    /// Inserts or replaces the contact of `contact.limb_index`.
    pub fn with_contact(&self, contact: ContactPoint) -> Self {
        let mut out = self.without_limb(contact.limb_index);
        out.contacts.push(contact);
        out.contacts.sort_by_key(|c| c.limb_index);
        out
    }
}

/// `max f·v` over the admissible force set of one contact. Homogeneous in `v`.
pub fn contact_force_support(contact: &ContactPoint, model: &ContactModel, direction: &Vec3) -> f64 {
    let cone = contact.cone_support(model, direction);
    let ball = model.grasp_force_radius * direction.norm();
    match model.composition {
        ForceComposition::MinkowskiSum => cone + ball,
        ForceComposition::Union => cone.max(ball),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetSupport {
    pub force: f64,
    pub torque: f64,
    /// Set when the contact set was empty.
    pub empty: bool,
}

/// Independent force and torque projections of the net support about `reference`.
pub fn net_support(set: &ContactSet, force_direction: &Vec3, torque_direction: &Vec3, reference: &Vec3) -> NetSupport {
    let mut force = 0.0;
    let mut torque = 0.0;
    for c in &set.contacts {
        force += contact_force_support(c, &set.model, force_direction);
        // sup (p × f)·u = sup f·(u × p)
        let arm = c.position - reference;
        torque += contact_force_support(c, &set.model, &torque_direction.cross(&arm))
            + set.model.grasp_torque_radius * torque_direction.norm();
    }
    NetSupport {
        force,
        torque,
        empty: set.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub feasible: bool,
    /// Largest uniform scaling of the required wrench that stays feasible
    /// (certified lower bound; `feasible ⟺ margin ≥ 1`).
    pub margin: f64,
    /// Certified bracket on the exact margin.
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub cuts: usize,
}

impl Membership {
    fn trivial(feasible: bool, margin: f64) -> Self {
        Self {
            feasible,
            margin,
            lower_bound: margin,
            upper_bound: margin,
            cuts: 0,
        }
    }
}

/// The 26 neighbourhood directions, normalized.
pub fn neighbourhood_directions() -> Vec<Vec3> {
    let mut out = Vec::with_capacity(26);
    for x in -1i32..=1 {
        for y in -1i32..=1 {
            for z in -1i32..=1 {
                if x != 0 || y != 0 || z != 0 {
                    out.push(Vec3::new(x as f64, y as f64, z as f64).normalize());
                }
            }
        }
    }
    out
}

const MAX_CUT_ROUNDS: usize = 40;
const MARGIN_REL_TOL: f64 = 1e-7;

/// Margin of `required` against the admissible wrench set of `set`.
///
/// Solves the support-function dual `min Σ_i h_i(Aᵢᵀd) s.t. d·W = 1`, with the
/// grasp force and torque balls as vertex polytopes refined by cutting planes until the
/// feasibility decision is certified or the bracket closes. The LP value is a
/// lower bound on the exact margin; the exact support at the LP minimizer is
/// an upper bound.
pub fn wrench_membership(set: &ContactSet, required: &Wrench) -> Result<Membership, ContactError> {
    wrench_membership_with(set, required, Refinement::Margin)
}

/// How far [`wrench_membership_with`] refines the ball linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Refinement {
    /// Until the margin bracket closes.
    Margin,
    /// Until the feasibility decision is certified; `margin` is then only a lower bound.
    Decision,
}

pub fn wrench_membership_with(
    set: &ContactSet,
    required: &Wrench,
    mode: Refinement,
) -> Result<Membership, ContactError> {
    let w = required.as_array();
    let scale = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(Membership::trivial(true, MARGIN_SENTINEL));
    }
    if set.is_empty() {
        return Ok(Membership::trivial(false, 0.0));
    }
    let w: [f64; 6] = std::array::from_fn(|i| w[i] / scale);
    let model = &set.model;
    let arms: Vec<Vec3> = set.contacts.iter().map(|c| c.position - required.reference_point).collect();
    let edges: Vec<Vec<Vec3>> = set
        .contacts
        .iter()
        .map(|c| if model.normal_force_cap > 0.0 { model.cone_edges(&c.contact_frame) } else { Vec::new() })
        .collect();

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let d: Vec<Variable> = (0..6).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    lp.add_constraint(
        d.iter().zip(w.iter()).map(|(v, c)| (*v, *c)).collect::<Vec<_>>(),
        ComparisonOp::Eq,
        1.0,
    );
    let union = model.composition == ForceComposition::Union;
    let mut cone_vars = Vec::with_capacity(arms.len());
    let mut ball_vars = Vec::with_capacity(arms.len());
    let mut torque_vars = Vec::with_capacity(arms.len());
    for (i, arm) in arms.iter().enumerate() {
        let t = lp.add_var(1.0, (0.0, f64::INFINITY));
        let s = if union { t } else { lp.add_var(1.0, (0.0, f64::INFINITY)) };
        for e in &edges[i] {
            lp.add_constraint(support_row(t, &d, &(e * model.normal_force_cap), arm), ComparisonOp::Ge, 0.0);
        }
        if model.grasp_force_radius > 0.0 {
            for g in neighbourhood_directions() {
                lp.add_constraint(support_row(s, &d, &(g * model.grasp_force_radius), arm), ComparisonOp::Ge, 0.0);
            }
        }
        if model.grasp_torque_radius > 0.0 {
            let z = lp.add_var(1.0, (0.0, f64::INFINITY));
            for g in neighbourhood_directions() {
                lp.add_constraint(torque_row(z, &d, &(g * model.grasp_torque_radius)), ComparisonOp::Ge, 0.0);
            }
            torque_vars.push(Some(z));
        } else {
            torque_vars.push(None);
        }
        cone_vars.push(t);
        ball_vars.push(s);
    }

    let mut solution = lp.solve().map_err(|e| ContactError::Solver(e.to_string()))?;
    let mut cuts = 0;
    loop {
        let dv: [f64; 6] = std::array::from_fn(|k| *solution.var_value(d[k]));
        let lower = solution.objective();
        let (df, dt) = (Vec3::new(dv[0], dv[1], dv[2]), Vec3::new(dv[3], dv[4], dv[5]));
        let mut upper = model.grasp_torque_radius * dt.norm() * set.len() as f64;
        let mut pending = Vec::new();
        for (i, c) in set.contacts.iter().enumerate() {
            let v = df + dt.cross(&arms[i]);
            upper += contact_force_support(c, model, &v);
            let n = v.norm();
            if n > 0.0 && model.grasp_force_radius > 0.0 {
                pending.push((i, v / n));
            }
        }
        let closed = upper - lower <= MARGIN_REL_TOL * upper.max(1e-12);
        let decided = lower >= scale || upper < scale;
        if closed || cuts >= MAX_CUT_ROUNDS || (decided && mode == Refinement::Decision) {
            return Ok(Membership {
                feasible: lower >= scale,
                margin: lower / scale,
                lower_bound: lower / scale,
                upper_bound: upper / scale,
                cuts,
            });
        }
        let mut rows: Vec<Vec<(Variable, f64)>> = pending
            .into_iter()
            .map(|(i, g)| support_row(ball_vars[i], &d, &(g * model.grasp_force_radius), &arms[i]))
            .collect();
        if dt.norm() > 0.0 {
            let g = dt.normalize() * model.grasp_torque_radius;
            rows.extend(torque_vars.iter().flatten().map(|z| torque_row(*z, &d, &g)));
        }
        for row in rows {
            solution = solution
                .add_constraint(row, ComparisonOp::Ge, 0.0)
                .map_err(|e| ContactError::Solver(e.to_string()))?;
        }
        cuts += 1;
    }
}

/// Row `var − f·(d_f + d_τ × arm) ≥ 0` for one vertex force `f`.
fn support_row(var: Variable, d: &[Variable], f: &Vec3, arm: &Vec3) -> Vec<(Variable, f64)> {
    // d_τ·(arm × f) = f·(d_τ × arm)
    let m = arm.cross(f);
    vec![
        (d[0], -f.x),
        (d[1], -f.y),
        (d[2], -f.z),
        (d[3], -m.x),
        (d[4], -m.y),
        (d[5], -m.z),
        (var, 1.0),
    ]
}

/// Row `var − m·d_τ ≥ 0` for one vertex torque `m`.
fn torque_row(var: Variable, d: &[Variable], m: &Vec3) -> Vec<(Variable, f64)> {
    vec![(d[3], -m.x), (d[4], -m.y), (d[5], -m.z), (var, 1.0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    pub force: Vec3,
    pub torque: Vec3,
}

impl DirectionPair {
    pub fn new(force: Vec3, torque: Vec3) -> Self {
        Self { force, torque }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub w_a: f64,
    pub w_s: f64,
    pub w_b: f64,
    pub delta_x: f64,
    pub delta_theta: f64,
    pub arbitrary_directions: Vec<DirectionPair>,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            w_a: 1.0 / 3.0,
            w_s: 1.0 / 3.0,
            w_b: 1.0 / 3.0,
            delta_x: 0.1,
            delta_theta: 0.1,
            arbitrary_directions: neighbourhood_directions().into_iter().map(|u| DirectionPair::new(u, u)).collect(),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<(), ContactError> {
        let bad = |m: &str| Err(ContactError::InvalidModel(m.to_string()));
        if [self.w_a, self.w_s, self.w_b].iter().any(|w| !(*w >= 0.0)) {
            return bad("score weights must be nonnegative");
        }
        if !(self.delta_x > 0.0 && self.delta_theta > 0.0) {
            return bad("virtual displacements must be positive");
        }
        if self.arbitrary_directions.is_empty() {
            return Err(ContactError::EmptyDirections);
        }
        for p in &self.arbitrary_directions {
            if (p.force.norm() - 1.0).abs() > 1e-9 || (p.torque.norm() - 1.0).abs() > 1e-9 {
                return bad("direction vectors must be unit length");
            }
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            w_a: self.w_a * k,
            w_s: self.w_s * k,
            w_b: self.w_b * k,
            ..self.clone()
        }
    }
}

/// Short SHA-256 digest of the canonical JSON of both configs.
pub fn config_hash(score: &ScoreConfig, model: &ContactModel) -> String {
    let doc = serde_json::json!({ "score": score, "contact_model": model });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub total: f64,
    pub arbitrary: f64,
    pub swing: f64,
    pub base: f64,
}

fn subscore(set: &ContactSet, cfg: &ScoreConfig, dirs: &[DirectionPair], reference: &Vec3) -> Result<f64, ContactError> {
    if dirs.is_empty() {
        return Err(ContactError::EmptyDirections);
    }
    let (mut f_min, mut t_min) = (f64::INFINITY, f64::INFINITY);
    for u in dirs {
        let h = net_support(set, &u.force, &u.torque, reference);
        f_min = f_min.min(h.force);
        t_min = t_min.min(h.torque);
    }
    Ok(f_min * cfg.delta_x + t_min * cfg.delta_theta)
}

/// Weighted min–max support score about `reference`.
pub fn contact_config_score(
    set: &ContactSet,
    cfg: &ScoreConfig,
    swing_dirs: &[DirectionPair],
    base_dirs: &[DirectionPair],
    reference: &Vec3,
) -> Result<ScoreBreakdown, ContactError> {
    if set.is_empty() {
        return Ok(ScoreBreakdown::default());
    }
    let arbitrary = subscore(set, cfg, &cfg.arbitrary_directions, reference)?;
    let swing = subscore(set, cfg, swing_dirs, reference)?;
    let base = subscore(set, cfg, base_dirs, reference)?;
    Ok(ScoreBreakdown {
        total: cfg.w_a * arbitrary + cfg.w_s * swing + cfg.w_b * base,
        arbitrary,
        swing,
        base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::frame_from_z_and_x;
    use proptest::prelude::*;

    fn contact(limb: usize, p: Vec3, n: Vec3) -> ContactPoint {
        let r = frame_from_z_and_x(&n, &Vec3::x()).unwrap();
        ContactPoint::new(limb, Pose::new(r, p))
    }

    #[test]
    fn ball_only_support_is_radius() {
        let m = ContactModel::ball_only(260.0);
        let c = contact(0, Vec3::new(1.0, 2.0, 3.0), Vec3::z());
        for u in neighbourhood_directions() {
            assert!((contact_force_support(&c, &m, &u) - 260.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normal_and_pull_supports() {
        let m = ContactModel::default();
        let n = Vec3::new(0.0, 0.6, 0.8);
        let c = contact(0, Vec3::zeros(), n);
        assert!((contact_force_support(&c, &m, &n) - 520.0).abs() < 1e-9);
        assert!((contact_force_support(&c, &m, &-n) - 260.0).abs() < 1e-9);
    }

    #[test]
    fn empty_set_edge_cases() {
        let set = ContactSet::empty(ContactModel::default());
        let h = net_support(&set, &Vec3::x(), &Vec3::y(), &Vec3::zeros());
        assert_eq!((h.force, h.torque, h.empty), (0.0, 0.0, true));
        let zero = wrench_membership(&set, &Wrench::zero_at(Vec3::zeros())).unwrap();
        assert!(zero.feasible);
        let w = Wrench::new(Vec3::x(), Vec3::zeros(), Vec3::zeros());
        assert!(!wrench_membership(&set, &w).unwrap().feasible);
        let s = contact_config_score(&set, &ScoreConfig::default(), &[], &[], &Vec3::zeros()).unwrap();
        assert_eq!(s.total, 0.0);
    }

    #[test]
    fn duplicate_limbs_rejected() {
        let c = contact(2, Vec3::zeros(), Vec3::z());
        assert_eq!(
            ContactSet::new(vec![c, c], ContactModel::default()),
            Err(ContactError::DuplicateLimb(2))
        );
    }

    #[test]
    fn two_ball_contacts_torque_support() {
        let r = 260.0;
        let p1 = Vec3::new(0.4, 0.9, -0.2);
        let p2 = Vec3::new(-0.5, -0.8, 0.3);
        let set = ContactSet::new(
            vec![contact(0, p1, Vec3::z()), contact(1, p2, Vec3::z())],
            ContactModel::ball_only(r),
        )
        .unwrap();
        let u = Vec3::new(0.3, -0.5, 0.8).normalize();
        let h = net_support(&set, &Vec3::x(), &u, &Vec3::zeros());
        assert!((h.torque - r * (u.cross(&p1).norm() + u.cross(&p2).norm())).abs() < 1e-9);
        assert!((h.force - 2.0 * r).abs() < 1e-9);
    }

    #[test]
    fn membership_examples() {
        let set = ContactSet::new(vec![contact(0, Vec3::zeros(), Vec3::z())], ContactModel::ball_only(260.0)).unwrap();
        let m = wrench_membership(&set, &Wrench::zero_at(Vec3::zeros())).unwrap();
        assert!(m.feasible && m.margin == MARGIN_SENTINEL);
        let f = Vec3::new(0.3, -0.4, 0.5).normalize() * 259.0;
        let m = wrench_membership(&set, &Wrench::new(f, Vec3::zeros(), Vec3::zeros())).unwrap();
        assert!(m.feasible);
        assert!((m.margin - 260.0 / 259.0).abs() < 1e-6, "{m:?}");
        let m = wrench_membership(&set, &Wrench::new(f * (261.0 / 259.0), Vec3::zeros(), Vec3::zeros())).unwrap();
        assert!(!m.feasible && m.margin < 1.0);
        let t = Wrench::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::zeros());
        let m = wrench_membership(&set, &t).unwrap();
        assert!(!m.feasible);
        assert!(m.margin.abs() < 1e-9);
    }

    #[test]
    fn margin_scales_inversely() {
        let set = ContactSet::new(
            vec![
                contact(0, Vec3::new(0.5, 1.0, 0.0), Vec3::new(0.0, -0.3, 1.0).normalize()),
                contact(1, Vec3::new(0.5, -1.0, 0.1), Vec3::z()),
                contact(2, Vec3::new(-0.5, 1.0, -0.1), Vec3::z()),
            ],
            ContactModel::default(),
        )
        .unwrap();
        let w = Wrench::new(Vec3::new(100.0, -40.0, 30.0), Vec3::new(20.0, 50.0, -10.0), Vec3::zeros());
        let a = wrench_membership(&set, &w).unwrap();
        let scaled = Wrench::new(w.force * 2.0, w.torque * 2.0, w.reference_point);
        let b = wrench_membership(&set, &scaled).unwrap();
        assert!((a.margin - 2.0 * b.margin).abs() < 1e-6 * a.margin);
        assert!(a.lower_bound <= a.upper_bound * (1.0 + 1e-9));
        for k in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            let at = Wrench::new(w.force * (k * a.margin), w.torque * (k * a.margin), w.reference_point);
            for mode in [Refinement::Margin, Refinement::Decision] {
                let m = wrench_membership_with(&set, &at, mode).unwrap();
                assert_eq!(m.feasible, k <= 1.0, "{k} {mode:?}");
            }
        }
    }

    #[test]
    fn union_mode_is_inside_sum() {
        let mut m = ContactModel::default();
        let c = contact(0, Vec3::zeros(), Vec3::z());
        let u = Vec3::new(0.2, 0.1, 0.9).normalize();
        let sum = contact_force_support(&c, &m, &u);
        m.composition = ForceComposition::Union;
        let uni = contact_force_support(&c, &m, &u);
        assert!(uni <= sum && uni >= 260.0);
    }

    #[test]
    fn score_scales_with_weights() {
        let set = ContactSet::new(
            vec![contact(0, Vec3::new(1.0, 0.0, 0.0), Vec3::z()), contact(3, Vec3::new(0.0, 1.0, 0.0), Vec3::z())],
            ContactModel::default(),
        )
        .unwrap();
        let cfg = ScoreConfig::default();
        let dirs = cfg.arbitrary_directions.clone();
        let a = contact_config_score(&set, &cfg, &dirs, &dirs, &Vec3::zeros()).unwrap();
        let b = contact_config_score(&set, &cfg.scaled(2.0), &dirs, &dirs, &Vec3::zeros()).unwrap();
        assert!((b.total - 2.0 * a.total).abs() < 1e-9);
        assert!(a.arbitrary >= 0.0 && a.swing >= 0.0 && a.base >= 0.0);
    }

    #[test]
    fn config_hash_tracks_changes() {
        let cfg = ScoreConfig::default();
        let m = ContactModel::default();
        assert_eq!(config_hash(&cfg, &m), config_hash(&cfg.clone(), &m));
        assert_ne!(config_hash(&cfg.scaled(2.0), &m), config_hash(&cfg, &m));
        assert_eq!(config_hash(&cfg, &m).len(), 16);
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
    }

    fn arb_contact(limb: usize) -> impl Strategy<Value = ContactPoint> {
        ((-1.5..1.5f64, -1.5..1.5f64, -1.0..1.0f64), arb_unit())
            .prop_map(move |((x, y, z), n)| contact(limb, Vec3::new(x, y, z), n))
    }

    proptest! {
        #[test]
        fn adding_a_contact_never_decreases_support(
            a in arb_contact(0), b in arb_contact(1), c in arb_contact(2),
            uf in arb_unit(), ut in arb_unit(),
        ) {
            let m = ContactModel::default();
            let small = ContactSet::new(vec![a, b], m).unwrap();
            let big = small.with_contact(c);
            let hs = net_support(&small, &uf, &ut, &Vec3::zeros());
            let hb = net_support(&big, &uf, &ut, &Vec3::zeros());
            prop_assert!(hb.force >= hs.force && hb.torque >= hs.torque);
            let cfg = ScoreConfig::default();
            let dirs = vec![DirectionPair::new(uf, ut)];
            let ss = contact_config_score(&small, &cfg, &dirs, &dirs, &Vec3::zeros()).unwrap();
            let sb = contact_config_score(&big, &cfg, &dirs, &dirs, &Vec3::zeros()).unwrap();
            prop_assert!(sb.arbitrary >= ss.arbitrary && sb.swing >= ss.swing && sb.base >= ss.base);
        }

        #[test]
        fn support_is_additive(a in arb_contact(0), b in arb_contact(1), uf in arb_unit(), ut in arb_unit()) {
            let m = ContactModel::default();
            let r = Vec3::new(0.1, -0.2, 0.05);
            let ha = net_support(&ContactSet::new(vec![a], m).unwrap(), &uf, &ut, &r);
            let hb = net_support(&ContactSet::new(vec![b], m).unwrap(), &uf, &ut, &r);
            let hab = net_support(&ContactSet::new(vec![a, b], m).unwrap(), &uf, &ut, &r);
            prop_assert!((hab.force - ha.force - hb.force).abs() < 1e-9);
            prop_assert!((hab.torque - ha.torque - hb.torque).abs() < 1e-9);
        }

        #[test]
        fn score_ranking_survives_weight_scaling(
            a in arb_contact(0), b in arb_contact(1), c in arb_contact(2), k in 0.1..10.0f64,
        ) {
            let m = ContactModel::default();
            let s1 = ContactSet::new(vec![a, b], m).unwrap();
            let s2 = ContactSet::new(vec![b, c], m).unwrap();
            let cfg = ScoreConfig::default();
            let d = cfg.arbitrary_directions.clone();
            let x1 = contact_config_score(&s1, &cfg, &d, &d, &Vec3::zeros()).unwrap().total;
            let x2 = contact_config_score(&s2, &cfg, &d, &d, &Vec3::zeros()).unwrap().total;
            let y1 = contact_config_score(&s1, &cfg.scaled(k), &d, &d, &Vec3::zeros()).unwrap().total;
            let y2 = contact_config_score(&s2, &cfg.scaled(k), &d, &d, &Vec3::zeros()).unwrap().total;
            prop_assert_eq!(x1 < x2, y1 < y2);
        }
    }
}
