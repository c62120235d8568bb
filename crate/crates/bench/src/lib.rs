//! Benchmark fixtures shared by the criterion targets.

use microgait::contact::{ContactModel, ContactPoint, ContactSet};
use microgait::spatial::{Pose, Vec3};
use microgait::Morphology;

/// Four grasps on a regular ladder around a base at the origin.
pub fn four_contacts(model: ContactModel) -> ContactSet {
    let points = [(0.6, 0.9), (0.6, -0.9), (-0.6, 0.9), (-0.6, -0.9)];
    let contacts = points
        .iter()
        .enumerate()
        .map(|(l, &(x, y))| ContactPoint::new(l, Pose::from_translation(Vec3::new(x, y, -0.8))))
        .collect();
    ContactSet::new(contacts, model).expect("distinct limbs")
}

pub const MORPHOLOGIES: [Morphology; 2] = [Morphology::Ypp, Morphology::Rpp];
