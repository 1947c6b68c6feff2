use serde::{Deserialize, Serialize};

use super::world::{BodyId, WorldModel};
use crate::math::Vec2;

/// One solved contact point. `normal` points from `body_a` to `body_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub body_a: BodyId,
    pub body_b: BodyId,
    pub point: Vec2,
    pub normal: Vec2,
    /// Accumulated normal impulse over the step divided by dt.
    pub force: f64,
    /// Friction impulse divided by dt, signed along `normal.perp()`.
    pub tangent_force: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactReport {
    pub contacts: Vec<ContactPoint>,
    pub dt: f64,
}

impl ContactReport {
    pub fn between(&self, a: BodyId, b: BodyId) -> impl Iterator<Item = &ContactPoint> {
        self.contacts
            .iter()
            .filter(move |c| (c.body_a == a && c.body_b == b) || (c.body_a == b && c.body_b == a))
    }

    pub fn involving(&self, body: BodyId) -> impl Iterator<Item = &ContactPoint> {
        self.contacts
            .iter()
            .filter(move |c| c.body_a == body || c.body_b == body)
    }

    /// Total normal force on `body` from every contact it takes part in.
    pub fn total_force_on(&self, body: BodyId) -> f64 {
        self.involving(body).map(|c| c.force).sum()
    }

    /// Multiplies every force by `k`.
    pub(crate) fn scaled(mut self, k: f64) -> Self {
        for c in &mut self.contacts {
            c.force *= k;
            c.tangent_force *= k;
        }
        self
    }
}

/// Sum of normal-force magnitudes between an end-effector body and the
/// object body. No contact gives 0.
pub fn eef_contact_force(report: &ContactReport, _world: &WorldModel, eef_id: BodyId, object_body: BodyId) -> f64 {
    report.between(eef_id, object_body).map(|c| c.force.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(a: BodyId, b: BodyId, force: f64) -> ContactPoint {
        ContactPoint {
            body_a: a,
            body_b: b,
            point: Vec2::ZERO,
            normal: Vec2::new(0.0, 1.0),
            force,
            tangent_force: 0.0,
        }
    }

    #[test]
    fn pair_filter_is_order_free() {
        let r = ContactReport {
            contacts: vec![point(3, 7, 3.0), point(7, 3, 4.0), point(3, 1, 9.0)],
            dt: 0.01,
        };
        assert_eq!(r.between(3, 7).map(|c| c.force).sum::<f64>(), 7.0);
        assert_eq!(r.total_force_on(3), 16.0);
        assert_eq!(r.between(2, 7).count(), 0);
    }
}
