use serde::{Deserialize, Serialize};

use crate::math::{angle_diff, Rot, Vec2};
use crate::refmotion::ReferenceFrame;
use crate::sim::{SimState, WorldModel};

/// Policy input. Object and contact quantities are expressed in the robot
/// root frame; the root pitch is measured against the gravity direction, so
/// the whole vector is invariant to rigid motions of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    /// `(sin, cos)` of the root pitch relative to upright.
    pub root_ori: [f64; 2],
    pub root_lin_vel: Vec2,
    pub root_ang_vel: f64,
    pub prev_action: Vec<f64>,
    pub phase: f64,
    pub object_pos_root: Vec2,
    pub object_ori_rel: f64,
    pub object_joint: f64,
    /// One point per end-effector; `(0, 0)` when the end-effector is not
    /// flagged for contact.
    pub contact_points_root: Vec<Vec2>,
    pub contact_flags: Vec<f64>,
}

impl Observation {
    pub fn dim(n_joints: usize, n_eef: usize) -> usize {
        3 * n_joints + 2 + 2 + 1 + 1 + 2 + 1 + 1 + 3 * n_eef
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::dim(self.joint_pos.len(), self.contact_flags.len()));
        self.write_into(&mut v);
        v
    }

    pub fn write_into(&self, v: &mut Vec<f64>) {
        v.clear();
        v.extend_from_slice(&self.joint_pos);
        v.extend_from_slice(&self.joint_vel);
        v.extend_from_slice(&self.root_ori);
        v.extend([self.root_lin_vel.x, self.root_lin_vel.z, self.root_ang_vel]);
        v.extend_from_slice(&self.prev_action);
        v.push(self.phase);
        v.extend([self.object_pos_root.x, self.object_pos_root.z, self.object_ori_rel, self.object_joint]);
        for p in &self.contact_points_root {
            v.extend([p.x, p.z]);
        }
        v.extend_from_slice(&self.contact_flags);
    }
}

/// Heading of "up" implied by the gravity vector.
pub(crate) fn up_angle(world: &WorldModel) -> f64 {
    let g = world.settings.gravity;
    if g.length_squared() == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    (-g.z).atan2(-g.x)
}

pub fn build_observation(
    world: &WorldModel,
    state: &SimState,
    frame: &ReferenceFrame,
    prev_action: &[f64],
    phase: f64,
) -> Observation {
    let root = state.root();
    let rot = Rot::new(root.pose.angle);
    let to_root = |p: Vec2| rot.apply_inverse(p - root.pose.pos);
    let pitch = angle_diff(root.pose.angle, up_angle(world) - std::f64::consts::FRAC_PI_2);
    let object = state.object(world);
    let contact_points_root = frame
        .contact_flags
        .iter()
        .zip(&frame.contact_anchor_ids)
        .map(|(&flag, id)| match (flag, id.as_deref().and_then(|id| world.object.anchor(id))) {
            (1, Some(anchor)) => to_root(object.pose.transform_point(anchor.offset)),
            _ => Vec2::ZERO,
        })
        .collect();
    Observation {
        joint_pos: state.joint_pos.clone(),
        joint_vel: state.joint_vel.clone(),
        root_ori: [pitch.sin(), pitch.cos()],
        root_lin_vel: rot.apply_inverse(root.vel),
        root_ang_vel: root.ang_vel,
        prev_action: prev_action.to_vec(),
        phase,
        object_pos_root: to_root(object.pose.pos),
        object_ori_rel: angle_diff(object.pose.angle, root.pose.angle),
        object_joint: state.object_joint_pos.unwrap_or(0.0),
        contact_points_root,
        contact_flags: frame.contact_flags.iter().map(|&f| f as f64).collect(),
    }
}
