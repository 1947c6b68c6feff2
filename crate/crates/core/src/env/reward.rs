use serde::{Deserialize, Serialize};

use super::config::EnvConfig;
use super::track::TrackSample;
use super::EnvError;
use crate::math::{angle_diff, Vec2};
use crate::sim::{ContactReport, SimState, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerm {
    pub raw: f64,
    pub weight: f64,
    pub weighted: f64,
}

impl RewardTerm {
    fn bonus(raw: f64, weight: f64) -> Self {
        Self {
            raw,
            weight,
            weighted: weight * raw,
        }
    }

    fn penalty(raw: f64, weight: f64) -> Self {
        Self {
            raw,
            weight,
            weighted: -weight * raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub body_local_pose: RewardTerm,
    pub root_global_pose: RewardTerm,
    pub body_global_vel: RewardTerm,
    pub joint_tracking: RewardTerm,
    pub object_pose: RewardTerm,
    pub interaction: RewardTerm,
    pub action_rate: RewardTerm,
    pub joint_pos_limits: RewardTerm,
    pub joint_vel: RewardTerm,
    pub torque_limits: RewardTerm,
    pub feet_impact: RewardTerm,
    pub feet_slip: RewardTerm,
    pub feet_air_time: RewardTerm,
    pub total: f64,
}

impl RewardBreakdown {
    pub const NAMES: [&'static str; 13] = [
        "body_local_pose",
        "root_global_pose",
        "body_global_vel",
        "joint_tracking",
        "object_pose",
        "interaction",
        "action_rate",
        "joint_pos_limits",
        "joint_vel",
        "torque_limits",
        "feet_impact",
        "feet_slip",
        "feet_air_time",
    ];

    pub fn terms(&self) -> [RewardTerm; 13] {
        [
            self.body_local_pose,
            self.root_global_pose,
            self.body_global_vel,
            self.joint_tracking,
            self.object_pose,
            self.interaction,
            self.action_rate,
            self.joint_pos_limits,
            self.joint_vel,
            self.torque_limits,
            self.feet_impact,
            self.feet_slip,
            self.feet_air_time,
        ]
    }

    fn finish(mut self) -> Self {
        self.total = self.terms().iter().map(|t| t.weighted).sum();
        self
    }
}

/// Product-form contact reward for one end-effector.
pub fn contact_reward_single(distance: f64, force: f64, sigma_pos: f64, sigma_frc: f64, f_thres: f64) -> f64 {
    (-distance / sigma_pos).exp() * ((force - f_thres) / sigma_frc).exp().min(1.0)
}

/// Interaction reward averaged over the end-effectors flagged for contact.
/// Returns 0 when no end-effector is flagged.
pub fn interaction_reward(
    eef_positions: &[Vec2],
    targets: &[Option<Vec2>],
    forces: &[f64],
    flags: &[u8],
    cfg: &EnvConfig,
) -> Result<f64, EnvError> {
    if !(cfg.sigma_pos > 0.0 && cfg.sigma_frc > 0.0 && cfg.f_thres > 0.0) {
        return Err(EnvError::Config {
            field: "sigma_pos/sigma_frc/f_thres".into(),
            reason: "must be > 0".into(),
        });
    }
    let mut sum = 0.0;
    let mut active = 0usize;
    for (i, &flag) in flags.iter().enumerate() {
        if flag != 1 {
            continue;
        }
        active += 1;
        let Some(target) = targets.get(i).copied().flatten() else {
            continue;
        };
        let d = eef_positions[i].distance(target);
        sum += contact_reward_single(d, forces[i].abs(), cfg.sigma_pos, cfg.sigma_frc, cfg.f_thres);
    }
    Ok(if active == 0 { 0.0 } else { sum / active as f64 })
}

/// Per-foot contact bookkeeping carried between control steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FootState {
    pub in_contact: bool,
    pub air_time: f64,
    pub last_force: f64,
}

/// Everything the reward needs beyond the state and reference.
pub struct RewardInputs<'a> {
    pub report: &'a ContactReport,
    pub prev_action: &'a [f64],
    pub action: &'a [f64],
    /// Feet bookkeeping before this step; updated in place.
    pub feet: &'a mut [FootState],
    /// Whether each foot is airborne in the reference at this phase.
    pub ref_foot_swing: &'a [bool],
}

/// Pose errors shared by rewards, terminations and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseErrors {
    pub root_pos: f64,
    pub root_ori: f64,
    pub body_local_mean: f64,
    pub body_local_max: f64,
    pub body_ori_max: f64,
    pub body_vel_mean: f64,
    pub joint_mean: f64,
    pub object_pos: f64,
    pub object_ori: f64,
    pub object_joint: f64,
}

pub fn pose_errors(world: &WorldModel, state: &SimState, reference: &TrackSample) -> PoseErrors {
    let frame = &reference.frame;
    let root = state.root().pose;
    let ref_root = frame.root_pose();
    let n_bodies = world.robot_body_count();
    let (mut sum, mut max, mut ori_max, mut vel_sum) = (0.0, 0.0f64, 0.0f64, 0.0);
    for b in 0..n_bodies {
        let actual = root.inverse_transform_point(state.bodies[b].pose.pos);
        let wanted = ref_root.inverse_transform_point(reference.body_poses[b].pos);
        let e = actual.distance(wanted);
        sum += e;
        max = max.max(e);
        let rel = angle_diff(state.bodies[b].pose.angle, root.angle);
        let rel_ref = angle_diff(reference.body_poses[b].angle, ref_root.angle);
        ori_max = ori_max.max(angle_diff(rel, rel_ref).abs());
        vel_sum += state.bodies[b].vel.distance(reference.body_vel[b]);
    }
    let nj = state.joint_pos.len().max(1);
    let joint_mean = state
        .joint_pos
        .iter()
        .zip(&frame.joint_pos)
        .map(|(q, r)| (q - r).abs())
        .sum::<f64>()
        / nj as f64;
    let object = state.object(world).pose;
    PoseErrors {
        root_pos: root.pos.distance(ref_root.pos),
        root_ori: angle_diff(root.angle, ref_root.angle).abs(),
        body_local_mean: sum / n_bodies as f64,
        body_local_max: max,
        body_ori_max: ori_max,
        body_vel_mean: vel_sum / n_bodies as f64,
        joint_mean,
        object_pos: object.pos.distance(frame.object_pos),
        object_ori: angle_diff(object.angle, frame.object_ori).abs(),
        object_joint: match (state.object_joint_pos, frame.object_joint) {
            (Some(q), Some(r)) => (q - r).abs(),
            _ => 0.0,
        },
    }
}

/// Position of each end-effector body and its flagged anchor (on the
/// object's actual pose).
pub fn eef_targets(world: &WorldModel, state: &SimState, frame: &crate::refmotion::ReferenceFrame) -> (Vec<Vec2>, Vec<Option<Vec2>>) {
    let object = state.object(world).pose;
    let positions = world.eef_ids().iter().map(|&id| state.bodies[id].pose.pos).collect();
    let targets = frame
        .contact_flags
        .iter()
        .zip(&frame.contact_anchor_ids)
        .map(|(&flag, id)| {
            if flag != 1 {
                return None;
            }
            id.as_deref()
                .and_then(|id| world.object.anchor(id))
                .map(|a| object.transform_point(a.offset))
        })
        .collect();
    (positions, targets)
}

pub fn eef_forces(world: &WorldModel, report: &ContactReport) -> Vec<f64> {
    world
        .eef_ids()
        .iter()
        .map(|&id| crate::sim::eef_contact_force(report, world, id, world.object_body()))
        .collect()
}

pub fn compute_reward(
    world: &WorldModel,
    state: &SimState,
    reference: &TrackSample,
    inputs: RewardInputs<'_>,
    cfg: &EnvConfig,
) -> Result<RewardBreakdown, EnvError> {
    let w = &cfg.weights;
    let s = &cfg.sigmas;
    let e = pose_errors(world, state, reference);
    let frame = &reference.frame;

    let (positions, targets) = eef_targets(world, state, frame);
    let forces = eef_forces(world, inputs.report);
    let interaction = interaction_reward(&positions, &targets, &forces, &frame.contact_flags, cfg)?;
    let interaction_weight = if cfg.use_interaction_reward { w.interaction } else { 0.0 };

    let action_rate: f64 = inputs
        .action
        .iter()
        .zip(inputs.prev_action)
        .map(|(a, b)| (a - b).powi(2))
        .sum();

    let mut limit_violation = 0.0;
    let mut torque_violation = 0.0;
    for (j, &q) in state.joint_pos.iter().enumerate() {
        let [lo, hi] = world.joint_limits(j);
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * cfg.soft_joint_limit;
        limit_violation += (mid - half - q).max(0.0) + (q - mid - half).max(0.0);
        let tau_max = world.robot.joints[j].torque_limit * cfg.soft_torque_limit;
        torque_violation += (state.joint_torque[j].abs() - tau_max).max(0.0);
    }
    let joint_vel: f64 = state.joint_vel.iter().map(|v| v * v).sum();

    let control_dt = cfg.control_dt();
    let weight = world.robot_mass() * world.settings.gravity.length().max(1e-9);
    let (mut impact, mut slip, mut air) = (0.0, 0.0, 0.0);
    for (k, &foot) in world.foot_ids().iter().enumerate() {
        let force = inputs.report.total_force_on(foot);
        let fs = &mut inputs.feet[k];
        let touching = force > 0.0;
        impact += ((force - fs.last_force).max(0.0) / weight).powi(2);
        if touching {
            slip += state.bodies[foot].vel.length();
            if !fs.in_contact {
                let swing = inputs.ref_foot_swing.get(k).copied().unwrap_or(false);
                let [lo, hi] = cfg.air_time_range;
                if swing && fs.air_time >= lo && fs.air_time <= hi {
                    air += fs.air_time;
                }
                fs.air_time = 0.0;
            }
        } else {
            fs.air_time += control_dt;
        }
        fs.in_contact = touching;
        fs.last_force = force;
    }

    Ok(RewardBreakdown {
        body_local_pose: RewardTerm::bonus((-e.body_local_mean / s.body_local).exp(), w.body_local_pose),
        root_global_pose: RewardTerm::bonus(
            (-e.root_pos / s.root_pos - e.root_ori / s.root_ori).exp(),
            w.root_global_pose,
        ),
        body_global_vel: RewardTerm::bonus((-e.body_vel_mean / s.body_vel).exp(), w.body_global_vel),
        joint_tracking: RewardTerm::bonus((-e.joint_mean / s.joint).exp(), w.joint_tracking),
        object_pose: RewardTerm::bonus(
            (-e.object_pos / s.object_pos - e.object_ori / s.object_ori - e.object_joint / s.object_ori).exp(),
            w.object_pose,
        ),
        interaction: RewardTerm::bonus(interaction, interaction_weight),
        action_rate: RewardTerm::penalty(action_rate, w.action_rate),
        joint_pos_limits: RewardTerm::penalty(limit_violation, w.joint_pos_limits),
        joint_vel: RewardTerm::penalty(joint_vel, w.joint_vel),
        torque_limits: RewardTerm::penalty(torque_violation, w.torque_limits),
        feet_impact: RewardTerm::penalty(impact, w.feet_impact),
        feet_slip: RewardTerm::penalty(slip, w.feet_slip),
        feet_air_time: RewardTerm::bonus(air, w.feet_air_time),
        total: 0.0,
    }
    .finish())
}
