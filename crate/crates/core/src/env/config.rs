use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingSigmas {
    pub body_local: f64,
    pub root_pos: f64,
    pub root_ori: f64,
    pub body_vel: f64,
    pub joint: f64,
    pub object_pos: f64,
    pub object_ori: f64,
}

impl Default for TrackingSigmas {
    fn default() -> Self {
        Self {
            body_local: 0.3,
            root_pos: 0.3,
            root_ori: 0.6,
            body_vel: 1.0,
            joint: 0.5,
            object_pos: 0.3,
            object_ori: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub body_local_pose: f64,
    pub root_global_pose: f64,
    pub body_global_vel: f64,
    pub joint_tracking: f64,
    pub object_pose: f64,
    pub interaction: f64,
    pub action_rate: f64,
    pub joint_pos_limits: f64,
    pub joint_vel: f64,
    pub torque_limits: f64,
    pub feet_impact: f64,
    pub feet_slip: f64,
    pub feet_air_time: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            body_local_pose: 2.0,
            root_global_pose: 1.0,
            body_global_vel: 1.0,
            joint_tracking: 1.0,
            object_pose: 2.0,
            interaction: 5.0,
            action_rate: 0.1,
            joint_pos_limits: 10.0,
            joint_vel: 5.0e-4,
            torque_limits: 0.01,
            feet_impact: 1.0,
            feet_slip: 0.5,
            feet_air_time: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BodyErrorReduce {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminationConfig {
    pub root_pos: f64,
    pub root_ori: f64,
    pub body_pos: f64,
    pub body_ori: f64,
    pub object_pos: f64,
    pub object_ori: f64,
    pub min_steps: u64,
    pub contact_pos: f64,
    pub contact_force: f64,
    pub contact_min_steps: u64,
    /// How per-body errors are reduced for the body-pose check.
    pub body_error: BodyErrorReduce,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            root_pos: 0.5,
            root_ori: 1.2,
            body_pos: 0.5,
            body_ori: 1.2,
            object_pos: 0.5,
            object_ori: 1.2,
            min_steps: 25,
            contact_pos: 0.2,
            contact_force: 1.0,
            contact_min_steps: 25,
            body_error: BodyErrorReduce::Max,
        }
    }
}

/// Reference state initialisation: start phase range and uniform noise
/// half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsiConfig {
    pub phase_max: f64,
    pub root_pos: f64,
    pub angle: f64,
    pub vel: f64,
    pub object: f64,
}

impl Default for RsiConfig {
    fn default() -> Self {
        Self {
            phase_max: 0.9,
            root_pos: 0.05,
            angle: 0.05,
            vel: 0.1,
            object: 0.05,
        }
    }
}

impl RsiConfig {
    pub fn zero_noise(&self) -> Self {
        Self {
            root_pos: 0.0,
            angle: 0.0,
            vel: 0.0,
            object: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrConfig {
    pub enabled: bool,
    pub mass: [f64; 2],
    pub inertia: [f64; 2],
    pub friction: [f64; 2],
}

impl Default for DrConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            mass: [0.8, 1.2],
            inertia: [0.8, 1.2],
            friction: [0.7, 1.3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub sigma_pos: f64,
    pub sigma_frc: f64,
    pub f_thres: f64,
    pub sigmas: TrackingSigmas,
    pub weights: RewardWeights,
    pub termination: TerminationConfig,
    pub rsi: RsiConfig,
    pub dr: DrConfig,
    pub use_interaction_reward: bool,
    pub use_contact_termination: bool,
    pub use_residual_action: bool,
    pub use_body_track_termination: bool,
    /// Radians of joint target per unit action.
    pub action_scale: f64,
    pub physics_dt: f64,
    pub decimation: usize,
    /// Maximum control steps per episode; 0 runs until the motion ends.
    pub horizon: u64,
    /// Fraction of each joint range inside which no limit penalty applies.
    pub soft_joint_limit: f64,
    pub soft_torque_limit: f64,
    /// Swing durations (s) rewarded by the air-time bonus.
    pub air_time_range: [f64; 2],
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            sigma_pos: 0.1,
            sigma_frc: 10.0,
            f_thres: 20.0,
            sigmas: TrackingSigmas::default(),
            weights: RewardWeights::default(),
            termination: TerminationConfig::default(),
            rsi: RsiConfig::default(),
            dr: DrConfig::default(),
            use_interaction_reward: true,
            use_contact_termination: true,
            use_residual_action: true,
            use_body_track_termination: true,
            action_scale: 0.25,
            physics_dt: 1.0 / 120.0,
            decimation: 4,
            horizon: 0,
            soft_joint_limit: 0.9,
            soft_torque_limit: 0.9,
            air_time_range: [0.1, 0.5],
        }
    }
}

fn config_err(field: &str, reason: &str) -> EnvError {
    EnvError::Config {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

impl EnvConfig {
    pub fn control_dt(&self) -> f64 {
        self.physics_dt * self.decimation as f64
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("sigma_pos", self.sigma_pos),
            ("sigma_frc", self.sigma_frc),
            ("f_thres", self.f_thres),
            ("sigmas.body_local", self.sigmas.body_local),
            ("sigmas.root_pos", self.sigmas.root_pos),
            ("sigmas.root_ori", self.sigmas.root_ori),
            ("sigmas.body_vel", self.sigmas.body_vel),
            ("sigmas.joint", self.sigmas.joint),
            ("sigmas.object_pos", self.sigmas.object_pos),
            ("sigmas.object_ori", self.sigmas.object_ori),
            ("action_scale", self.action_scale),
            ("physics_dt", self.physics_dt),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(field, "must be finite and > 0"));
            }
        }
        if self.decimation == 0 {
            return Err(config_err("decimation", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.rsi.phase_max) {
            return Err(config_err("rsi.phase_max", "must lie in [0, 1]"));
        }
        for (field, v) in [
            ("rsi.root_pos", self.rsi.root_pos),
            ("rsi.angle", self.rsi.angle),
            ("rsi.vel", self.rsi.vel),
            ("rsi.object", self.rsi.object),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(field, "must be finite and >= 0"));
            }
        }
        for (field, r) in [("dr.mass", self.dr.mass), ("dr.inertia", self.dr.inertia), ("dr.friction", self.dr.friction)] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1].is_finite()) {
                return Err(config_err(field, "expected 0 < lo <= hi"));
            }
        }
        if !(self.soft_joint_limit > 0.0 && self.soft_joint_limit <= 1.0) {
            return Err(config_err("soft_joint_limit", "must lie in (0, 1]"));
        }
        if !(self.soft_torque_limit > 0.0 && self.soft_torque_limit <= 1.0) {
            return Err(config_err("soft_torque_limit", "must lie in (0, 1]"));
        }
        Ok(())
    }
}
