//! Reinforcement-learning environments: the robot–object co-tracking task
//! and a one-dimensional point-mass toy.

mod config;
mod cotrack;
mod observation;
mod reward;
mod termination;
mod toy;
mod track;

pub use config::{BodyErrorReduce, DrConfig, EnvConfig, RewardWeights, RsiConfig, TerminationConfig, TrackingSigmas};
pub use cotrack::{apply_action, CoTrackEnv, ResetMode};
pub use observation::{build_observation, Observation};
pub use reward::{
    compute_reward, contact_reward_single, eef_forces, eef_targets, interaction_reward, pose_errors, FootState,
    PoseErrors, RewardBreakdown, RewardInputs, RewardTerm,
};
pub use termination::{check_termination, contact_status, TerminationInputs, TerminationReason, TerminationResult};
pub use toy::{PointMassConfig, PointMassEnv};
pub use track::{ReferenceTrack, TrackSample};

use crate::refmotion::MotionError;
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("config error in {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("action has {actual} entries, expected {expected}")]
    ActionDim { expected: usize, actual: usize },
    #[error("action contains a non-finite value")]
    NonFiniteAction,
    #[error("step called on a terminated episode; call reset first")]
    Terminated,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Weighted reward terms, aligned with [`Env::term_names`].
    pub terms: Vec<f64>,
    pub termination: TerminationResult,
    pub phase: f64,
    /// Joint targets commanded during the step.
    pub joint_targets: Vec<f64>,
    /// Tracking errors after the step, for tasks that track a reference.
    pub errors: Option<PoseErrors>,
    /// The physics step failed numerically; the episode was ended.
    pub sim_fault: bool,
}

/// Minimal episodic interface the trainer and evaluator drive.
pub trait Env: Send {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Training reset (random start phase, perturbations, randomisation).
    fn reset(&mut self, seed: u64) -> Vec<f64>;
    /// Evaluation reset: start of the motion, no perturbations.
    fn reset_eval(&mut self, seed: u64) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<Transition, EnvError>;
    fn term_names(&self) -> Vec<String>;
}
