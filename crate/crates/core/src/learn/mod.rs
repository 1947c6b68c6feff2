//! PPO with a Gaussian MLP policy, GAE and minibatch Adam updates.

mod gae;
mod mlp;
mod policy;
mod ppo;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::EnvError;

pub use gae::{gae, normalize_advantages};
pub use mlp::{Mlp, MlpCache};
pub use policy::{entropy, log_prob, policy_forward, ForwardCache, ObsNormalizer, PolicyOutput, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};
pub use ppo::{ppo_loss, ppo_update, Adam, LossParts, LossSample, RolloutBatch, UpdateStats};
pub use train::{
    collect_rollout, config_hash, mix_seed, train, train_with, Checkpoint, EnvFactory, EnvSlot, RolloutInfo, UpdateLog, CHECKPOINT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error("{what} dimension mismatch: expected {expected}, got {actual}")]
    Dimension { what: &'static str, expected: usize, actual: usize },
    #[error("non-finite {0} during update")]
    NonFinite(&'static str),
    #[error("invalid rollout batch: {0}")]
    Batch(String),
    #[error("invalid train config `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatches: usize,
    pub rollout_len: usize,
    pub num_envs: usize,
    pub total_updates: usize,
    pub ent_coef: f64,
    pub vf_coef: f64,
    /// Global gradient norm cap; 0 disables clipping.
    pub max_grad_norm: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    pub normalize_obs: bool,
    /// Updates between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            lr: 3e-4,
            epochs: 5,
            minibatches: 4,
            rollout_len: 32,
            num_envs: 256,
            total_updates: 500,
            ent_coef: 0.005,
            vf_coef: 0.5,
            max_grad_norm: 1.0,
            seed: 0,
            hidden: vec![256, 256],
            init_log_std: -1.0,
            normalize_obs: true,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let err = |field: &str, reason: &str| {
            Err(LearnError::Config {
                field: field.into(),
                reason: reason.into(),
            })
        };
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma", "must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return err("lambda", "must lie in [0, 1]");
        }
        if !(self.clip > 0.0 && self.clip.is_finite()) {
            return err("clip", "must be finite and > 0");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return err("lr", "must be finite and > 0");
        }
        for (field, v) in [
            ("epochs", self.epochs),
            ("minibatches", self.minibatches),
            ("rollout_len", self.rollout_len),
            ("num_envs", self.num_envs),
        ] {
            if v == 0 {
                return err(field, "must be >= 1");
            }
        }
        for (field, v) in [("ent_coef", self.ent_coef), ("vf_coef", self.vf_coef), ("max_grad_norm", self.max_grad_norm)] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(field, "must be finite and >= 0");
            }
        }
        if self.hidden.contains(&0) {
            return err("hidden", "layer sizes must be >= 1");
        }
        if !self.init_log_std.is_finite() {
            return err("init_log_std", "must be finite");
        }
        Ok(())
    }
}
