use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache};
use super::LearnError;

pub const LOG_STD_MIN: f64 = -4.0;
pub const LOG_STD_MAX: f64 = 1.0;

/// Running mean and variance of observations (parallel Welford merge).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub enabled: bool,
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(dim: usize, enabled: bool) -> Self {
        Self {
            enabled,
            count: 0.0,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn update(&mut self, batch: &[Vec<f64>]) {
        if !self.enabled || batch.is_empty() {
            return;
        }
        let n = batch.len() as f64;
        let dim = self.mean.len();
        let mut mean = vec![0.0; dim];
        for x in batch {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for x in batch {
            for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let total = self.count + n;
        for i in 0..dim {
            let delta = mean[i] - self.mean[i];
            let m2 = self.var[i] * self.count + var[i] * n + delta * delta * self.count * n / total;
            self.mean[i] += delta * n / total;
            self.var[i] = m2 / total;
        }
        self.count = total;
    }

    pub fn apply(&self, obs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        if !self.enabled {
            out.extend_from_slice(obs);
            return;
        }
        out.extend(
            obs.iter()
                .zip(&self.mean)
                .zip(&self.var)
                .map(|((x, m), v)| ((x - m) / (v + 1e-8).sqrt()).clamp(-10.0, 10.0)),
        );
    }
}

/// Gaussian policy and value function. `theta` holds the actor network,
/// then the critic network, then one log-std per action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub critic: Mlp,
    pub theta: Vec<f64>,
    pub obs_norm: ObsNormalizer,
}

/// Output of [`policy_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub value: f64,
}

/// Scratch space and intermediate values for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    pub norm_obs: Vec<f64>,
    pub actor: MlpCache,
    pub critic: MlpCache,
}

impl PolicyParams {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], init_log_std: f64, normalize: bool, seed: u64) -> Self {
        let actor = Mlp::new(obs_dim, hidden, act_dim);
        let critic = Mlp::new(obs_dim, hidden, 1);
        let mut theta = vec![0.0; actor.param_count() + critic.param_count() + act_dim];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, rest) = theta.split_at_mut(actor.param_count());
        let (c, log_std) = rest.split_at_mut(critic.param_count());
        actor.init(a, 0.01, &mut rng);
        critic.init(c, 1.0, &mut rng);
        log_std.fill(init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Self {
            actor,
            critic,
            theta,
            obs_norm: ObsNormalizer::new(obs_dim, normalize),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn actor_range(&self) -> std::ops::Range<usize> {
        0..self.actor.param_count()
    }

    pub fn critic_range(&self) -> std::ops::Range<usize> {
        let a = self.actor.param_count();
        a..a + self.critic.param_count()
    }

    pub fn log_std_range(&self) -> std::ops::Range<usize> {
        let s = self.actor.param_count() + self.critic.param_count();
        s..s + self.act_dim()
    }

    pub fn log_std(&self) -> Vec<f64> {
        self.theta[self.log_std_range()]
            .iter()
            .map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Forward pass keeping intermediates in `cache`.
    pub fn forward_cached(&self, obs: &[f64], cache: &mut ForwardCache) -> Result<PolicyOutput, LearnError> {
        if obs.len() != self.obs_dim() {
            return Err(LearnError::Dimension {
                what: "observation",
                expected: self.obs_dim(),
                actual: obs.len(),
            });
        }
        self.obs_norm.apply(obs, &mut cache.norm_obs);
        self.actor.forward(&self.theta[self.actor_range()], &cache.norm_obs, &mut cache.actor);
        self.critic.forward(&self.theta[self.critic_range()], &cache.norm_obs, &mut cache.critic);
        Ok(PolicyOutput {
            mean: cache.actor.output().iter().map(|z| z.tanh()).collect(),
            std: self.log_std().iter().map(|l| l.exp()).collect(),
            value: cache.critic.output()[0],
        })
    }
}

/// Action mean (squashed to `[-1, 1]`), standard deviation and value.
pub fn policy_forward(params: &PolicyParams, obs: &[f64]) -> Result<PolicyOutput, LearnError> {
    params.forward_cached(obs, &mut ForwardCache::default())
}

/// Diagonal Gaussian log-density.
pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, l), a)| {
            let z = (a - m) / l.exp();
            -0.5 * z * z - l - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|l| l + 0.5 * (2.0 * PI * std::f64::consts::E).ln()).sum()
}
