use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gae::{gae, normalize_advantages};
use super::policy::{entropy, log_prob, ForwardCache, PolicyParams, LOG_STD_MAX, LOG_STD_MIN};
use super::{LearnError, TrainConfig};
use crate::env::TerminationReason;

/// Trajectory storage for `n_steps × n_envs` transitions, indexed
/// `t * n_envs + e`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub reasons: Vec<TerminationReason>,
    pub phases: Vec<f64>,
    /// Value of the state after the last step, per env.
    pub bootstrap: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        let n = self.n_envs * self.n_steps;
        let lens = [
            ("obs", self.obs.len()),
            ("actions", self.actions.len()),
            ("log_probs", self.log_probs.len()),
            ("rewards", self.rewards.len()),
            ("values", self.values.len()),
            ("dones", self.dones.len()),
            ("reasons", self.reasons.len()),
            ("phases", self.phases.len()),
        ];
        for (what, len) in lens {
            if len != n {
                return Err(LearnError::Batch(format!("{what} has {len} entries, expected {n}")));
            }
        }
        if self.bootstrap.len() != self.n_envs {
            return Err(LearnError::Batch("bootstrap must have one value per env".into()));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(LearnError::NonFinite("reward"));
        }
        for (i, (&d, &r)) in self.dones.iter().zip(&self.reasons).enumerate() {
            if d != (r != TerminationReason::None) {
                return Err(LearnError::Batch(format!("done flag and termination reason disagree at {i}")));
            }
        }
        Ok(())
    }

    /// Advantages and returns, computed per env column.
    pub fn advantages(&self, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let (n, t_len) = (self.n_envs, self.n_steps);
        let mut adv = vec![0.0; n * t_len];
        let mut ret = vec![0.0; n * t_len];
        for e in 0..n {
            let col = |v: &[f64]| (0..t_len).map(|t| v[t * n + e]).collect::<Vec<_>>();
            let dones: Vec<bool> = (0..t_len).map(|t| self.dones[t * n + e]).collect();
            let (a, r) = gae(&col(&self.rewards), &col(&self.values), &dones, self.bootstrap[e], gamma, lambda);
            for t in 0..t_len {
                adv[t * n + e] = a[t];
                ret[t * n + e] = r[t];
            }
        }
        (adv, ret)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn apply(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let b1 = 1.0 - self.beta1.powi(self.step as i32);
        let b2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            theta[i] -= self.lr * (self.m[i] / b1) / ((self.v[i] / b2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_frac: f64,
    pub grad_norm: f64,
}

/// One sample of the PPO objective.
#[derive(Debug, Clone, Copy)]
pub struct LossSample<'a> {
    pub obs: &'a [f64],
    pub action: &'a [f64],
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

/// Mean clipped-surrogate loss over `samples` plus value loss and entropy
/// bonus. Adds the gradient to `grad` when given.
pub fn ppo_loss(
    params: &PolicyParams,
    samples: &[LossSample<'_>],
    cfg: &TrainConfig,
    mut grad: Option<&mut [f64]>,
) -> Result<LossParts, LearnError> {
    let m = samples.len().max(1) as f64;
    let act_dim = params.act_dim();
    let log_std = params.log_std();
    let raw_log_std = &params.theta[params.log_std_range()];
    let std_live: Vec<bool> = raw_log_std
        .iter()
        .map(|l| (LOG_STD_MIN..=LOG_STD_MAX).contains(l))
        .collect();
    let (actor_r, critic_r, std_r) = (params.actor_range(), params.critic_range(), params.log_std_range());
    let mut cache = ForwardCache::default();
    let mut parts = LossParts::default();
    let mut d_z = vec![0.0; act_dim];
    for s in samples {
        let out = params.forward_cached(s.obs, &mut cache)?;
        let lp = log_prob(&out.mean, &log_std, s.action);
        let ratio = (lp - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surr1 = ratio * s.advantage;
        let surr2 = clipped * s.advantage;
        parts.policy -= surr1.min(surr2) / m;
        let verr = out.value - s.ret;
        parts.value += 0.5 * verr * verr / m;
        if (ratio - 1.0).abs() > cfg.clip {
            parts.clip_frac += 1.0 / m;
        }
        parts.approx_kl += ((ratio - 1.0) - (lp - s.old_log_prob)) / m;

        if let Some(g) = grad.as_deref_mut() {
            let d_lp = if surr1 <= surr2 { -s.advantage * ratio / m } else { 0.0 };
            for j in 0..act_dim {
                let sigma = log_std[j].exp();
                let diff = s.action[j] - out.mean[j];
                let dmu = d_lp * diff / (sigma * sigma);
                d_z[j] = dmu * (1.0 - out.mean[j] * out.mean[j]);
                if std_live[j] {
                    let z = diff / sigma;
                    g[std_r.start + j] += d_lp * (z * z - 1.0);
                }
            }
            if d_lp != 0.0 {
                params.actor.backward(&params.theta[actor_r.clone()], &cache.actor, &d_z, &mut g[actor_r.clone()]);
            }
            let d_v = cfg.vf_coef * verr / m;
            params.critic.backward(&params.theta[critic_r.clone()], &cache.critic, &[d_v], &mut g[critic_r.clone()]);
        }
    }
    parts.entropy = entropy(&log_std);
    if let Some(g) = grad.as_mut() {
        for j in 0..act_dim {
            if std_live[j] {
                g[std_r.start + j] -= cfg.ent_coef;
            }
        }
    }
    parts.total = parts.policy + cfg.vf_coef * parts.value - cfg.ent_coef * parts.entropy;
    if !parts.total.is_finite() {
        return Err(LearnError::NonFinite("loss"));
    }
    Ok(parts)
}

/// Clipped-surrogate PPO update over `batch` with minibatch Adam steps.
pub fn ppo_update(
    params: &PolicyParams,
    batch: &RolloutBatch,
    cfg: &TrainConfig,
    opt: &mut Adam,
    rng: &mut impl Rng,
) -> Result<(PolicyParams, UpdateStats), LearnError> {
    batch.validate()?;
    let mut next = params.clone();
    let mut stats = UpdateStats::default();
    if batch.is_empty() {
        return Ok((next, stats));
    }
    let (mut adv, ret) = batch.advantages(cfg.gamma, cfg.lambda);
    normalize_advantages(&mut adv);
    let n = batch.len();
    let mb_count = cfg.minibatches.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; next.theta.len()];
    let mut rounds = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in 0..mb_count {
            let lo = mb * n / mb_count;
            let hi = (mb + 1) * n / mb_count;
            let samples: Vec<LossSample<'_>> = order[lo..hi]
                .iter()
                .map(|&i| LossSample {
                    obs: &batch.obs[i],
                    action: &batch.actions[i],
                    old_log_prob: batch.log_probs[i],
                    advantage: adv[i],
                    ret: ret[i],
                })
                .collect();
            grad.fill(0.0);
            let parts = ppo_loss(&next, &samples, cfg, Some(&mut grad))?;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(LearnError::NonFinite("gradient"));
            }
            if cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm {
                let k = cfg.max_grad_norm / norm;
                grad.iter_mut().for_each(|g| *g *= k);
            }
            opt.apply(&mut next.theta, &grad);
            stats.policy_loss += parts.policy;
            stats.value_loss += parts.value;
            stats.entropy += parts.entropy;
            stats.approx_kl += parts.approx_kl;
            stats.clip_frac += parts.clip_frac;
            stats.grad_norm += norm;
            rounds += 1.0;
        }
    }
    for v in [
        &mut stats.policy_loss,
        &mut stats.value_loss,
        &mut stats.entropy,
        &mut stats.approx_kl,
        &mut stats.clip_frac,
        &mut stats.grad_norm,
    ] {
        *v /= rounds;
    }
    if !next.is_finite() {
        return Err(LearnError::NonFinite("parameters"));
    }
    Ok((next, stats))
}
