use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::policy::{log_prob, ForwardCache, PolicyParams};
use super::ppo::{ppo_update, Adam, RolloutBatch, UpdateStats};
use super::{LearnError, TrainConfig};
use crate::env::{Env, EnvError, TerminationReason};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Builds the `index`-th training environment.
pub trait EnvFactory: Sync {
    fn make(&self, index: usize) -> Result<Box<dyn Env>, EnvError>;
}

impl<F> EnvFactory for F
where
    F: Fn(usize) -> Result<Box<dyn Env>, EnvError> + Sync,
{
    fn make(&self, index: usize) -> Result<Box<dyn Env>, EnvError> {
        self(index)
    }
}

/// SplitMix64 finaliser over three words; used for per-env, per-episode seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hex SHA-256 of the JSON encoding of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config serialises");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// One environment instance plus its sampling state.
pub struct EnvSlot {
    pub env: Box<dyn Env>,
    pub index: usize,
    seed: u64,
    rng: ChaCha8Rng,
    obs: Vec<f64>,
    episodes: u64,
    ep_return: f64,
    ep_len: u64,
}

impl EnvSlot {
    pub fn new(mut env: Box<dyn Env>, index: usize, seed: u64) -> Self {
        let obs = env.reset(mix_seed(seed, index as u64, 0));
        Self {
            env,
            index,
            seed,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0x5EED, index as u64, u64::MAX)),
            obs,
            episodes: 0,
            ep_return: 0.0,
            ep_len: 0,
        }
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }
}

struct StepOut {
    obs: Vec<f64>,
    action: Vec<f64>,
    log_prob: f64,
    value: f64,
    reward: f64,
    reason: TerminationReason,
    phase: f64,
    terms: Vec<f64>,
    finished: Option<(f64, u64, TerminationReason)>,
}

fn step_slot(params: &PolicyParams, slot: &mut EnvSlot) -> Result<StepOut, LearnError> {
    let mut cache = ForwardCache::default();
    let out = params.forward_cached(&slot.obs, &mut cache)?;
    let log_std = params.log_std();
    let action: Vec<f64> = out
        .mean
        .iter()
        .zip(&out.std)
        .map(|(m, s)| {
            let z: f64 = StandardNormal.sample(&mut slot.rng);
            m + s * z
        })
        .collect();
    let lp = log_prob(&out.mean, &log_std, &action);
    let tr = slot.env.step(&action)?;
    slot.ep_return += tr.reward;
    slot.ep_len += 1;
    let reason = tr.termination.reason;
    let obs = std::mem::replace(&mut slot.obs, tr.obs);
    let mut finished = None;
    if tr.termination.terminated {
        finished = Some((slot.ep_return, slot.ep_len, reason));
        slot.episodes += 1;
        slot.ep_return = 0.0;
        slot.ep_len = 0;
        slot.obs = slot.env.reset(mix_seed(slot.seed, slot.index as u64, slot.episodes));
    }
    Ok(StepOut {
        obs,
        action,
        log_prob: lp,
        value: out.value,
        reward: tr.reward,
        reason,
        phase: tr.phase,
        terms: tr.terms,
        finished,
    })
}

/// Episode and reward statistics gathered during one rollout.
#[derive(Debug, Clone, Default)]
pub struct RolloutInfo {
    pub episodes: Vec<(f64, u64, TerminationReason)>,
    pub term_sums: Vec<f64>,
    pub reward_sum: f64,
    pub steps: usize,
}

/// Steps every slot `n_steps` times with actions sampled from `params`.
pub fn collect_rollout(params: &PolicyParams, slots: &mut [EnvSlot], n_steps: usize) -> Result<(RolloutBatch, RolloutInfo), LearnError> {
    let n = slots.len();
    let mut batch = RolloutBatch {
        n_envs: n,
        n_steps,
        ..Default::default()
    };
    let mut info = RolloutInfo::default();
    for _ in 0..n_steps {
        let outs: Vec<Result<StepOut, LearnError>> = slots.par_iter_mut().map(|s| step_slot(params, s)).collect();
        for out in outs {
            let out = out?;
            if info.term_sums.len() < out.terms.len() {
                info.term_sums.resize(out.terms.len(), 0.0);
            }
            for (s, t) in info.term_sums.iter_mut().zip(&out.terms) {
                *s += t;
            }
            info.reward_sum += out.reward;
            info.steps += 1;
            if let Some(ep) = out.finished {
                info.episodes.push(ep);
            }
            batch.obs.push(out.obs);
            batch.actions.push(out.action);
            batch.log_probs.push(out.log_prob);
            batch.rewards.push(out.reward);
            batch.values.push(out.value);
            batch.dones.push(out.reason != TerminationReason::None);
            batch.reasons.push(out.reason);
            batch.phases.push(out.phase);
        }
    }
    let mut cache = ForwardCache::default();
    for s in slots.iter() {
        batch.bootstrap.push(params.forward_cached(&s.obs, &mut cache)?.value);
    }
    Ok((batch, info))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    pub env_steps: u64,
    pub episodes: usize,
    /// Mean undiscounted return of episodes finished in this rollout.
    pub mean_return: Option<f64>,
    pub mean_length: Option<f64>,
    pub success_rate: Option<f64>,
    pub step_reward: f64,
    pub term_means: BTreeMap<String, f64>,
    pub terminations: BTreeMap<String, u64>,
    pub mean_std: f64,
    #[serde(flatten)]
    pub stats: UpdateStats,
}

/// Serialised policy with the hash of the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub checkpoint_version: u32,
    pub config_hash: String,
    pub task: String,
    pub updates: usize,
    pub params: PolicyParams,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let json = serde_json::to_string(self).expect("checkpoint serialises");
        std::fs::write(path, json).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
        if ck.checkpoint_version != CHECKPOINT_VERSION {
            return Err(io_err(path, format!("unsupported checkpoint_version {}", ck.checkpoint_version)));
        }
        let p = &ck.params;
        let expected = p.actor.param_count() + p.critic.param_count() + p.act_dim();
        if p.theta.len() != expected || p.critic.input_dim() != p.obs_dim() || p.obs_norm.mean.len() != p.obs_dim() {
            return Err(io_err(path, "parameter vector does not match the network shapes"));
        }
        Ok(ck)
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LearnError {
    LearnError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Trains from scratch; see [`train_with`].
pub fn train(factory: &dyn EnvFactory, cfg: &TrainConfig) -> Result<(PolicyParams, Vec<UpdateLog>), LearnError> {
    train_with(factory, cfg, None, &mut |_, _, _| Ok(()))
}

/// Collect/update loop. `on_update` sees every log record and the new
/// parameters; its flag is set on checkpoint updates (every
/// `checkpoint_every` and the last one).
pub fn train_with(
    factory: &dyn EnvFactory,
    cfg: &TrainConfig,
    init: Option<PolicyParams>,
    on_update: &mut dyn FnMut(&UpdateLog, &PolicyParams, bool) -> Result<(), LearnError>,
) -> Result<(PolicyParams, Vec<UpdateLog>), LearnError> {
    cfg.validate()?;
    let first = factory.make(0)?;
    let (obs_dim, act_dim) = (first.obs_dim(), first.act_dim());
    let mut params = match init {
        Some(p) => {
            if p.obs_dim() != obs_dim {
                return Err(LearnError::Dimension {
                    what: "observation",
                    expected: obs_dim,
                    actual: p.obs_dim(),
                });
            }
            if p.act_dim() != act_dim {
                return Err(LearnError::Dimension {
                    what: "action",
                    expected: act_dim,
                    actual: p.act_dim(),
                });
            }
            p
        }
        None => PolicyParams::new(obs_dim, act_dim, &cfg.hidden, cfg.init_log_std, cfg.normalize_obs, cfg.seed),
    };
    if cfg.total_updates == 0 {
        return Ok((params, Vec::new()));
    }
    let term_names = first.term_names();
    let mut envs = vec![first];
    for i in 1..cfg.num_envs {
        envs.push(factory.make(i)?);
    }
    let mut slots: Vec<EnvSlot> = envs.into_iter().enumerate().map(|(i, e)| EnvSlot::new(e, i, cfg.seed)).collect();
    let mut opt = Adam::new(params.theta.len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0xA11CE, 0));
    let mut logs = Vec::with_capacity(cfg.total_updates);
    let mut env_steps = 0u64;
    if params.obs_norm.enabled && params.obs_norm.count == 0.0 {
        let first_obs: Vec<Vec<f64>> = slots.iter().map(|s| s.obs.clone()).collect();
        params.obs_norm.update(&first_obs);
    }
    for update in 0..cfg.total_updates {
        let (batch, info) = collect_rollout(&params, &mut slots, cfg.rollout_len)?;
        env_steps += info.steps as u64;
        let (mut next, stats) = ppo_update(&params, &batch, cfg, &mut opt, &mut rng)?;
        next.obs_norm.update(&batch.obs);
        params = next;

        let n_ep = info.episodes.len();
        let mean = |f: &dyn Fn(&(f64, u64, TerminationReason)) -> f64| {
            (n_ep > 0).then(|| info.episodes.iter().map(f).sum::<f64>() / n_ep as f64)
        };
        let mut terminations = BTreeMap::new();
        for (_, _, r) in &info.episodes {
            *terminations.entry(r.as_str().to_string()).or_insert(0) += 1;
        }
        let steps = info.steps.max(1) as f64;
        let term_means = term_names
            .iter()
            .zip(&info.term_sums)
            .map(|(name, s)| (name.clone(), s / steps))
            .collect();
        let log_std = params.log_std();
        let log = UpdateLog {
            update: update + 1,
            env_steps,
            episodes: n_ep,
            mean_return: mean(&|e| e.0),
            mean_length: mean(&|e| e.1 as f64),
            success_rate: mean(&|e| if e.2 == TerminationReason::MotionEnd { 1.0 } else { 0.0 }),
            step_reward: info.reward_sum / steps,
            term_means,
            terminations,
            mean_std: log_std.iter().map(|l| l.exp()).sum::<f64>() / log_std.len().max(1) as f64,
            stats,
        };
        let is_last = update + 1 == cfg.total_updates;
        let is_checkpoint = is_last || (cfg.checkpoint_every > 0 && (update + 1) % cfg.checkpoint_every == 0);
        on_update(&log, &params, is_checkpoint)?;
        logs.push(log);
    }
    Ok((params, logs))
}
