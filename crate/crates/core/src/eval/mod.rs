//! Evaluation rollouts, tracking metrics, ablation grids and CSV export.

mod ablation;
mod export;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{pose_errors, Env, EnvConfig, EnvError, PointMassConfig, PointMassEnv, TerminationReason, TrackSample};
use crate::learn::{mix_seed, policy_forward, LearnError, PolicyParams};
use crate::sim::{SimState, WorldModel};

pub use ablation::{median, parse_ablation_spec, run_ablation, AblationRow, AblationSpec, AblationTable, Variant, VariantSummary};
pub use export::{export_metrics, export_table, read_episodes_csv, read_table_csv, TableCsvRow, TABLE_HEADER};

/// Episodes are cut here even if the env never terminates.
pub const MAX_EVAL_STEPS: u64 = 100_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{origin}: {reason}")]
    Spec { origin: String, reason: String },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Evaluation-time changes to the training env config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOverrides {
    pub disable_contact_termination: bool,
    pub disable_body_termination: bool,
    /// Keep domain randomisation on during eval.
    pub domain_randomization: bool,
    /// Apply the RSI start noise during eval (start phase stays 0).
    pub rsi_perturbation: bool,
}

impl EvalOverrides {
    pub fn apply(&self, cfg: &EnvConfig) -> EnvConfig {
        let mut out = cfg.clone();
        if self.disable_contact_termination {
            out.use_contact_termination = false;
        }
        if self.disable_body_termination {
            out.use_body_track_termination = false;
        }
        out.dr.enabled = cfg.dr.enabled && self.domain_randomization;
        out
    }
}

/// Builds evaluation environments with overrides applied.
pub trait EvalEnvFactory: Sync {
    fn make_eval(&self, index: usize, overrides: &EvalOverrides) -> Result<Box<dyn Env>, EnvError>;
}

impl<F> EvalEnvFactory for F
where
    F: Fn(usize, &EvalOverrides) -> Result<Box<dyn Env>, EnvError> + Sync,
{
    fn make_eval(&self, index: usize, overrides: &EvalOverrides) -> Result<Box<dyn Env>, EnvError> {
        self(index, overrides)
    }
}

/// Something that maps observations to actions during evaluation.
pub trait EvalPolicy: Sync {
    fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearnError>;
}

/// Deterministic policy: the Gaussian mean.
impl EvalPolicy for PolicyParams {
    fn act(&self, obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearnError> {
        Ok(policy_forward(self, obs)?.mean)
    }
}

/// Always outputs zeros; with residual actions this replays the reference.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPolicy(pub usize);

impl EvalPolicy for ZeroPolicy {
    fn act(&self, _obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearnError> {
        Ok(vec![0.0; self.0])
    }
}

/// Uniform actions in `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct RandomPolicy(pub usize);

impl EvalPolicy for RandomPolicy {
    fn act(&self, _obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearnError> {
        Ok((0..self.0).map(|_| rng.gen_range(-1.0..=1.0)).collect())
    }
}

/// PD tracking controller for the point-mass toy.
#[derive(Debug, Clone, Copy)]
pub struct PointMassPd(pub f64);

impl EvalPolicy for PointMassPd {
    fn act(&self, obs: &[f64], _rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LearnError> {
        Ok(vec![PointMassEnv::pd_action(obs, self.0)])
    }
}

/// Return of the PD controller on the toy's evaluation episode.
pub fn pd_oracle_return(cfg: &PointMassConfig) -> f64 {
    let mut env = PointMassEnv::new(cfg.clone());
    let mut obs = env.reset_eval(0);
    let mut total = 0.0;
    loop {
        let tr = env.step(&[PointMassEnv::pd_action(&obs, cfg.max_accel)]).expect("valid action");
        total += tr.reward;
        obs = tr.obs;
        if tr.termination.terminated {
            return total;
        }
    }
}

/// Per-step tracking errors against one reference sample.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingErrors {
    /// Mean absolute joint error, rad.
    pub joint: f64,
    /// Mean body position error in root-aligned frames, m.
    pub body: f64,
    pub object_pos: f64,
    pub object_ori: f64,
}

pub fn tracking_errors(world: &WorldModel, state: &SimState, sample: &TrackSample) -> TrackingErrors {
    let e = pose_errors(world, state, sample);
    TrackingErrors {
        joint: e.joint_mean,
        body: e.body_local_mean,
        object_pos: e.object_pos,
        object_ori: e.object_ori,
    }
}

/// One evaluation episode. Errors are averaged over its steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub env: usize,
    pub seed: u64,
    pub success: bool,
    pub reason: TerminationReason,
    pub length: u64,
    pub ret: f64,
    pub joint_err: f64,
    pub body_err: f64,
    pub object_err_pos: f64,
    pub object_err_ori: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n_envs: usize,
    pub success_rate: f64,
    pub joint_err_mean: f64,
    pub joint_err_std: f64,
    pub body_err_mean: f64,
    pub body_err_std: f64,
    pub object_err_pos: f64,
    pub object_err_ori: f64,
    pub episode_length: f64,
    pub mean_return: f64,
    pub termination_histogram: BTreeMap<String, u64>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRecord>,
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

impl EvalMetrics {
    /// Aggregates episode records; stds are population stds over episodes.
    pub fn from_episodes(episodes: Vec<EpisodeRecord>) -> Self {
        let n = episodes.len();
        let nf = n.max(1) as f64;
        let (joint_err_mean, joint_err_std) = mean_std(episodes.iter().map(|e| e.joint_err));
        let (body_err_mean, body_err_std) = mean_std(episodes.iter().map(|e| e.body_err));
        let mut termination_histogram = BTreeMap::new();
        for e in &episodes {
            *termination_histogram.entry(e.reason.as_str().to_string()).or_insert(0) += 1;
        }
        Self {
            n_envs: n,
            success_rate: episodes.iter().filter(|e| e.success).count() as f64 / nf,
            joint_err_mean,
            joint_err_std,
            body_err_mean,
            body_err_std,
            object_err_pos: episodes.iter().map(|e| e.object_err_pos).sum::<f64>() / nf,
            object_err_ori: episodes.iter().map(|e| e.object_err_ori).sum::<f64>() / nf,
            episode_length: episodes.iter().map(|e| e.length as f64).sum::<f64>() / nf,
            mean_return: episodes.iter().map(|e| e.ret).sum::<f64>() / nf,
            termination_histogram,
            episodes,
        }
    }
}

fn run_episode(policy: &dyn EvalPolicy, env: &mut dyn Env, index: usize, seed: u64) -> Result<EpisodeRecord, EvalError> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, index as u64, 1));
    let env_seed = mix_seed(seed, index as u64, 0);
    let mut obs = env.reset_eval(env_seed);
    let mut rec = EpisodeRecord {
        env: index,
        seed: env_seed,
        success: false,
        reason: TerminationReason::None,
        length: 0,
        ret: 0.0,
        joint_err: 0.0,
        body_err: 0.0,
        object_err_pos: 0.0,
        object_err_ori: 0.0,
    };
    while rec.length < MAX_EVAL_STEPS {
        let action = policy.act(&obs, &mut rng)?;
        let tr = env.step(&action)?;
        rec.length += 1;
        rec.ret += tr.reward;
        if let Some(e) = &tr.errors {
            rec.joint_err += e.joint_mean;
            rec.body_err += e.body_local_mean;
            rec.object_err_pos += e.object_pos;
            rec.object_err_ori += e.object_ori;
        }
        obs = tr.obs;
        if tr.termination.terminated {
            rec.reason = tr.termination.reason;
            break;
        }
    }
    let n = rec.length.max(1) as f64;
    rec.joint_err /= n;
    rec.body_err /= n;
    rec.object_err_pos /= n;
    rec.object_err_ori /= n;
    rec.success = rec.reason == TerminationReason::MotionEnd;
    Ok(rec)
}

/// Runs one evaluation episode per env from phase 0 and aggregates.
/// Env `i` is seeded from `(seed, i)` only, so results do not depend on
/// scheduling.
pub fn rollout_eval(
    policy: &dyn EvalPolicy,
    factory: &dyn EvalEnvFactory,
    n_envs: usize,
    overrides: &EvalOverrides,
    seed: u64,
) -> Result<EvalMetrics, EvalError> {
    let episodes: Vec<Result<EpisodeRecord, EvalError>> = (0..n_envs.max(1))
        .into_par_iter()
        .map(|i| {
            let mut env = factory.make_eval(i, overrides)?;
            run_episode(policy, env.as_mut(), i, seed)
        })
        .collect();
    Ok(EvalMetrics::from_episodes(episodes.into_iter().collect::<Result<_, _>>()?))
}
