//! One-dimensional point mass following a sinusoid. Small enough that a PD
//! controller gives a near-optimal reference return.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::termination::{TerminationReason, TerminationResult};
use super::{Env, EnvError, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointMassConfig {
    pub amplitude: f64,
    pub period: f64,
    pub dt: f64,
    pub horizon: u64,
    /// Acceleration per unit action, m/s².
    pub max_accel: f64,
    /// Reward kernel width, m.
    pub sigma: f64,
    /// Uniform start-error half-width used by training resets.
    pub start_noise: f64,
}

impl Default for PointMassConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            period: 4.0,
            dt: 0.05,
            horizon: 100,
            max_accel: 2.0,
            sigma: 0.3,
            start_noise: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PointMassEnv {
    cfg: PointMassConfig,
    x: f64,
    v: f64,
    t0: f64,
    steps: u64,
    done: bool,
}

impl PointMassEnv {
    pub fn new(cfg: PointMassConfig) -> Self {
        let mut env = Self {
            cfg,
            x: 0.0,
            v: 0.0,
            t0: 0.0,
            steps: 0,
            done: true,
        };
        env.reset_eval(0);
        env
    }

    pub fn config(&self) -> &PointMassConfig {
        &self.cfg
    }

    fn omega(&self) -> f64 {
        TAU / self.cfg.period
    }

    fn time(&self) -> f64 {
        self.t0 + self.steps as f64 * self.cfg.dt
    }

    /// Target position, velocity and acceleration at time `t`.
    pub fn target(&self, t: f64) -> (f64, f64, f64) {
        let w = self.omega();
        let a = self.cfg.amplitude;
        (a * (w * t).sin(), a * w * (w * t).cos(), -a * w * w * (w * t).sin())
    }

    fn obs(&self) -> Vec<f64> {
        let t = self.time();
        let (x, v, acc) = self.target(t);
        let phase = self.steps as f64 / self.cfg.horizon as f64;
        vec![self.x - x, self.v - v, acc / self.cfg.max_accel, phase]
    }

    /// Tracking controller with acceleration feed-forward, in action units.
    pub fn pd_action(obs: &[f64], max_accel: f64) -> f64 {
        let (e, de, ff) = (obs[0], obs[1], obs[2] * max_accel);
        ((-25.0 * e - 10.0 * de + ff) / max_accel).clamp(-1.0, 1.0)
    }
}

impl Env for PointMassEnv {
    fn obs_dim(&self) -> usize {
        4
    }

    fn act_dim(&self) -> usize {
        1
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.t0 = rng.gen::<f64>() * self.cfg.period;
        let (x, v, _) = self.target(self.t0);
        let n = self.cfg.start_noise;
        self.x = x + rng.gen_range(-n..=n);
        self.v = v + rng.gen_range(-n..=n);
        self.steps = 0;
        self.done = false;
        self.obs()
    }

    fn reset_eval(&mut self, _seed: u64) -> Vec<f64> {
        self.t0 = 0.0;
        let (x, v, _) = self.target(0.0);
        self.x = x;
        self.v = v;
        self.steps = 0;
        self.done = false;
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition, EnvError> {
        if self.done {
            return Err(EnvError::Terminated);
        }
        if action.len() != 1 {
            return Err(EnvError::ActionDim {
                expected: 1,
                actual: action.len(),
            });
        }
        if !action[0].is_finite() {
            return Err(EnvError::NonFiniteAction);
        }
        let u = action[0].clamp(-1.0, 1.0) * self.cfg.max_accel;
        self.v += u * self.cfg.dt;
        self.x += self.v * self.cfg.dt;
        self.steps += 1;
        let (x, _, _) = self.target(self.time());
        let reward = (-(self.x - x).abs() / self.cfg.sigma).exp();
        let end = self.steps >= self.cfg.horizon;
        self.done = end;
        Ok(Transition {
            obs: self.obs(),
            reward,
            terms: vec![reward],
            termination: TerminationResult {
                terminated: end,
                reason: if end { TerminationReason::MotionEnd } else { TerminationReason::None },
                step: self.steps,
            },
            phase: self.steps as f64 / self.cfg.horizon as f64,
            joint_targets: vec![u],
            errors: None,
            sim_fault: false,
        })
    }

    fn term_names(&self) -> Vec<String> {
        vec!["tracking".into()]
    }
}
