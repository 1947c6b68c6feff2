use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::EnvConfig;
use super::observation::build_observation;
use super::reward::{compute_reward, pose_errors, FootState, RewardBreakdown, RewardInputs};
use super::termination::{check_termination, contact_status, TerminationInputs, TerminationReason, TerminationResult};
use super::track::{ReferenceTrack, TrackSample};
use super::{Env, EnvError, Observation, Transition};
use crate::math::{Pose2, Vec2};
use crate::sim::{
    apply_randomization, step_in_place, BodyScale, ContactReport, ObjectConfiguration, ObjectKind, RobotConfiguration,
    Shape, SimState, WorldModel,
};

/// Maps a policy action to joint targets. Actions are clipped to `[-1, 1]`
/// and scaled; residual mode offsets the reference pose, otherwise the
/// robot's default pose. Targets are clamped to the joint limits.
pub fn apply_action(world: &WorldModel, cfg: &EnvConfig, action: &[f64], reference: &[f64]) -> Result<Vec<f64>, EnvError> {
    let n = world.joint_count();
    if action.len() != n {
        return Err(EnvError::ActionDim {
            expected: n,
            actual: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction);
    }
    Ok(action
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let base = if cfg.use_residual_action {
                reference[j]
            } else {
                world.robot.joints[j].default_pos
            };
            let [lo, hi] = world.joint_limits(j);
            (base + cfg.action_scale * a.clamp(-1.0, 1.0)).clamp(lo, hi)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResetMode {
    /// Start phase; `None` draws uniformly from `[0, rsi.phase_max]`.
    pub phase: Option<f64>,
    pub perturb: bool,
    pub randomize: bool,
}

/// Co-tracking environment for one robot, one object and one reference.
#[derive(Debug, Clone)]
pub struct CoTrackEnv {
    base_world: Arc<WorldModel>,
    world: WorldModel,
    track: Arc<ReferenceTrack>,
    cfg: Arc<EnvConfig>,
    state: SimState,
    phase0: f64,
    steps: u64,
    prev_action: Vec<f64>,
    feet: Vec<FootState>,
    done: bool,
    eval_perturb: bool,
}

fn lowest_point(shape: &Shape, pose: Pose2) -> f64 {
    match *shape {
        Shape::Circle { radius } => pose.pos.z - radius,
        Shape::Box { half_extents: h } => [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|&(sx, sz)| pose.transform_point(Vec2::new(sx * h.x, sz * h.z)).z)
            .fold(f64::INFINITY, f64::min),
    }
}

impl CoTrackEnv {
    pub fn new(world: Arc<WorldModel>, track: Arc<ReferenceTrack>, cfg: Arc<EnvConfig>) -> Result<Self, EnvError> {
        cfg.validate()?;
        track.motion.validate_against(&world.robot, &world.object)?;
        let state = SimState::rest(&world, Pose2::default());
        let mut env = Self {
            world: (*world).clone(),
            base_world: world,
            track,
            cfg,
            state,
            phase0: 0.0,
            steps: 0,
            prev_action: Vec::new(),
            feet: Vec::new(),
            done: true,
            eval_perturb: false,
        };
        env.reset_with(0, ResetMode {
            phase: Some(0.0),
            perturb: false,
            randomize: false,
        })?;
        Ok(env)
    }

    /// Makes `reset_eval` apply the RSI noise (the start phase stays 0).
    pub fn set_eval_perturbation(&mut self, on: bool) {
        self.eval_perturb = on;
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &WorldModel {
        &self.world
    }

    pub fn track(&self) -> &ReferenceTrack {
        &self.track
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn phase(&self) -> f64 {
        self.phase_at(self.steps)
    }

    fn phase_at(&self, k: u64) -> f64 {
        let duration = self.track.duration();
        (self.phase0 + k as f64 * self.cfg.control_dt() / duration).min(1.0)
    }

    /// Replaces the simulation state, e.g. for tests that place the scene
    /// by hand. Episode counters are left alone.
    pub fn set_state(&mut self, state: SimState) {
        self.state = state;
    }

    pub fn observation(&self) -> Result<Observation, EnvError> {
        let sample = self.track.sample(self.phase())?;
        Ok(build_observation(&self.world, &self.state, &sample.frame, &self.prev_action, self.phase()))
    }

    pub fn reset_with(&mut self, seed: u64, mode: ResetMode) -> Result<Vec<f64>, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = self.cfg.clone();
        let rsi = &cfg.rsi;
        let phase0 = match mode.phase {
            Some(p) => p,
            None => rng.gen::<f64>() * rsi.phase_max,
        };
        let noise = |rng: &mut ChaCha8Rng, half: f64| if mode.perturb && half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };

        self.world = if mode.randomize && cfg.dr.enabled {
            let scales: Vec<BodyScale> = (0..self.base_world.body_count())
                .map(|_| BodyScale {
                    mass_scale: rng.gen_range(cfg.dr.mass[0]..=cfg.dr.mass[1]),
                    inertia_scale: rng.gen_range(cfg.dr.inertia[0]..=cfg.dr.inertia[1]),
                    friction_scale: rng.gen_range(cfg.dr.friction[0]..=cfg.dr.friction[1]),
                })
                .collect();
            apply_randomization(&self.base_world, &scales)?
        } else {
            (*self.base_world).clone()
        };

        let sample = self.track.sample(phase0)?;
        let f = &sample.frame;
        let mut root = Pose2::new(
            f.robot_root_pos + Vec2::new(noise(&mut rng, rsi.root_pos), noise(&mut rng, rsi.root_pos)),
            f.robot_root_ori + noise(&mut rng, rsi.angle),
        );
        let joint_pos: Vec<f64> = f
            .joint_pos
            .iter()
            .enumerate()
            .map(|(j, &q)| {
                let [lo, hi] = self.world.joint_limits(j);
                (q + noise(&mut rng, rsi.angle)).clamp(lo, hi)
            })
            .collect();
        let root_vel = sample.root_vel + Vec2::new(noise(&mut rng, rsi.vel), noise(&mut rng, rsi.vel));
        let root_ang_vel = sample.root_ang_vel + noise(&mut rng, rsi.vel);
        let joint_vel: Vec<f64> = sample.joint_vel.iter().map(|&v| v + noise(&mut rng, rsi.vel)).collect();

        // Lift the robot if the perturbation sank it deeper than the
        // reference pose itself sits.
        let lowest_robot = |root: Pose2, q: &[f64]| {
            self.world
                .forward_kinematics(root, q)
                .iter()
                .zip(self.world.bodies())
                .map(|(p, b)| lowest_point(&b.shape, *p))
                .fold(f64::INFINITY, f64::min)
        };
        if mode.perturb {
            let floor = lowest_robot(f.root_pose(), &f.joint_pos).min(0.0);
            let lowest = lowest_robot(root, &joint_pos);
            if lowest < floor {
                root.pos.z += floor - lowest;
            }
        }

        let mut object = ObjectConfiguration {
            pose: f.object_pose(),
            vel: sample.object_vel,
            ang_vel: sample.object_ang_vel,
            joint: f.object_joint.unwrap_or(0.0),
            joint_vel: sample.object_joint_vel,
        };
        match self.world.object.kind {
            ObjectKind::Free => {
                object.pose.pos += Vec2::new(noise(&mut rng, rsi.object), noise(&mut rng, rsi.object));
                object.pose.angle += noise(&mut rng, rsi.object);
                let floor = lowest_point(&self.world.object.body.shape, f.object_pose()).min(0.0);
                let low = lowest_point(&self.world.object.body.shape, object.pose);
                if mode.perturb && low < floor {
                    object.pose.pos.z += floor - low;
                }
            }
            ObjectKind::Hinged { .. } => object.joint += noise(&mut rng, rsi.object),
            ObjectKind::Fixed => {}
        }

        let robot = RobotConfiguration {
            root,
            root_vel,
            root_ang_vel,
            joint_pos,
            joint_vel,
        };
        self.state = SimState::from_configuration(&self.world, &robot, &object)?;
        self.phase0 = phase0;
        self.steps = 0;
        self.prev_action = vec![0.0; self.world.joint_count()];
        let weight = self.world.robot_mass() * self.world.settings.gravity.length();
        self.feet = self
            .world
            .foot_ids()
            .iter()
            .map(|&id| {
                let touching = lowest_point(&self.world.bodies()[id].shape, self.state.bodies[id].pose) < 0.005;
                FootState {
                    in_contact: touching,
                    air_time: 0.0,
                    last_force: if touching { weight } else { 0.0 },
                }
            })
            .collect();
        self.done = false;
        Ok(self.observation()?.to_vec())
    }

    fn reference_foot_swing(&self, sample: &TrackSample) -> Vec<bool> {
        self.world
            .foot_ids()
            .iter()
            .map(|&id| lowest_point(&self.world.bodies()[id].shape, sample.body_poses[id]) > 0.01)
            .collect()
    }

    /// Full step returning the reward breakdown alongside the transition.
    pub fn step_detailed(&mut self, action: &[f64]) -> Result<(Transition, RewardBreakdown), EnvError> {
        if self.done {
            return Err(EnvError::Terminated);
        }
        let next_phase = self.phase_at(self.steps + 1);
        let sample = self.track.sample(next_phase)?;
        let targets = apply_action(&self.world, &self.cfg, action, &sample.frame.joint_pos)?;
        let action: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();

        let decimation = self.cfg.decimation;
        let mut report = ContactReport {
            contacts: Vec::new(),
            dt: self.cfg.control_dt(),
        };
        let mut fault = false;
        for _ in 0..decimation {
            match step_in_place(&self.world, &mut self.state, &targets, self.cfg.physics_dt) {
                Ok(r) => report.contacts.extend(r.scaled(1.0 / decimation as f64).contacts),
                Err(_) => {
                    fault = true;
                    break;
                }
            }
        }
        self.steps += 1;

        if fault || !self.state.is_finite() {
            self.done = true;
            let obs = vec![0.0; self.obs_dim()];
            return Ok((
                Transition {
                    obs,
                    reward: 0.0,
                    terms: vec![0.0; RewardBreakdown::NAMES.len()],
                    termination: TerminationResult {
                        terminated: true,
                        reason: TerminationReason::RootPose,
                        step: self.steps,
                    },
                    phase: next_phase,
                    joint_targets: targets,
                    errors: None,
                    sim_fault: true,
                },
                RewardBreakdown::default(),
            ));
        }

        let swing = self.reference_foot_swing(&sample);
        let reward = compute_reward(
            &self.world,
            &self.state,
            &sample,
            RewardInputs {
                report: &report,
                prev_action: &self.prev_action,
                action: &action,
                feet: &mut self.feet,
                ref_foot_swing: &swing,
            },
            &self.cfg,
        )?;
        let errors = pose_errors(&self.world, &self.state, &sample);
        let (dist, force) = contact_status(&self.world, &self.state, &sample.frame, &report);
        let mut termination = check_termination(
            &TerminationInputs {
                errors: &errors,
                contact_distance: &dist,
                contact_force: &force,
                phase: next_phase,
            },
            self.steps,
            &self.cfg,
        );
        if !termination.terminated && self.cfg.horizon > 0 && self.steps >= self.cfg.horizon {
            termination = TerminationResult {
                terminated: true,
                reason: TerminationReason::MotionEnd,
                step: self.steps,
            };
        }
        self.done = termination.terminated;
        let obs = build_observation(&self.world, &self.state, &sample.frame, &action, next_phase).to_vec();
        self.prev_action = action;
        Ok((
            Transition {
                obs,
                reward: reward.total,
                terms: reward.terms().iter().map(|t| t.weighted).collect(),
                termination,
                phase: next_phase,
                joint_targets: targets,
                errors: Some(errors),
                sim_fault: false,
            },
            reward,
        ))
    }
}

impl Env for CoTrackEnv {
    fn obs_dim(&self) -> usize {
        Observation::dim(self.world.joint_count(), self.world.eef_ids().len())
    }

    fn act_dim(&self) -> usize {
        self.world.joint_count()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.reset_with(seed, ResetMode {
            phase: None,
            perturb: true,
            randomize: true,
        })
        .expect("reset from a validated reference")
    }

    fn reset_eval(&mut self, seed: u64) -> Vec<f64> {
        self.reset_with(seed, ResetMode {
            phase: Some(0.0),
            perturb: self.eval_perturb,
            randomize: true,
        })
        .expect("reset from a validated reference")
    }

    fn step(&mut self, action: &[f64]) -> Result<Transition, EnvError> {
        self.step_detailed(action).map(|(t, _)| t)
    }

    fn term_names(&self) -> Vec<String> {
        RewardBreakdown::NAMES.iter().map(|s| s.to_string()).collect()
    }
}
