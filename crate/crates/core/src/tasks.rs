//! Task definitions loaded from data files under an assets directory.
//!
//! Layout: `tasks/<id>.json` names a robot file, an object file, a keyframe
//! script and an optional corruption, all relative to the assets root.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{CoTrackEnv, Env, EnvConfig, EnvError, PointMassConfig, PointMassEnv, ReferenceTrack, ResetMode};
use crate::eval::{EvalEnvFactory, EvalOverrides};
use crate::learn::EnvFactory;
use crate::refmotion::{
    corrupt_reference, generate_from_keyframes, Corruption, KeyframeScript, MotionError, ReferenceFrame,
    ReferenceMotion,
};
use crate::sim::{build_world, ObjectModel, RobotModel, SimError, WorldModel};

pub const TASK_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("unknown task '{id}'; valid tasks: {}", valid.join(", "))]
    Unknown { id: String, valid: Vec<String> },
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("task {id} is not a co-tracking task")]
    NotCoTrack { id: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// How the clean reference is produced from the keyframe script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Refine {
    /// Use the interpolated script as is.
    #[default]
    None,
    /// Replay the script open loop in simulation and record what happened.
    Rollout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoTrackTaskDef {
    pub robot: String,
    pub object: String,
    pub ground_friction: f64,
    pub frame_rate: f64,
    #[serde(default)]
    pub refine: Refine,
    pub script: KeyframeScript,
    #[serde(default)]
    pub corruption: Option<Corruption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    CoTrack(CoTrackTaskDef),
    PointMass { pointmass: PointMassConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub task_version: u32,
    pub id: String,
    pub description: String,
    #[serde(flatten)]
    pub kind: TaskKind,
}

/// A co-tracking task with its models and clean reference resolved.
#[derive(Debug, Clone)]
pub struct CoTrackTask {
    pub id: String,
    pub world: Arc<WorldModel>,
    pub script: KeyframeScript,
    pub motion: ReferenceMotion,
    pub corruption: Option<Corruption>,
}

#[derive(Debug, Clone)]
pub enum Task {
    CoTrack(CoTrackTask),
    PointMass { id: String, config: PointMassConfig },
}

impl Task {
    pub fn id(&self) -> &str {
        match self {
            Task::CoTrack(t) => &t.id,
            Task::PointMass { id, .. } => id,
        }
    }

    pub fn cotrack(&self) -> Result<&CoTrackTask, TaskError> {
        match self {
            Task::CoTrack(t) => Ok(t),
            other => Err(TaskError::NotCoTrack { id: other.id().to_string() }),
        }
    }
}

fn read(path: &Path) -> Result<String, TaskError> {
    std::fs::read_to_string(path).map_err(|e| TaskError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn parse_err(path: &Path) -> impl Fn(String) -> TaskError + '_ {
    move |reason| TaskError::Parse {
        path: path.to_path_buf(),
        reason,
    }
}

/// Ids of the task files found under `assets/tasks`, sorted.
pub fn task_ids(assets: &Path) -> Vec<String> {
    let mut ids: Vec<String> = std::fs::read_dir(assets.join("tasks"))
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            (p.extension()? == "json").then(|| p.file_stem()?.to_str().map(str::to_string))?
        })
        .collect();
    ids.sort();
    ids
}

pub fn load_task_file(assets: &Path, id: &str) -> Result<TaskFile, TaskError> {
    let path = assets.join("tasks").join(format!("{id}.json"));
    if !path.is_file() {
        return Err(TaskError::Unknown {
            id: id.to_string(),
            valid: task_ids(assets),
        });
    }
    let file: TaskFile = serde_json::from_str(&read(&path)?).map_err(|e| parse_err(&path)(e.to_string()))?;
    if file.task_version != TASK_VERSION {
        return Err(parse_err(&path)(format!("unsupported task_version {}", file.task_version)));
    }
    if file.id != id {
        return Err(parse_err(&path)(format!("file declares id '{}'", file.id)));
    }
    Ok(file)
}

pub fn load_robot(path: &Path) -> Result<RobotModel, TaskError> {
    RobotModel::from_json(&read(path)?).map_err(|e| parse_err(path)(e.to_string()))
}

pub fn load_object(path: &Path) -> Result<ObjectModel, TaskError> {
    ObjectModel::from_json(&read(path)?).map_err(|e| parse_err(path)(e.to_string()))
}

pub fn load_task(assets: &Path, id: &str) -> Result<Task, TaskError> {
    let file = load_task_file(assets, id)?;
    match file.kind {
        TaskKind::PointMass { pointmass } => Ok(Task::PointMass {
            id: file.id,
            config: pointmass,
        }),
        TaskKind::CoTrack(def) => {
            let robot = load_robot(&assets.join(&def.robot))?;
            let object = load_object(&assets.join(&def.object))?;
            let world = Arc::new(build_world(robot, object, def.ground_friction)?);
            let scripted = generate_from_keyframes(&def.script, def.frame_rate, &world.object)?;
            scripted.validate_against(&world.robot, &world.object)?;
            let motion = match def.refine {
                Refine::None => scripted,
                Refine::Rollout => refine_by_rollout(&world, scripted)?,
            };
            Ok(Task::CoTrack(CoTrackTask {
                id: file.id,
                world,
                script: def.script,
                motion,
                corruption: def.corruption,
            }))
        }
    }
}

impl CoTrackTask {
    /// The clean reference, or the corrupted one when `corrupted` is set and
    /// the task defines a corruption.
    pub fn reference(&self, corrupted: bool) -> Result<ReferenceMotion, TaskError> {
        match (&self.corruption, corrupted) {
            (Some(c), true) => Ok(corrupt_reference(&self.motion, &self.world, c)?),
            _ => Ok(self.motion.clone()),
        }
    }

    pub fn make_env(&self, cfg: &EnvConfig, corrupted: bool) -> Result<CoTrackEnv, TaskError> {
        let track = ReferenceTrack::new(self.reference(corrupted)?, &self.world)?;
        Ok(CoTrackEnv::new(self.world.clone(), Arc::new(track), Arc::new(cfg.clone()))?)
    }
}

#[derive(Debug, Clone)]
enum EnvSource {
    CoTrack {
        world: Arc<WorldModel>,
        track: Arc<ReferenceTrack>,
    },
    PointMass(PointMassConfig),
}

/// Builds training and evaluation envs for a task, sharing the models and
/// the reference track between instances.
#[derive(Debug, Clone)]
pub struct TaskEnvFactory {
    source: EnvSource,
    cfg: Arc<EnvConfig>,
}

impl TaskEnvFactory {
    /// `corrupted` selects the task's corrupted reference (ignored by tasks
    /// without one).
    pub fn new(task: &Task, cfg: &EnvConfig, corrupted: bool) -> Result<Self, TaskError> {
        cfg.validate()?;
        let source = match task {
            Task::CoTrack(t) => EnvSource::CoTrack {
                world: t.world.clone(),
                track: Arc::new(ReferenceTrack::new(t.reference(corrupted)?, &t.world)?),
            },
            Task::PointMass { config, .. } => EnvSource::PointMass(config.clone()),
        };
        Ok(Self {
            source,
            cfg: Arc::new(cfg.clone()),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    fn build(&self, cfg: Arc<EnvConfig>, eval_perturb: bool) -> Result<Box<dyn Env>, EnvError> {
        Ok(match &self.source {
            EnvSource::CoTrack { world, track } => {
                let mut env = CoTrackEnv::new(world.clone(), track.clone(), cfg)?;
                env.set_eval_perturbation(eval_perturb);
                Box::new(env)
            }
            EnvSource::PointMass(c) => Box::new(PointMassEnv::new(c.clone())),
        })
    }
}

impl EnvFactory for TaskEnvFactory {
    fn make(&self, _index: usize) -> Result<Box<dyn Env>, EnvError> {
        self.build(self.cfg.clone(), false)
    }
}

impl EvalEnvFactory for TaskEnvFactory {
    fn make_eval(&self, _index: usize, overrides: &EvalOverrides) -> Result<Box<dyn Env>, EnvError> {
        self.build(Arc::new(overrides.apply(&self.cfg)), overrides.rsi_perturbation)
    }
}

/// Replays `motion` with zero residual actions from its first frame (no
/// noise, no randomisation) and records the simulated robot and object at
/// every control step. Commanded joint angles are kept as the joint
/// channel; contact channels come from the script.
pub fn refine_by_rollout(world: &Arc<WorldModel>, motion: ReferenceMotion) -> Result<ReferenceMotion, TaskError> {
    let cfg = EnvConfig {
        use_contact_termination: false,
        ..EnvConfig::default()
    };
    let control_rate = 1.0 / cfg.control_dt();
    if ((motion.frame_rate - control_rate) / control_rate).abs() > 1e-9 {
        return Err(MotionError::Invalid {
            path: "frame_rate".into(),
            reason: format!("rollout refinement needs frame_rate = control rate {control_rate}"),
        }
        .into());
    }
    let track = Arc::new(ReferenceTrack::new(motion.clone(), world)?);
    let mut env = CoTrackEnv::new(world.clone(), track, Arc::new(cfg))?;
    env.reset_with(0, ResetMode {
        phase: Some(0.0),
        perturb: false,
        randomize: false,
    })?;
    let zero = vec![0.0; world.joint_count()];
    let mut frames = vec![motion.frames[0].clone()];
    for k in 1..motion.len() {
        let (t, _) = env.step_detailed(&zero)?;
        let state = env.state();
        let object = state.object(world);
        let scripted = &motion.frames[k];
        frames.push(ReferenceFrame {
            robot_root_pos: state.root().pose.pos,
            robot_root_ori: state.root().pose.angle,
            joint_pos: t.joint_targets.clone(),
            object_pos: object.pose.pos,
            object_ori: object.pose.angle,
            object_joint: state.object_joint_pos,
            contact_flags: scripted.contact_flags.clone(),
            contact_anchor_ids: scripted.contact_anchor_ids.clone(),
        });
        if t.termination.terminated && k + 1 < motion.len() {
            return Err(MotionError::Invalid {
                path: format!("frames[{k}]"),
                reason: format!("open-loop replay terminated early ({})", t.termination.reason.as_str()),
            }
            .into());
        }
    }
    let out = ReferenceMotion { frames, ..motion };
    out.validate()?;
    Ok(out)
}
