use serde::{Deserialize, Serialize};

use super::{rollout_eval, EvalError, EvalMetrics, EvalOverrides};
use crate::env::EnvConfig;
use crate::learn::{train, TrainConfig};
use crate::tasks::{Task, TaskEnvFactory};

/// Flag assignment for one training variant; unset flags keep the base
/// config's value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    pub use_interaction_reward: Option<bool>,
    pub use_contact_termination: Option<bool>,
    pub use_residual_action: Option<bool>,
    pub use_body_track_termination: Option<bool>,
}

impl Variant {
    pub fn apply(&self, base: &EnvConfig) -> EnvConfig {
        let mut cfg = base.clone();
        if let Some(v) = self.use_interaction_reward {
            cfg.use_interaction_reward = v;
        }
        if let Some(v) = self.use_contact_termination {
            cfg.use_contact_termination = v;
        }
        if let Some(v) = self.use_residual_action {
            cfg.use_residual_action = v;
        }
        if let Some(v) = self.use_body_track_termination {
            cfg.use_body_track_termination = v;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    pub task: String,
    /// Train and evaluate on the task's corrupted reference.
    #[serde(default)]
    pub corrupted: bool,
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_envs")]
    pub eval_envs: usize,
    #[serde(default)]
    pub eval: EvalOverrides,
    /// Replaces the caller's train config when present.
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Replaces the caller's env config when present.
    #[serde(default)]
    pub env: Option<EnvConfig>,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

fn default_eval_envs() -> usize {
    256
}

impl AblationSpec {
    pub fn validate(&self, origin: &str) -> Result<(), EvalError> {
        let err = |reason: &str| {
            Err(EvalError::Spec {
                origin: origin.to_string(),
                reason: reason.to_string(),
            })
        };
        if self.variants.is_empty() {
            return err("variant: grid must not be empty");
        }
        if self.seeds.is_empty() {
            return err("seeds: at least one seed is required");
        }
        if self.eval_envs == 0 {
            return err("eval_envs: must be >= 1");
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|w| w.name == v.name) {
                return err(&format!("variant.name: duplicate name '{}'", v.name));
            }
        }
        if let Some(t) = &self.train {
            t.validate().or_else(|e| err(&format!("train: {e}")))?;
        }
        if let Some(e) = &self.env {
            e.validate().or_else(|e| err(&format!("env: {e}")))?;
        }
        Ok(())
    }
}

/// Parses and validates a TOML ablation spec. `origin` names the source
/// in error messages.
pub fn parse_ablation_spec(text: &str, origin: &str) -> Result<AblationSpec, EvalError> {
    let spec: AblationSpec = toml::from_str(text).map_err(|e| EvalError::Spec {
        origin: origin.to_string(),
        reason: e.to_string().trim_end().to_string(),
    })?;
    spec.validate(origin)?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub metrics: Option<EvalMetrics>,
    pub error: Option<String>,
}

/// Medians over the seeds of one variant that trained successfully.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub runs: usize,
    pub success_rate: Option<f64>,
    pub joint_err: Option<f64>,
    pub body_err: Option<f64>,
    pub object_err_pos: Option<f64>,
    pub object_err_ori: Option<f64>,
    pub ep_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub task: String,
    pub rows: Vec<AblationRow>,
    pub summary: Vec<VariantSummary>,
}

/// Median of the finite values; the mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

impl AblationTable {
    pub fn from_rows(task: String, rows: Vec<AblationRow>) -> Self {
        let mut names: Vec<&str> = Vec::new();
        for r in &rows {
            if !names.contains(&r.variant.as_str()) {
                names.push(&r.variant);
            }
        }
        let summary = names
            .iter()
            .map(|name| {
                let ms: Vec<&EvalMetrics> = rows
                    .iter()
                    .filter(|r| r.variant == *name)
                    .filter_map(|r| r.metrics.as_ref())
                    .collect();
                let med = |f: fn(&EvalMetrics) -> f64| median(&ms.iter().map(|m| f(m)).collect::<Vec<_>>());
                VariantSummary {
                    variant: name.to_string(),
                    runs: ms.len(),
                    success_rate: med(|m| m.success_rate),
                    joint_err: med(|m| m.joint_err_mean),
                    body_err: med(|m| m.body_err_mean),
                    object_err_pos: med(|m| m.object_err_pos),
                    object_err_ori: med(|m| m.object_err_ori),
                    ep_len: med(|m| m.episode_length),
                }
            })
            .collect();
        Self { task, rows, summary }
    }

    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.summary.iter().find(|s| s.variant == name)
    }
}

/// Trains every variant × seed cell and evaluates it. A failing cell is
/// recorded with its error and the grid continues. `on_row` sees each
/// finished cell.
pub fn run_ablation(
    spec: &AblationSpec,
    task: &Task,
    base_env: &EnvConfig,
    base_train: &TrainConfig,
    on_row: &mut dyn FnMut(&AblationRow),
) -> Result<AblationTable, EvalError> {
    spec.validate(&spec.task)?;
    let base_env = spec.env.as_ref().unwrap_or(base_env);
    let base_train = spec.train.as_ref().unwrap_or(base_train);
    let mut rows = Vec::new();
    for variant in &spec.variants {
        let env_cfg = variant.apply(base_env);
        for &seed in &spec.seeds {
            let cfg = TrainConfig {
                seed,
                ..base_train.clone()
            };
            let result = TaskEnvFactory::new(task, &env_cfg, spec.corrupted)
                .map_err(|e| e.to_string())
                .and_then(|factory| {
                    let (params, _) = train(&factory, &cfg).map_err(|e| e.to_string())?;
                    rollout_eval(&params, &factory, spec.eval_envs, &spec.eval, seed).map_err(|e| e.to_string())
                });
            let row = match result {
                Ok(m) => AblationRow {
                    variant: variant.name.clone(),
                    seed,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => AblationRow {
                    variant: variant.name.clone(),
                    seed,
                    metrics: None,
                    error: Some(e),
                },
            };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(AblationTable::from_rows(spec.task.clone(), rows))
}
