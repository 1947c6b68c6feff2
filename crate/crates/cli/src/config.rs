use std::path::{Path, PathBuf};

use cotrack_core::env::EnvConfig;
use cotrack_core::learn::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Root holding `robots/`, `objects/`, `tasks/` and `ablations/`.
    pub assets: PathBuf,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            assets: PathBuf::from("assets"),
            output: PathBuf::from("runs"),
        }
    }
}

/// Everything a command needs, resolved from file, environment and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub seed: u64,
    /// Use the task's corrupted reference.
    pub corrupted: bool,
    pub paths: Paths,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: "push_box".into(),
            seed: 0,
            corrupted: false,
            paths: Paths::default(),
            env: EnvConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Parses TOML, reporting the dotted path of the offending field.
pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str, origin: &Path) -> Result<T, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim_end().to_string();
        let loc = inner
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!(" (line {line})")
            })
            .unwrap_or_default();
        if path == "." || path.is_empty() {
            CliError::Config(format!("{}{loc}: {msg}", origin.display()))
        } else {
            CliError::Config(format!("{}{loc}: field `{path}`: {msg}", origin.display()))
        }
    })
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            parse_toml(&text, p)
        }
    }
}

impl RunConfig {
    /// Checks value ranges and pushes `seed` into the train config.
    pub fn finish(mut self) -> Result<Self, CliError> {
        self.train.seed = self.seed;
        self.env.validate().map_err(|e| CliError::Config(format!("env: {e}")))?;
        self.train.validate().map_err(|e| CliError::Config(format!("train: {e}")))?;
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// Writes the resolved config to `dir/name`.
    pub fn echo(&self, dir: &Path, name: &str) -> Result<PathBuf, CliError> {
        let path = dir.join(name);
        std::fs::write(&path, self.to_toml()).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}
