//! Fixtures shared by the benchmarks.

use std::path::{Path, PathBuf};

use cotrack_core::env::TerminationReason;
use cotrack_core::learn::RolloutBatch;
use cotrack_core::tasks::{load_task, Task};

pub fn assets() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn task(id: &str) -> Task {
    load_task(&assets(), id).expect("bundled task loads")
}

/// A deterministic synthetic rollout of `n_envs × n_steps` transitions.
pub fn synthetic_batch(obs_dim: usize, act_dim: usize, n_envs: usize, n_steps: usize) -> RolloutBatch {
    let n = n_envs * n_steps;
    let wave = |i: usize, k: usize| ((i * 31 + k * 7) as f64 * 0.37).sin();
    let dones: Vec<bool> = (0..n).map(|i| i % 97 == 96).collect();
    RolloutBatch {
        n_envs,
        n_steps,
        obs: (0..n).map(|i| (0..obs_dim).map(|k| wave(i, k)).collect()).collect(),
        actions: (0..n).map(|i| (0..act_dim).map(|k| 0.5 * wave(k, i)).collect()).collect(),
        log_probs: (0..n).map(|i| -1.0 + 0.1 * wave(i, 3)).collect(),
        rewards: (0..n).map(|i| 1.0 + wave(i, 1)).collect(),
        values: (0..n).map(|i| 0.5 * wave(i, 2)).collect(),
        reasons: dones
            .iter()
            .map(|&d| if d { TerminationReason::RootPose } else { TerminationReason::None })
            .collect(),
        dones,
        phases: (0..n).map(|i| (i / n_envs) as f64 / n_steps as f64).collect(),
        bootstrap: vec![0.0; n_envs],
    }
}
