use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cotrack_core::env::Env;
use cotrack_core::eval::{export_metrics, export_table, parse_ablation_spec, rollout_eval, EvalMetrics, EvalOverrides};
use cotrack_core::learn::{config_hash, policy_forward, train_with, Checkpoint, EnvFactory, LearnError, PolicyParams, UpdateLog, CHECKPOINT_VERSION};
use cotrack_core::math::Vec2;
use cotrack_core::refmotion::{corrupt_reference, parse_motion};
use cotrack_core::sim::{ObjectModel, RobotModel};
use cotrack_core::tasks::{load_task, Task, TaskEnvFactory, TaskError, TaskFile};
use serde_json::json;

use crate::config::{load_run_config, parse_toml, RunConfig};
use crate::{CliError, EvalArgs, FileKind, RunArgs};

fn runtime(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// The bundled assets directory, used when `assets` is left at its
/// default and the working directory has none.
fn assets_dir(p: &Path) -> PathBuf {
    if p.is_dir() || p != Path::new("assets") {
        return p.to_path_buf();
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn task_err(e: TaskError) -> CliError {
    match e {
        TaskError::Unknown { .. } | TaskError::NotCoTrack { .. } => CliError::Config(e.to_string()),
        TaskError::Io { .. } | TaskError::Parse { .. } => CliError::Validation(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

fn load(assets: &Path, id: &str) -> Result<Task, CliError> {
    load_task(&assets_dir(assets), id).map_err(task_err)
}

/// Applies environment and flag layers on top of `cfg`.
fn apply_args(mut cfg: RunConfig, run: &RunArgs) -> Result<RunConfig, CliError> {
    if let Some(t) = &run.task {
        cfg.task = t.clone();
    }
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if let Some(a) = &run.assets {
        cfg.paths.assets = a.clone();
    }
    if let Some(o) = &run.out {
        cfg.paths.output = o.clone();
    }
    if run.corrupted {
        cfg.corrupted = true;
    }
    if let Some(n) = run.total_updates {
        cfg.train.total_updates = n;
    }
    if let Some(n) = run.num_envs {
        cfg.train.num_envs = n;
    }
    if let Some(n) = run.rollout_len {
        cfg.train.rollout_len = n;
    }
    if run.no_residual_action {
        cfg.env.use_residual_action = false;
    }
    if run.no_interaction_reward {
        cfg.env.use_interaction_reward = false;
    }
    if run.no_contact_term {
        cfg.env.use_contact_termination = false;
    }
    if run.no_body_track_term {
        cfg.env.use_body_track_termination = false;
    }
    cfg.finish()
}

fn overrides(eval: &EvalArgs) -> EvalOverrides {
    EvalOverrides {
        disable_contact_termination: eval.eval_disable_contact_term,
        disable_body_termination: eval.eval_disable_body_term,
        domain_randomization: eval.eval_dr,
        rsi_perturbation: eval.eval_rsi,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(runtime(dir))
}

fn parse_offset(s: &str) -> Result<Vec2, CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    let bad = || CliError::Config(format!("--corrupt: expected \"x,z\" in metres, got \"{s}\""));
    if parts.len() != 2 {
        return Err(bad());
    }
    let x: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let z: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    if !(x.is_finite() && z.is_finite()) {
        return Err(bad());
    }
    Ok(Vec2::new(x, z))
}

pub fn gen_data(task_id: &str, out: &Path, corrupt: Option<&str>, assets: Option<PathBuf>) -> Result<(), CliError> {
    let offset = corrupt.map(parse_offset).transpose()?;
    let task = load(&assets.unwrap_or_else(|| PathBuf::from("assets")), task_id)?;
    let t = task.cotrack().map_err(task_err)?;
    let motion = match offset {
        None => t.motion.clone(),
        Some(offset) => {
            let mut c = t
                .corruption
                .ok_or_else(|| CliError::Config(format!("task {task_id} defines no corruption window")))?;
            c.offset = offset;
            corrupt_reference(&t.motion, &t.world, &c).map_err(|e| CliError::Runtime(e.to_string()))?
        }
    };
    create_dir(out)?;
    let files = [
        ("robot.json", t.world.robot.to_json()),
        ("object.json", t.world.object.to_json()),
        ("motion.json", motion.to_json()),
    ];
    for (name, text) in files {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(runtime(&p))?;
    }
    let written = std::fs::read(out.join("motion.json")).map_err(runtime(out))?;
    parse_motion(&written)
        .and_then(|m| m.validate_against(&t.world.robot, &t.world.object))
        .map_err(|e| CliError::Validation(format!("generated motion: {e}")))?;
    println!("{}", out.display());
    Ok(())
}

fn detect_kind(path: &Path, text: &str) -> FileKind {
    if path.extension().is_some_and(|e| e == "toml") {
        return if text.contains("[[variant]]") { FileKind::Ablation } else { FileKind::Config };
    }
    match serde_json::from_str::<serde_json::Value>(text) {
        Ok(v) if v.get("frames").is_some() => FileKind::Motion,
        Ok(v) if v.get("joints").is_some() => FileKind::Robot,
        Ok(v) if v.get("kind").is_some() && v.get("task_version").is_some() => FileKind::Task,
        _ => FileKind::Object,
    }
}

pub fn validate(path: &Path, kind: FileKind, task: Option<&str>, assets: Option<PathBuf>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let kind = if kind == FileKind::Auto { detect_kind(path, &text) } else { kind };
    let invalid = |e: String| CliError::Validation(format!("{}: {e}", path.display()));
    match kind {
        FileKind::Motion => {
            let motion = parse_motion(text.as_bytes()).map_err(|e| invalid(e.to_string()))?;
            if let Some(id) = task {
                let task = load(&assets.unwrap_or_else(|| PathBuf::from("assets")), id)?;
                let t = task.cotrack().map_err(task_err)?;
                motion
                    .validate_against(&t.world.robot, &t.world.object)
                    .map_err(|e| invalid(e.to_string()))?;
            }
        }
        FileKind::Robot => {
            RobotModel::from_json(&text).map_err(|e| invalid(e.to_string()))?;
        }
        FileKind::Object => {
            ObjectModel::from_json(&text).map_err(|e| invalid(e.to_string()))?;
        }
        FileKind::Task => {
            serde_json::from_str::<TaskFile>(&text).map_err(|e| invalid(e.to_string()))?;
        }
        FileKind::Config => {
            let cfg: RunConfig = parse_toml(&text, path).map_err(|e| CliError::Validation(inner(e)))?;
            cfg.finish().map_err(|e| CliError::Validation(inner(e)))?;
        }
        FileKind::Ablation => {
            parse_ablation_spec(&text, &path.display().to_string()).map_err(|e| CliError::Validation(e.to_string()))?;
        }
        FileKind::Auto => unreachable!("auto resolved above"),
    }
    println!("ok: {:?} {}", kind, path.display());
    Ok(())
}

fn inner(e: CliError) -> String {
    match e {
        CliError::Config(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
    }
}

fn learn_err(e: LearnError) -> CliError {
    match e {
        LearnError::Config { .. } => CliError::Config(e.to_string()),
        LearnError::Dimension { .. } => CliError::Validation(e.to_string()),
        _ => CliError::Runtime(e.to_string()),
    }
}

pub fn train(run: &RunArgs) -> Result<PathBuf, CliError> {
    let cfg = apply_args(load_run_config(run.config.as_deref())?, run)?;
    let task = load(&cfg.paths.assets, &cfg.task)?;
    let factory = TaskEnvFactory::new(&task, &cfg.env, cfg.corrupted).map_err(task_err)?;
    let out = cfg.paths.output.clone();
    create_dir(&out)?;
    cfg.echo(&out, "resolved_config.toml")?;
    // The output directory does not affect the run.
    let hash = config_hash(&RunConfig {
        paths: crate::config::Paths {
            output: PathBuf::new(),
            ..cfg.paths.clone()
        },
        ..cfg.clone()
    });
    let log_path = out.join("train_log.jsonl");
    let mut log = BufWriter::new(std::fs::File::create(&log_path).map_err(runtime(&log_path))?);
    let checkpoint = |params: &PolicyParams, updates: usize| Checkpoint {
        checkpoint_version: CHECKPOINT_VERSION,
        config_hash: hash.clone(),
        task: cfg.task.clone(),
        updates,
        params: params.clone(),
    };
    let (params, logs) = train_with(&factory, &cfg.train, None, &mut |rec: &UpdateLog, params, is_checkpoint| {
        let line = serde_json::to_string(rec).expect("log record serialises");
        writeln!(log, "{line}").map_err(|e| LearnError::Io {
            path: log_path.display().to_string(),
            reason: e.to_string(),
        })?;
        if is_checkpoint && rec.update < cfg.train.total_updates {
            checkpoint(params, rec.update).save(&out.join(format!("checkpoint_{:06}.json", rec.update)))?;
        }
        eprintln!(
            "update {:>5}  return {:>9}  success {:>5}  episodes {}",
            rec.update,
            rec.mean_return.map_or("-".into(), |r| format!("{r:.2}")),
            rec.success_rate.map_or("-".into(), |r| format!("{r:.2}")),
            rec.episodes
        );
        Ok(())
    })
    .map_err(learn_err)?;
    log.flush().map_err(runtime(&log_path))?;
    let path = out.join("checkpoint.json");
    checkpoint(&params, logs.len()).save(&path).map_err(learn_err)?;
    println!("{}", path.display());
    Ok(path)
}

/// Run config for commands that start from a checkpoint: an explicit
/// `--config`, else the config echoed next to the checkpoint.
fn checkpoint_config(checkpoint: &Path, run: &RunArgs) -> Result<RunConfig, CliError> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let echoed = dir.join("resolved_config.toml");
    let base = match (&run.config, echoed.is_file()) {
        (Some(p), _) => load_run_config(Some(p))?,
        (None, true) => load_run_config(Some(&echoed))?,
        (None, false) => RunConfig::default(),
    };
    let mut run = run.clone();
    if run.out.is_none() {
        run.out = Some(dir.to_path_buf());
    }
    apply_args(base, &run)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::Validation(e.to_string()))
}

fn check_dims(ck: &Checkpoint, factory: &TaskEnvFactory, task: &str) -> Result<(), CliError> {
    let env = factory.make(0).map_err(|e| CliError::Runtime(e.to_string()))?;
    let p = &ck.params;
    for (what, expected, actual) in [("observation", env.obs_dim(), p.obs_dim()), ("action", env.act_dim(), p.act_dim())] {
        if expected != actual {
            return Err(CliError::Validation(format!(
                "checkpoint does not fit task {task}: {what} dimension expected {expected}, checkpoint has {actual}"
            )));
        }
    }
    if ck.task != task {
        eprintln!("cotrack: note: checkpoint was trained on {}, evaluating on {task}", ck.task);
    }
    Ok(())
}

pub fn eval(checkpoint: &Path, n_envs: Option<usize>, eval: &EvalArgs, run: &RunArgs) -> Result<PathBuf, CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let cfg = checkpoint_config(checkpoint, run)?;
    let n_envs = n_envs.unwrap_or(256);
    if n_envs == 0 {
        return Err(CliError::Config("--n-envs must be >= 1".into()));
    }
    let task = load(&cfg.paths.assets, &cfg.task)?;
    let factory = TaskEnvFactory::new(&task, &cfg.env, cfg.corrupted).map_err(task_err)?;
    check_dims(&ck, &factory, &cfg.task)?;
    let ov = overrides(eval);
    let metrics = rollout_eval(&ck.params, &factory, n_envs, &ov, cfg.seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    let out = cfg.paths.output.clone();
    create_dir(&out)?;
    let mut echoed = toml::Table::try_from(&cfg).expect("run config serialises");
    echoed.insert("checkpoint".into(), checkpoint.display().to_string().into());
    echoed.insert("n_envs".into(), (n_envs as i64).into());
    echoed.insert("eval".into(), toml::Value::try_from(ov).expect("overrides serialise"));
    let text = toml::to_string(&echoed).expect("table serialises");
    let cfg_path = out.join("eval_config.toml");
    std::fs::write(&cfg_path, text).map_err(runtime(&cfg_path))?;
    let path = out.join("eval_metrics.csv");
    export_metrics(&metrics, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
    print_metrics(&metrics);
    println!("{}", path.display());
    Ok(path)
}

fn print_metrics(m: &EvalMetrics) {
    eprintln!(
        "success {:.3}  joint_err {:.4}±{:.4}  body_err {:.4}±{:.4}  object_err {:.4} m {:.4} rad  ep_len {:.1}  terminations {:?}",
        m.success_rate,
        m.joint_err_mean,
        m.joint_err_std,
        m.body_err_mean,
        m.body_err_std,
        m.object_err_pos,
        m.object_err_ori,
        m.episode_length,
        m.termination_histogram
    );
}

pub fn ablate(spec_path: &Path, seeds: Option<Vec<u64>>, eval_envs: Option<usize>, run: &RunArgs) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(spec_path).map_err(|e| CliError::Config(format!("{}: {e}", spec_path.display())))?;
    let mut spec = parse_ablation_spec(&text, &spec_path.display().to_string()).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(t) = &run.task {
        if *t != spec.task {
            return Err(CliError::Config(format!("--task {t} conflicts with the spec's task {}", spec.task)));
        }
    }
    let mut base = load_run_config(run.config.as_deref())?;
    base.task = spec.task.clone();
    base.corrupted = spec.corrupted;
    if let Some(t) = spec.train.take() {
        base.train = t;
    }
    if let Some(e) = spec.env.take() {
        base.env = e;
    }
    let cfg = apply_args(base, run)?;
    spec.corrupted = cfg.corrupted;
    if let Some(s) = seeds {
        spec.seeds = s;
    }
    if let Some(n) = eval_envs {
        spec.eval_envs = n;
    }
    spec.validate(&spec_path.display().to_string()).map_err(|e| CliError::Config(e.to_string()))?;
    let task = load(&cfg.paths.assets, &spec.task)?;
    let out = cfg.paths.output.clone();
    create_dir(&out)?;
    cfg.echo(&out, "resolved_config.toml")?;
    let spec_echo = out.join("resolved_ablation.toml");
    std::fs::write(&spec_echo, toml::to_string(&spec).expect("spec serialises")).map_err(runtime(&spec_echo))?;
    let table = cotrack_core::eval::run_ablation(&spec, &task, &cfg.env, &cfg.train, &mut |row| match (&row.metrics, &row.error) {
        (Some(m), _) => {
            eprint!("{} seed {}: ", row.variant, row.seed);
            print_metrics(m);
        }
        (None, e) => eprintln!("{} seed {}: failed: {}", row.variant, row.seed, e.as_deref().unwrap_or("unknown error")),
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    let stem = spec_path.file_stem().and_then(|s| s.to_str()).unwrap_or("ablation");
    let path = out.join(format!("{stem}.csv"));
    export_table(&table, &path).map_err(|e| CliError::Runtime(e.to_string()))?;
    for s in &table.summary {
        eprintln!(
            "{:<20} runs {}  success {:>6}  joint_err {:>8}  body_err {:>8}",
            s.variant,
            s.runs,
            s.success_rate.map_or("-".into(), |v| format!("{v:.3}")),
            s.joint_err.map_or("-".into(), |v| format!("{v:.4}")),
            s.body_err.map_or("-".into(), |v| format!("{v:.4}")),
        );
    }
    println!("{}", path.display());
    if table.rows.iter().all(|r| r.metrics.is_none()) {
        return Err(CliError::Runtime("every ablation cell failed".into()));
    }
    Ok(path)
}

pub fn export_log(input: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::Validation(format!("{}: {e}", input.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: UpdateLog = serde_json::from_str(line).map_err(|e| CliError::Validation(format!("{}:{}: {e}", input.display(), i + 1)))?;
        records.push(rec);
    }
    let mut reward_names: Vec<String> = Vec::new();
    let mut reasons: Vec<String> = Vec::new();
    for r in &records {
        for k in r.term_means.keys() {
            if !reward_names.contains(k) {
                reward_names.push(k.clone());
            }
        }
        for k in r.terminations.keys() {
            if !reasons.contains(k) {
                reasons.push(k.clone());
            }
        }
    }
    reasons.sort();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let csv_err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", out.display()));
    let mut w = csv::Writer::from_path(out).map_err(csv_err)?;
    let mut header: Vec<String> = [
        "update",
        "env_steps",
        "episodes",
        "mean_return",
        "mean_length",
        "success_rate",
        "step_reward",
        "mean_std",
        "policy_loss",
        "value_loss",
        "entropy",
        "approx_kl",
        "clip_frac",
        "grad_norm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(reward_names.iter().map(|n| format!("rew_{n}")));
    header.extend(reasons.iter().map(|n| format!("end_{n}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in &records {
        let mut row = vec![
            r.update.to_string(),
            r.env_steps.to_string(),
            r.episodes.to_string(),
            opt(r.mean_return),
            opt(r.mean_length),
            opt(r.success_rate),
            r.step_reward.to_string(),
            r.mean_std.to_string(),
            r.stats.policy_loss.to_string(),
            r.stats.value_loss.to_string(),
            r.stats.entropy.to_string(),
            r.stats.approx_kl.to_string(),
            r.stats.clip_frac.to_string(),
            r.stats.grad_norm.to_string(),
        ];
        row.extend(reward_names.iter().map(|n| r.term_means.get(n).map(|v| v.to_string()).unwrap_or_default()));
        row.extend(reasons.iter().map(|n| r.terminations.get(n).copied().unwrap_or(0).to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(runtime(out))?;
    println!("{}", out.display());
    Ok(())
}

pub fn export_frames(checkpoint: &Path, out_file: &Path, eval: &EvalArgs, run: &RunArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let cfg = checkpoint_config(checkpoint, run)?;
    let task = load(&cfg.paths.assets, &cfg.task)?;
    let factory = TaskEnvFactory::new(&task, &cfg.env, cfg.corrupted).map_err(task_err)?;
    check_dims(&ck, &factory, &cfg.task)?;
    let t = task.cotrack().map_err(task_err)?;
    let ov = overrides(eval);
    let mut env = t.make_env(&ov.apply(&cfg.env), cfg.corrupted).map_err(task_err)?;
    env.set_eval_perturbation(ov.rsi_perturbation);
    let mut obs = env.reset_eval(cfg.seed);
    let mut lines = Vec::new();
    let world = t.world.clone();
    let dynamic: Vec<usize> = (0..world.body_count()).filter(|&b| !world.bodies()[b].is_static).collect();
    let mut record = |env: &cotrack_core::env::CoTrackEnv, step: u64, reason: &str| -> Result<(), CliError> {
        let phase = env.phase();
        let sample = env.track().sample(phase).map_err(|e| CliError::Runtime(e.to_string()))?;
        let bodies: Vec<_> = dynamic
            .iter()
            .map(|&b| {
                let p = env.state().bodies[b].pose;
                json!({"name": world.body_name(b), "x": p.pos.x, "z": p.pos.z, "angle": p.angle})
            })
            .collect();
        let reference: Vec<_> = sample
            .body_poses
            .iter()
            .enumerate()
            .map(|(b, p)| json!({"name": world.body_name(b), "x": p.pos.x, "z": p.pos.z, "angle": p.angle}))
            .collect();
        let f = &sample.frame;
        lines.push(
            json!({
                "step": step,
                "phase": phase,
                "termination": reason,
                "bodies": bodies,
                "reference_bodies": reference,
                "reference_object": {"x": f.object_pos.x, "z": f.object_pos.z, "angle": f.object_ori},
            })
            .to_string(),
        );
        Ok(())
    };
    record(&env, 0, "none")?;
    for step in 1..=cotrack_core::eval::MAX_EVAL_STEPS {
        let action = policy_forward(&ck.params, &obs).map_err(learn_err)?.mean;
        let tr = env.step(&action).map_err(|e| CliError::Runtime(e.to_string()))?;
        obs = tr.obs;
        record(&env, step, tr.termination.reason.as_str())?;
        if tr.termination.terminated {
            break;
        }
    }
    if let Some(dir) = out_file.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    std::fs::write(out_file, lines.join("\n") + "\n").map_err(runtime(out_file))?;
    println!("{}", out_file.display());
    Ok(())
}
