use cotrack_bench::{synthetic_batch, task};
use cotrack_core::env::{EnvConfig, Env};
use cotrack_core::learn::{policy_forward, ppo_update, Adam, PolicyParams, TrainConfig};
use cotrack_core::sim::step_in_place;
use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sim_step(c: &mut Criterion) {
    let t = task("push_box");
    let mut env = t.cotrack().unwrap().make_env(&EnvConfig::default(), false).unwrap();
    env.reset(0);
    let world = env.world().clone();
    let start = env.state().clone();
    let targets = vec![0.0; world.joint_count()];
    c.bench_function("sim_step_push_box", |b| {
        let mut s = start.clone();
        b.iter(|| {
            if step_in_place(&world, &mut s, &targets, 1.0 / 120.0).is_err() || s.time > 2.0 {
                s = start.clone();
            }
            black_box(s.time)
        })
    });
}

fn env_step(c: &mut Criterion) {
    for id in ["push_box", "kneel_lift"] {
        let t = task(id);
        let mut env = t.cotrack().unwrap().make_env(&EnvConfig::default(), false).unwrap();
        let zero = vec![0.0; env.act_dim()];
        env.reset(0);
        c.bench_function(&format!("env_step_{id}"), |b| {
            b.iter(|| {
                let tr = env.step(&zero).unwrap();
                if tr.termination.terminated {
                    env.reset(1);
                }
                black_box(tr.reward)
            })
        });
    }
}

fn policy(c: &mut Criterion) {
    let t = task("push_box");
    let env = t.cotrack().unwrap().make_env(&EnvConfig::default(), false).unwrap();
    let obs = vec![0.1; env.obs_dim()];
    for hidden in [vec![64, 64], vec![256, 256]] {
        let p = PolicyParams::new(env.obs_dim(), env.act_dim(), &hidden, -1.0, true, 0);
        c.bench_function(&format!("policy_forward_{}", hidden[0]), |b| b.iter(|| black_box(policy_forward(&p, &obs).unwrap())));
    }
}

fn ppo(c: &mut Criterion) {
    let (obs_dim, act_dim) = (40, 6);
    let batch = synthetic_batch(obs_dim, act_dim, 32, 32);
    let cfg = TrainConfig {
        hidden: vec![64, 64],
        ..Default::default()
    };
    let p = PolicyParams::new(obs_dim, act_dim, &cfg.hidden, cfg.init_log_std, true, 0);
    let mut group = c.benchmark_group("ppo");
    group.sample_size(10);
    group.bench_function("update_1024x64x64", |b| {
        let mut opt = Adam::new(p.theta.len(), cfg.lr);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.iter(|| black_box(ppo_update(&p, &batch, &cfg, &mut opt, &mut rng).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, sim_step, env_step, policy, ppo);
criterion_main!(benches);
