mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use cotrack_core::env::*;
use cotrack_core::math::{Pose2, Se2, Vec2};
use cotrack_core::sim::{ContactReport, WorldModel};
use cotrack_core::tasks::CoTrackTask;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cotrack(id: &str) -> CoTrackTask {
    load(id).cotrack().unwrap().clone()
}

fn env_for(id: &str, cfg: EnvConfig) -> CoTrackEnv {
    cotrack(id).make_env(&cfg, false).unwrap()
}

fn direct_eq1(d: f64, f: f64, cfg: &EnvConfig) -> f64 {
    f64::exp(-d / cfg.sigma_pos) * f64::min(f64::exp((f - cfg.f_thres) / cfg.sigma_frc), 1.0)
}

#[test]
fn contact_reward_examples() {
    let c = EnvConfig::default();
    assert_eq!(contact_reward_single(0.0, c.f_thres, c.sigma_pos, c.sigma_frc, c.f_thres), 1.0);
    assert_eq!(contact_reward_single(0.0, c.f_thres + 100.0, c.sigma_pos, c.sigma_frc, c.f_thres), 1.0);
    let r = contact_reward_single(c.sigma_pos, 0.0, c.sigma_pos, 10.0, 20.0);
    assert!((r - f64::exp(-3.0)).abs() < 1e-15);
    assert!((r - 0.0498).abs() < 1e-4);
}

#[test]
fn interaction_reward_averages_flagged_effectors() {
    let c = EnvConfig::default();
    let pos = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(5.0, 5.0)];
    let targets = [Some(Vec2::new(0.1, 0.0)), Some(Vec2::new(1.0, 0.0)), None];
    let forces = [25.0, 10.0, 0.0];
    let r = interaction_reward(&pos, &targets, &forces, &[1, 1, 0], &c).unwrap();
    let want = 0.5 * (direct_eq1(0.1, 25.0, &c) + direct_eq1(0.0, 10.0, &c));
    assert!((r - want).abs() < 1e-12);
    assert_eq!(interaction_reward(&pos, &targets, &forces, &[0, 0, 0], &c).unwrap(), 0.0);
}

#[test]
fn interaction_reward_rejects_bad_kernels() {
    for cfg in [
        EnvConfig { sigma_pos: 0.0, ..Default::default() },
        EnvConfig { sigma_frc: -1.0, ..Default::default() },
        EnvConfig { f_thres: 0.0, ..Default::default() },
    ] {
        let err = interaction_reward(&[Vec2::ZERO], &[Some(Vec2::ZERO)], &[0.0], &[1], &cfg).unwrap_err();
        assert!(matches!(err, EnvError::Config { .. }));
    }
}

proptest! {
    #[test]
    fn interaction_reward_is_bounded_and_monotone(
        d in 0.0f64..2.0, dd in 0.0f64..1.0, f in 0.0f64..60.0, df in 0.0f64..30.0,
    ) {
        let c = EnvConfig::default();
        let r = |d: f64, f: f64| interaction_reward(&[Vec2::new(d, 0.0)], &[Some(Vec2::ZERO)], &[f], &[1], &c).unwrap();
        let base = r(d, f);
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(r(d + dd, f) <= base);
        prop_assert!(r(d, f + df) >= base);
        if f >= c.f_thres {
            prop_assert_eq!(r(d, f + df), base);
        }
    }
}

fn errors() -> PoseErrors {
    PoseErrors::default()
}

fn check(e: &PoseErrors, dist: &[Option<f64>], force: &[f64], phase: f64, step: u64, cfg: &EnvConfig) -> TerminationReason {
    let r = check_termination(
        &TerminationInputs {
            errors: e,
            contact_distance: dist,
            contact_force: force,
            phase,
        },
        step,
        cfg,
    );
    assert_eq!(r.terminated, r.reason != TerminationReason::None);
    assert_eq!(r.step, step);
    r.reason
}

#[test]
fn termination_table_examples() {
    let cfg = EnvConfig::default();
    let e = PoseErrors { root_pos: 0.6, ..errors() };
    assert_eq!(check(&e, &[], &[], 0.5, 30, &cfg), TerminationReason::RootPose);
    assert_eq!(check(&e, &[], &[], 0.5, 10, &cfg), TerminationReason::None);
    let ok = errors();
    assert_eq!(check(&ok, &[Some(0.25)], &[0.5], 0.5, 40, &cfg), TerminationReason::LostContact);
    assert_eq!(check(&ok, &[Some(0.25)], &[3.0], 0.5, 40, &cfg), TerminationReason::None);
    assert_eq!(check(&ok, &[Some(0.1)], &[0.0], 0.5, 40, &cfg), TerminationReason::None);
    assert_eq!(check(&ok, &[None], &[0.0], 0.5, 40, &cfg), TerminationReason::None);
    let off = EnvConfig {
        use_contact_termination: false,
        ..Default::default()
    };
    assert_eq!(check(&ok, &[Some(0.25)], &[0.5], 0.5, 40, &off), TerminationReason::None);
}

#[test]
fn termination_thresholds_are_strict() {
    let cfg = EnvConfig::default();
    let cases: [(fn(f64) -> PoseErrors, f64, TerminationReason); 6] = [
        (|x| PoseErrors { root_pos: x, ..Default::default() }, 0.5, TerminationReason::RootPose),
        (|x| PoseErrors { root_ori: x, ..Default::default() }, 1.2, TerminationReason::RootPose),
        (|x| PoseErrors { body_local_max: x, ..Default::default() }, 0.5, TerminationReason::BodyPose),
        (|x| PoseErrors { body_ori_max: x, ..Default::default() }, 1.2, TerminationReason::BodyPose),
        (|x| PoseErrors { object_pos: x, ..Default::default() }, 0.5, TerminationReason::ObjectPose),
        (|x| PoseErrors { object_ori: x, ..Default::default() }, 1.2, TerminationReason::ObjectPose),
    ];
    for (make, at, reason) in cases {
        assert_eq!(check(&make(at), &[], &[], 0.5, 25, &cfg), TerminationReason::None);
        assert_eq!(check(&make(at + 1e-9), &[], &[], 0.5, 25, &cfg), reason);
        assert_eq!(check(&make(at + 1e-9), &[], &[], 0.5, 24, &cfg), TerminationReason::None);
    }
    assert_eq!(check(&errors(), &[Some(0.2)], &[0.0], 0.5, 40, &cfg), TerminationReason::None);
    assert_eq!(check(&errors(), &[Some(0.2 + 1e-9)], &[1.0], 0.5, 40, &cfg), TerminationReason::None);
    assert_eq!(check(&errors(), &[Some(0.2 + 1e-9)], &[1.0 - 1e-9], 0.5, 40, &cfg), TerminationReason::LostContact);
    assert_eq!(check(&errors(), &[Some(1.0)], &[0.0], 0.5, 24, &cfg), TerminationReason::None);
}

#[test]
fn termination_priorities_and_switches() {
    let cfg = EnvConfig::default();
    let all_bad = PoseErrors {
        root_pos: 1.0,
        body_local_max: 1.0,
        object_pos: 1.0,
        ..errors()
    };
    assert_eq!(check(&all_bad, &[Some(1.0)], &[0.0], 1.0, 30, &cfg), TerminationReason::RootPose);
    let body_obj = PoseErrors {
        body_local_max: 1.0,
        object_pos: 1.0,
        ..errors()
    };
    assert_eq!(check(&body_obj, &[], &[], 0.5, 30, &cfg), TerminationReason::BodyPose);
    let no_body = EnvConfig {
        use_body_track_termination: false,
        ..Default::default()
    };
    assert_eq!(check(&body_obj, &[], &[], 0.5, 30, &no_body), TerminationReason::ObjectPose);
    let joint = PoseErrors { object_joint: 1.3, ..errors() };
    assert_eq!(check(&joint, &[], &[], 0.5, 30, &cfg), TerminationReason::ObjectPose);

    // Max reduction is stricter than mean.
    let spread = PoseErrors {
        body_local_max: 0.6,
        body_local_mean: 0.2,
        ..errors()
    };
    assert_eq!(check(&spread, &[], &[], 0.5, 30, &cfg), TerminationReason::BodyPose);
    let mut mean = EnvConfig::default();
    mean.termination.body_error = BodyErrorReduce::Mean;
    assert_eq!(check(&spread, &[], &[], 0.5, 30, &mean), TerminationReason::None);

    assert_eq!(check(&errors(), &[], &[], 1.0, 3, &cfg), TerminationReason::MotionEnd);
    assert_eq!(check(&errors(), &[], &[], 0.999, 300, &cfg), TerminationReason::None);
    assert!(!TerminationReason::MotionEnd.is_failure());
    assert!(TerminationReason::LostContact.is_failure());
}

#[test]
fn apply_action_examples() {
    let task = cotrack("push_box");
    let world = &task.world;
    let n = world.joint_count();
    let cfg = EnvConfig {
        action_scale: 0.5,
        ..Default::default()
    };
    let mut reference: Vec<f64> = (0..n).map(|j| 0.5 * (world.joint_limits(j)[0] + world.joint_limits(j)[1])).collect();
    // Joint 0 is the hip with limits [-1.6, 1.2].
    reference[0] = 0.5;
    let mut a = vec![0.0; n];
    assert_eq!(apply_action(world, &cfg, &a, &reference).unwrap(), reference);
    a[0] = 0.2;
    assert!((apply_action(world, &cfg, &a, &reference).unwrap()[0] - 0.6).abs() < 1e-15);

    let [_, hi] = world.joint_limits(0);
    let near = vec![hi - 0.2; n];
    a[0] = 1.0;
    assert_eq!(apply_action(world, &cfg, &a, &near).unwrap()[0], hi);
    a[0] = 50.0;
    assert_eq!(apply_action(world, &cfg, &a, &near).unwrap()[0], hi);

    let non_residual = EnvConfig {
        use_residual_action: false,
        ..cfg.clone()
    };
    a[0] = 0.2;
    let t = apply_action(world, &non_residual, &a, &reference).unwrap();
    assert!((t[0] - (world.robot.joints[0].default_pos + 0.1)).abs() < 1e-15);

    a[1] = f64::NAN;
    assert_eq!(apply_action(world, &cfg, &a, &reference), Err(EnvError::NonFiniteAction));
    assert_eq!(
        apply_action(world, &cfg, &a[..2], &reference),
        Err(EnvError::ActionDim { expected: n, actual: 2 })
    );
}

#[test]
fn zero_action_commands_the_reference_on_every_task() {
    for id in COTRACK_TASKS {
        let mut env = env_for(id, EnvConfig::default());
        let zero = vec![0.0; env.act_dim()];
        for seed in 0..3 {
            env.reset(seed);
            loop {
                let t = env.step(&zero).unwrap();
                let want = env.track().sample(t.phase).unwrap().frame.joint_pos;
                assert_eq!(t.joint_targets, want, "{id} step {}", env.steps());
                if t.termination.terminated {
                    break;
                }
            }
        }
    }
}

#[test]
fn phase_advances_by_control_dt_over_duration() {
    let mut env = env_for("push_box", EnvConfig::default());
    env.reset_eval(0);
    let dur = env.track().duration();
    let dt = env.config().control_dt();
    let zero = vec![0.0; env.act_dim()];
    for k in 1..=20u64 {
        let t = env.step(&zero).unwrap();
        assert!((t.phase - (k as f64 * dt / dur).min(1.0)).abs() < 1e-12);
    }
}

#[test]
fn zero_residual_replays_clean_push_box() {
    // Seeds differ through domain randomisation only.
    let mut env = env_for("push_box", EnvConfig::default());
    let zero = vec![0.0; env.act_dim()];
    let mut long = 0;
    for seed in 0..10 {
        env.reset_with(seed, ResetMode {
            phase: Some(0.0),
            perturb: false,
            randomize: true,
        })
        .unwrap();
        while !env.step(&zero).unwrap().termination.terminated {}
        if env.steps() >= 100 {
            long += 1;
        }
    }
    assert!(long >= 8, "{long}/10 episodes lasted 100 steps");
}

#[test]
fn same_seed_gives_identical_rollouts() {
    let run = || {
        let mut env = env_for("kneel_lift", EnvConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut out = vec![env.reset(42)];
        for _ in 0..40 {
            let a: Vec<f64> = (0..env.act_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = env.step(&a).unwrap();
            out.push(t.obs.clone());
            out.push(vec![t.reward]);
            if t.termination.terminated {
                env.reset(7);
            }
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn stepping_after_termination_is_an_error() {
    let mut env = env_for("push_box", EnvConfig::default());
    env.reset_eval(0);
    let wild = vec![1.0; env.act_dim()];
    loop {
        if env.step(&wild).unwrap().termination.terminated {
            break;
        }
    }
    assert_eq!(env.step(&wild), Err(EnvError::Terminated));
    env.reset_eval(0);
    assert!(env.step(&wild).is_ok());
}

#[test]
fn reward_total_is_weighted_sum() {
    let mut env = env_for("push_box", EnvConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    env.reset(1);
    for _ in 0..100 {
        let a: Vec<f64> = (0..env.act_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (t, b) = env.step_detailed(&a).unwrap();
        let sum: f64 = b.terms().iter().map(|x| x.weighted).sum();
        assert!((b.total - sum).abs() < 1e-12);
        assert_eq!(t.reward, b.total);
        if t.termination.terminated {
            env.reset(rng.gen());
        }
    }
}

#[test]
fn reward_weights_follow_the_table() {
    let w = RewardWeights::default();
    assert_eq!(w.interaction, 5.0);
    assert_eq!(w.object_pose, 2.0);
    assert_eq!(w.body_local_pose, 2.0);
    let off = EnvConfig {
        use_interaction_reward: false,
        ..Default::default()
    };
    let mut env = env_for("push_box", off);
    env.reset_eval(0);
    let (_, b) = env.step_detailed(&vec![0.0; env.act_dim()]).unwrap();
    assert_eq!(b.interaction.weighted, 0.0);
}

fn zero_noise_cfg() -> EnvConfig {
    let mut cfg = EnvConfig::default();
    cfg.rsi = cfg.rsi.zero_noise();
    cfg.dr.enabled = false;
    cfg
}

#[test]
fn zero_noise_reset_lands_on_the_reference() {
    let mut env = env_for("push_box", zero_noise_cfg());
    for seed in 0..5 {
        env.reset(seed);
        let sample = env.track().sample(env.phase()).unwrap();
        let f = &sample.frame;
        let s = env.state();
        assert!(s.root().pose.pos.distance(f.robot_root_pos) < 1e-12);
        assert!((s.root().pose.angle - f.robot_root_ori).abs() < 1e-12);
        for (q, r) in s.joint_pos.iter().zip(&f.joint_pos) {
            assert!((q - r).abs() < 1e-12);
        }
        assert!(s.object(env.world()).pose.pos.distance(f.object_pos) < 1e-12);

        let e = pose_errors(env.world(), s, &sample);
        assert!(e.joint_mean < 1e-12 && e.root_pos < 1e-12 && e.object_pos < 1e-12, "{e:?}");
        // Reference body poses are interpolated between frames, not
        // recomputed from interpolated joints.
        assert!(e.body_local_max < 1e-4, "{e:?}");
        let mut feet = vec![FootState::default(); env.world().foot_ids().len()];
        let report = ContactReport {
            contacts: vec![],
            dt: env.config().control_dt(),
        };
        let zero = vec![0.0; env.act_dim()];
        let b = compute_reward(
            env.world(),
            s,
            &sample,
            RewardInputs {
                report: &report,
                prev_action: &zero,
                action: &zero,
                feet: &mut feet,
                ref_foot_swing: &[],
            },
            env.config(),
        )
        .unwrap();
        for term in [b.root_global_pose, b.joint_tracking, b.object_pose] {
            assert!((term.raw - 1.0).abs() < 1e-11, "{term:?}");
        }
        assert!((b.body_local_pose.raw - 1.0).abs() < 1e-3);
        assert_eq!(b.action_rate.raw, 0.0);

        let mut off = s.clone();
        for (q, r) in off.joint_pos.iter_mut().zip(&f.joint_pos) {
            *q = r + 0.1;
        }
        let b = compute_reward(
            env.world(),
            &off,
            &sample,
            RewardInputs {
                report: &report,
                prev_action: &zero,
                action: &zero,
                feet: &mut feet,
                ref_foot_swing: &[],
            },
            env.config(),
        )
        .unwrap();
        assert!((b.joint_tracking.raw - f64::exp(-0.1 / 0.5)).abs() < 1e-12);
        assert!((b.joint_tracking.raw - 0.8187).abs() < 1e-4);
    }
}

#[test]
fn reset_is_seeded() {
    let mut a = env_for("kneel_lift", EnvConfig::default());
    let mut b = env_for("kneel_lift", EnvConfig::default());
    assert_eq!(a.reset(9), b.reset(9));
    assert_eq!(a.state(), b.state());
    assert_ne!(a.reset(10), b.reset(11));
}

#[test]
fn start_phase_is_uniform() {
    let mut env = env_for("push_box", EnvConfig::default());
    let max = env.config().rsi.phase_max;
    let mut phases: Vec<f64> = (0..10_000u64)
        .map(|s| {
            env.reset(s);
            env.phase()
        })
        .collect();
    phases.sort_by(f64::total_cmp);
    let n = phases.len() as f64;
    let d = phases
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let cdf = p / max;
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Asymptotic KS critical value at p = 0.01.
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    assert!(phases[0] >= 0.0 && phases[phases.len() - 1] <= max);
}

fn with_gravity(world: &WorldModel, angle: f64) -> WorldModel {
    let mut w = world.clone();
    w.settings.gravity = w.settings.gravity.rotate(angle);
    w
}

#[test]
fn observation_frame_examples() {
    let mut env = env_for("push_box", zero_noise_cfg());
    env.reset_eval(0);
    let world = env.world().clone();
    let frame = env.track().sample(0.0).unwrap().frame;
    let prev = vec![0.0; env.act_dim()];
    let mut s = env.state().clone();
    let ob = world.object_body();
    s.bodies[0].pose = Pose2::new(Vec2::ZERO, 0.0);
    s.bodies[ob].pose = Pose2::new(Vec2::new(1.0, 0.0), 0.0);
    let o = build_observation(&world, &s, &frame, &prev, 0.0);
    assert!(o.object_pos_root.distance(Vec2::new(1.0, 0.0)) < 1e-15);

    s.bodies[0].pose = Pose2::new(Vec2::new(2.0, 1.0), PI / 2.0);
    s.bodies[ob].pose = Pose2::new(Vec2::new(3.0, 1.0), 0.0);
    let o = build_observation(&world, &s, &frame, &prev, 0.0);
    assert!(o.object_pos_root.distance(Vec2::new(0.0, -1.0)) < 1e-12);

    let base = build_observation(&world, env.state(), &frame, &prev, 0.0).to_vec();
    let shifted = env.state().transformed(&Se2::new(0.0, Vec2::new(5.0, 3.0)));
    let moved = build_observation(&world, &shifted, &frame, &prev, 0.0).to_vec();
    for (a, b) in base.iter().zip(&moved) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(base.len(), env.obs_dim());
}

fn scene_after(id: &str, seed: u64, steps: usize) -> (CoTrackEnv, Vec<f64>) {
    let mut env = env_for(id, EnvConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    env.reset(seed);
    let mut prev = vec![0.0; env.act_dim()];
    for _ in 0..steps {
        let a: Vec<f64> = (0..env.act_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if env.step(&a).unwrap().termination.terminated {
            break;
        }
        prev = a;
    }
    (env, prev)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn observation_is_invariant_to_rigid_motion(
        task in 0usize..3, seed in 0u64..1000, angle in -PI..PI, tx in -10.0f64..10.0, tz in -10.0f64..10.0,
    ) {
        let (env, prev) = scene_after(COTRACK_TASKS[task], seed, 8);
        let frame = env.track().sample(env.phase()).unwrap().frame;
        let base = build_observation(env.world(), env.state(), &frame, &prev, env.phase()).to_vec();
        let t = Se2::new(angle, Vec2::new(tx, tz));
        let world = with_gravity(env.world(), angle);
        let moved = build_observation(&world, &env.state().transformed(&t), &frame, &prev, env.phase()).to_vec();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }
}

#[test]
fn env_config_validation_names_the_field() {
    let bad = EnvConfig {
        sigma_frc: 0.0,
        ..Default::default()
    };
    match bad.validate() {
        Err(EnvError::Config { field, .. }) => assert!(field.contains("sigma_frc")),
        other => panic!("{other:?}"),
    }
    let task = cotrack("push_box");
    let track = ReferenceTrack::new(task.motion.clone(), &task.world).unwrap();
    assert!(CoTrackEnv::new(task.world.clone(), Arc::new(track), Arc::new(bad)).is_err());
}

#[test]
fn point_mass_pd_oracle_tracks_target() {
    let mut env = PointMassEnv::new(PointMassConfig::default());
    let mut obs = env.reset_eval(0);
    let max = env.config().max_accel;
    let mut total = 0.0;
    loop {
        let a = PointMassEnv::pd_action(&obs, max);
        let t = env.step(&[a]).unwrap();
        total += t.reward;
        obs = t.obs;
        if t.termination.terminated {
            assert_eq!(t.termination.reason, TerminationReason::MotionEnd);
            break;
        }
    }
    assert!(total > 0.0);
}
