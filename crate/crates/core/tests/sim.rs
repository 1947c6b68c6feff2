mod common;

use std::f64::consts::PI;

use common::*;
use cotrack_core::math::{Pose2, Vec2};
use cotrack_core::sim::*;

fn far_object_world() -> WorldModel {
    build_world(chain_robot(), free_box(2.0, Vec2::new(50.0, 10.0)), 0.8).unwrap()
}

#[test]
fn world_counts() {
    let w = far_object_world();
    assert_eq!(w.dynamic_body_count(), 6);
    assert_eq!(w.joint_count(), 4);
    assert_eq!(w.object_joint_count(), 0);

    let hinged = build_world(chain_robot(), pendulum(Vec2::new(3.0, 2.0), 0.5), 0.8).unwrap();
    assert_eq!(hinged.object_joint_count(), 1);
    let s = SimState::rest(&hinged, standing_root());
    assert_eq!(s.object_joint_pos, Some(0.0));
}

#[test]
fn self_joint_is_rejected_with_field() {
    let mut robot = chain_robot();
    robot.joints[1].child = robot.joints[1].parent.clone();
    let err = build_world(robot, free_box(1.0, Vec2::ZERO), 0.8).unwrap_err();
    match err {
        SimError::Invalid { field, .. } => assert_eq!(field, "robot.joints[1].child"),
        e => panic!("unexpected {e:?}"),
    }

    let mut robot = chain_robot();
    robot.links[2].mass = 0.0;
    let err = build_world(robot, free_box(1.0, Vec2::ZERO), 0.8).unwrap_err();
    assert!(err.to_string().contains("robot.links[2].mass"), "{err}");
}

#[test]
fn ballistic_matches_discrete_closed_form() {
    let w = far_object_world();
    let mut s = SimState::rest(&w, standing_root());
    let obj = w.object_body();
    let z0 = s.bodies[obj].pose.pos.z;
    let targets = vec![0.0; 4];
    let dt = 0.1;
    let (next, _) = step(&w, &s, &targets, dt).unwrap();
    assert!((next.bodies[obj].vel.z + 0.981).abs() < 1e-12);
    assert!((next.bodies[obj].pose.pos.z - z0 + 0.0981).abs() < 1e-12);

    let (mut v, mut z) = (0.0, z0);
    for _ in 0..10 {
        step_in_place(&w, &mut s, &targets, dt).unwrap();
        v += -9.81 * dt;
        z += v * dt;
        assert!((s.bodies[obj].vel.z - v).abs() < 1e-12);
        assert!((s.bodies[obj].pose.pos.z - z).abs() < 1e-12);
        assert_eq!(s.bodies[obj].pose.pos.x, 50.0);
    }
}

#[test]
fn inertial_motion_without_gravity() {
    let settings = SimSettings {
        gravity: Vec2::ZERO,
        ..SimSettings::default()
    };
    let w = far_object_world().with_settings(settings);
    let mut s = SimState::rest(&w, standing_root());
    let obj = w.object_body();
    s.bodies[obj].vel = Vec2::new(1.0, 0.0);
    let before = s.bodies[obj].pose;
    step_in_place(&w, &mut s, &[0.0; 4], 0.01).unwrap();
    assert_eq!(s.bodies[obj].pose.pos.x, before.pos.x + 0.01);
    assert_eq!(s.bodies[obj].pose.pos.z, before.pos.z);
    assert_eq!(s.bodies[obj].pose.angle, before.angle);
}

#[test]
fn pendulum_period_matches_small_angle_oracle() {
    let len = 0.5;
    let settings = SimSettings {
        ground_enabled: false,
        ..SimSettings::default()
    };
    let w = build_world(chain_robot(), pendulum(Vec2::new(40.0, 5.0), len), 0.8)
        .unwrap()
        .with_settings(settings);
    let robot = RobotConfiguration::at_rest(standing_root(), vec![0.0; 4]);
    let object = ObjectConfiguration {
        joint: 0.05,
        ..Default::default()
    };
    let mut s = SimState::from_configuration(&w, &robot, &object).unwrap();
    let dt = 1.0 / 120.0;
    let mut crossings = Vec::new();
    let mut prev = s.object_joint_pos.unwrap();
    while crossings.len() < 21 && s.time < 30.0 {
        step_in_place(&w, &mut s, &[0.0; 4], dt).unwrap();
        let q = s.object_joint_pos.unwrap();
        if prev > 0.0 && q <= 0.0 || prev < 0.0 && q >= 0.0 {
            // Linear interpolation of the zero crossing time.
            crossings.push(s.time - dt * q / (q - prev));
        }
        prev = q;
    }
    assert_eq!(crossings.len(), 21);
    let period = (crossings[20] - crossings[0]) / 10.0;
    let oracle = 2.0 * PI * (len / 9.81).sqrt();
    assert!(((period - oracle) / oracle).abs() < 0.02, "period {period} vs {oracle}");
}

#[test]
fn momentum_conserved_without_gravity_or_contacts() {
    let settings = SimSettings {
        gravity: Vec2::ZERO,
        contacts_enabled: false,
        ..SimSettings::default()
    };
    let mut robot = chain_robot();
    for j in &mut robot.joints {
        j.kp = 0.0;
        j.kd = 0.0;
    }
    let w = build_world(robot, free_box(2.0, Vec2::new(0.3, 0.2)), 0.8)
        .unwrap()
        .with_settings(settings);
    let cfg = RobotConfiguration {
        root: standing_root(),
        root_vel: Vec2::new(0.4, -0.2),
        root_ang_vel: 1.5,
        joint_pos: vec![0.3, -0.4, 1.9, 0.2],
        joint_vel: vec![3.0, -2.0, 4.0, 1.0],
    };
    let object = ObjectConfiguration {
        pose: Pose2::new(Vec2::new(0.3, 0.2), 0.0),
        vel: Vec2::new(-1.0, 0.5),
        ..Default::default()
    };
    let mut s = SimState::from_configuration(&w, &cfg, &object).unwrap();
    let mut p = s.linear_momentum(&w);
    for _ in 0..500 {
        step_in_place(&w, &mut s, &[0.0; 4], 1.0 / 120.0).unwrap();
        let q = s.linear_momentum(&w);
        assert!((q - p).length() <= 1e-9, "{p:?} -> {q:?}");
        p = q;
    }
}

fn drop_scene() -> (WorldModel, SimState) {
    let w = build_world(chain_robot(), free_box(2.0, Vec2::new(0.6, 0.5)), 0.8).unwrap();
    let robot = RobotConfiguration::at_rest(Pose2::new(Vec2::new(0.0, 0.55), 0.05), vec![0.2, -0.3, -0.2, 0.3]);
    let object = ObjectConfiguration {
        pose: Pose2::new(Vec2::new(0.45, 0.5), 0.3),
        ..Default::default()
    };
    let s = SimState::from_configuration(&w, &robot, &object).unwrap();
    (w, s)
}

#[test]
fn bit_identical_reruns() {
    let run = || {
        let (w, mut s) = drop_scene();
        let mut trace = Vec::new();
        for k in 0..300 {
            let t = 0.3 * (k as f64 * 0.05).sin();
            step_in_place(&w, &mut s, &[t, -t, -t, t], 1.0 / 120.0).unwrap();
            trace.push(s.clone());
        }
        trace
    };
    assert_eq!(run(), run());
}

#[test]
fn resting_contacts_stay_within_slop() {
    let (w, mut s) = drop_scene();
    for _ in 0..480 {
        step_in_place(&w, &mut s, &[0.2, -0.3, -0.2, 0.3], 1.0 / 120.0).unwrap();
    }
    let slop = w.settings.slop;
    for (id, def) in w.bodies().iter().enumerate() {
        let pose = s.bodies[id].pose;
        let lowest = match def.shape {
            Shape::Circle { radius } => pose.pos.z - radius,
            Shape::Box { half_extents: h } => [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                .iter()
                .map(|&(sx, sz)| pose.transform_point(Vec2::new(sx * h.x, sz * h.z)).z)
                .fold(f64::INFINITY, f64::min),
        };
        assert!(lowest >= -2.0 * slop, "{} penetrates {}", def.name, -lowest);
    }
}

#[test]
fn torque_and_joint_limits_hold() {
    let mut robot = chain_robot();
    for j in &mut robot.joints {
        j.kp = 5000.0;
        j.torque_limit = 15.0;
        j.limits = [-0.5, 0.5];
    }
    let w = build_world(robot, free_box(2.0, Vec2::new(0.45, 0.2)), 0.8).unwrap();
    let mut s = SimState::rest(&w, standing_root());
    for k in 0..600 {
        let t = if (k / 60) % 2 == 0 { 3.0 } else { -3.0 };
        step_in_place(&w, &mut s, &[t, -t, t, -t], 1.0 / 120.0).unwrap();
        for (j, &tau) in s.joint_torque.iter().enumerate() {
            assert!(tau.abs() <= 15.0, "joint {j} torque {tau}");
            let q = s.joint_pos[j];
            assert!((-0.5 - 1e-6..=0.5 + 1e-6).contains(&q), "joint {j} at {q}");
        }
    }
}

#[test]
fn nan_targets_rejected_before_integration() {
    let w = far_object_world();
    let s = SimState::rest(&w, standing_root());
    let mut t = s.clone();
    assert!(matches!(
        step_in_place(&w, &mut t, &[0.0, f64::NAN, 0.0, 0.0], 0.01),
        Err(SimError::NonFinite(_))
    ));
    assert_eq!(t, s);
    assert!(matches!(step(&w, &s, &[0.0; 3], 0.01), Err(SimError::Dimension { .. })));
}

#[test]
fn kinematics_zero_configuration_and_translation() {
    let w = far_object_world();
    let poses = w.forward_kinematics(Pose2::default(), &[0.0; 4]);
    let expect = [
        (0.0, 0.0),
        (-0.05, -0.2),
        (-0.05, -0.4),
        (0.05, -0.2),
        (0.05, -0.4),
    ];
    for (p, e) in poses.iter().zip(expect) {
        assert!((p.pos.x - e.0).abs() < 1e-15 && (p.pos.z - e.1).abs() < 1e-15, "{p:?}");
        assert_eq!(p.angle, 0.0);
    }
    let moved = w.forward_kinematics(Pose2::new(Vec2::new(2.0, 1.0), 0.0), &[0.3, -0.2, 0.1, 0.4]);
    let base = w.forward_kinematics(Pose2::default(), &[0.3, -0.2, 0.1, 0.4]);
    for (a, b) in moved.iter().zip(&base) {
        assert!((a.pos - b.pos - Vec2::new(2.0, 1.0)).length() < 1e-14);
    }
    let s = SimState::rest(&w, Pose2::new(Vec2::new(2.0, 1.0), 0.0));
    let p = body_pose_by_name(&w, &s, "r_shin").unwrap();
    assert!((p.pos - Vec2::new(2.05, 0.6)).length() < 1e-14);
    assert!(matches!(body_pose(&w, &s, 99), Err(SimError::UnknownBody(_))));
}

#[test]
fn quarter_turn_joint_about_anchor() {
    let robot = RobotModel {
        model_version: MODEL_VERSION,
        name: "arm".into(),
        base: body("base", boxed(0.1, 0.1), 1.0),
        links: vec![body("link", boxed(0.2, 0.02), 1.0)],
        joints: vec![joint("j", "base", "link", Vec2::new(0.3, 0.0), Vec2::new(-0.2, 0.0))],
        eef_bodies: vec!["link".into()],
        feet: vec![],
    };
    let w = build_world(robot, free_box(1.0, Vec2::new(9.0, 9.0)), 0.5).unwrap();
    let poses = w.forward_kinematics(Pose2::default(), &[PI / 2.0]);
    // Pivot at (0.3, 0); the link centre sits 0.2 along the rotated x axis.
    assert!((poses[1].pos - Vec2::new(0.3, 0.2)).length() < 1e-15, "{:?}", poses[1]);
    assert!((poses[1].angle - PI / 2.0).abs() < 1e-15);
}

#[test]
fn randomization_scales_and_clamps() {
    let w = build_world(chain_robot(), free_box(2.0, Vec2::new(1.0, 0.2)), 0.8).unwrap();
    let same = apply_randomization(&w, &vec![BodyScale::IDENTITY; w.body_count()]).unwrap();
    assert_eq!(same.bodies(), w.bodies());
    assert_eq!(same.object, w.object);

    let mut scales = vec![BodyScale::IDENTITY; w.body_count()];
    let obj = w.object_body();
    scales[obj] = BodyScale {
        mass_scale: 1.2,
        inertia_scale: 1.0,
        friction_scale: 0.5,
    };
    scales[0].friction_scale = 4.0;
    let r = apply_randomization(&w, &scales).unwrap();
    assert!((r.bodies()[obj].mass - 2.4).abs() < 1e-12);
    assert!((r.bodies()[obj].friction - 0.4).abs() < 1e-12);
    assert_eq!(r.bodies()[0].friction, 2.0);
    assert_eq!(w.bodies()[obj].mass, 2.0);

    scales[1].mass_scale = 0.0;
    assert!(apply_randomization(&w, &scales).is_err());
}

#[test]
fn eef_static_force_matches_supported_weight() {
    let mut hand = body("hand", boxed(0.15, 0.03), 2.0);
    hand.friction = 1.0;
    let mut j = joint("wrist", "base", "hand", Vec2::new(0.0, -0.1), Vec2::new(0.0, 0.03));
    j.kp = 2000.0;
    j.kd = 50.0;
    j.limits = [-0.5, 0.5];
    let robot = RobotModel {
        model_version: MODEL_VERSION,
        name: "stand".into(),
        base: body("base", boxed(0.05, 0.1), 1.0),
        links: vec![hand],
        joints: vec![j],
        eef_bodies: vec!["hand".into()],
        feet: vec![],
    };
    let top = 0.5;
    let w = build_world(robot, fixed_platform(Vec2::new(0.0, top - 0.1), Vec2::new(0.4, 0.1)), 0.8).unwrap();
    let root = Pose2::new(Vec2::new(0.0, top + 0.06 + 0.1), 0.0);
    let mut s = SimState::rest(&w, root);
    let hand_id = w.body_id("hand").unwrap();
    let mut report = ContactReport::default();
    for _ in 0..240 {
        report = step_in_place(&w, &mut s, &[0.0], 1.0 / 120.0).unwrap();
    }
    let f = eef_contact_force(&report, &w, hand_id, w.object_body());
    let weight = 3.0 * 9.81;
    assert!(((f - weight) / weight).abs() < 0.05, "force {f} vs weight {weight}");
    assert_eq!(eef_contact_force(&report, &w, 0, w.object_body()), 0.0);
}
