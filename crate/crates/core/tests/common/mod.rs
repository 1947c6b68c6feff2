#![allow(dead_code)]

use cotrack_core::math::{Pose2, Vec2};
use cotrack_core::sim::*;

pub fn body(name: &str, shape: Shape, mass: f64) -> BodySpec {
    let inertia = match shape {
        Shape::Circle { radius } => disc_inertia(mass, radius),
        Shape::Box { half_extents } => box_inertia(mass, half_extents),
    };
    BodySpec {
        name: name.into(),
        shape,
        mass,
        inertia,
        friction: 0.8,
        restitution: 0.0,
    }
}

pub fn boxed(hx: f64, hz: f64) -> Shape {
    Shape::Box {
        half_extents: Vec2::new(hx, hz),
    }
}

pub fn joint(name: &str, parent: &str, child: &str, anchor: Vec2, child_anchor: Vec2) -> JointSpec {
    JointSpec {
        name: name.into(),
        parent: parent.into(),
        child: child.into(),
        anchor,
        child_anchor,
        limits: [-2.0, 2.0],
        torque_limit: 100.0,
        kp: 200.0,
        kd: 5.0,
        default_pos: 0.0,
    }
}

/// Base plus a four-link chain hanging downward: two legs of two links.
pub fn chain_robot() -> RobotModel {
    RobotModel {
        model_version: MODEL_VERSION,
        name: "chain".into(),
        base: body("base", boxed(0.1, 0.1), 5.0),
        links: vec![
            body("l_thigh", boxed(0.03, 0.1), 1.0),
            body("l_shin", boxed(0.03, 0.1), 1.0),
            body("r_thigh", boxed(0.03, 0.1), 1.0),
            body("r_shin", boxed(0.03, 0.1), 1.0),
        ],
        joints: vec![
            joint("l_hip", "base", "l_thigh", Vec2::new(-0.05, -0.1), Vec2::new(0.0, 0.1)),
            joint("l_knee", "l_thigh", "l_shin", Vec2::new(0.0, -0.1), Vec2::new(0.0, 0.1)),
            joint("r_hip", "base", "r_thigh", Vec2::new(0.05, -0.1), Vec2::new(0.0, 0.1)),
            joint("r_knee", "r_thigh", "r_shin", Vec2::new(0.0, -0.1), Vec2::new(0.0, 0.1)),
        ],
        eef_bodies: vec!["l_shin".into(), "r_shin".into()],
        feet: vec!["l_shin".into(), "r_shin".into()],
    }
}

pub fn free_box(mass: f64, at: Vec2) -> ObjectModel {
    ObjectModel {
        model_version: MODEL_VERSION,
        name: "crate".into(),
        kind: ObjectKind::Free,
        body: body("crate", boxed(0.2, 0.2), mass),
        contact_anchors: vec![ContactAnchor {
            id: "front".into(),
            offset: Vec2::new(-0.2, 0.0),
        }],
        initial_pose: Pose2::new(at, 0.0),
    }
}

pub fn fixed_platform(at: Vec2, half: Vec2) -> ObjectModel {
    ObjectModel {
        model_version: MODEL_VERSION,
        name: "platform".into(),
        kind: ObjectKind::Fixed,
        body: body("platform", Shape::Box { half_extents: half }, 1.0),
        contact_anchors: vec![],
        initial_pose: Pose2::new(at, 0.0),
    }
}

/// Point-like bob on a massless-rod hinge of length `len` below `anchor`.
pub fn pendulum(anchor: Vec2, len: f64) -> ObjectModel {
    let mut bob = body("bob", Shape::Circle { radius: 0.01 }, 1.0);
    bob.inertia = 1e-6;
    ObjectModel {
        model_version: MODEL_VERSION,
        name: "pendulum".into(),
        kind: ObjectKind::Hinged {
            anchor,
            local_anchor: Vec2::new(0.0, len),
            axis_limits: [-3.0, 3.0],
            damping: 0.0,
        },
        body: bob,
        contact_anchors: vec![],
        initial_pose: Pose2::default(),
    }
}

pub fn standing_root() -> Pose2 {
    Pose2::new(Vec2::new(0.0, 0.5), 0.0)
}

pub fn assets() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

pub fn load(id: &str) -> cotrack_core::tasks::Task {
    cotrack_core::tasks::load_task(&assets(), id).unwrap()
}

pub const COTRACK_TASKS: [&str; 3] = ["push_box", "kneel_lift", "door_hinge"];

/// Random valid keyframe script for `chain_robot` and `free_box`.
pub fn random_script(rng: &mut impl rand::Rng) -> cotrack_core::refmotion::KeyframeScript {
    use cotrack_core::refmotion::{ContactWindow, Interpolation, Keyframe, KeyframeScript};
    let n_keys = rng.gen_range(2..6);
    let mut t = 0.0;
    let keyframes: Vec<Keyframe> = (0..n_keys)
        .map(|k| {
            if k > 0 {
                t += rng.gen_range(0.2..1.0);
            }
            Keyframe {
                time: t,
                root_pos: Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.3..0.8)),
                root_ori: rng.gen_range(-3.0..3.0),
                joint_pos: (0..4).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                object_pos: Some(Vec2::new(rng.gen_range(0.0..2.0), 0.2)),
                object_ori: Some(rng.gen_range(-3.0..3.0)),
                object_joint: None,
            }
        })
        .collect();
    let contact_windows = (0..rng.gen_range(0..3))
        .map(|_| {
            let a = rng.gen_range(0.0..t);
            ContactWindow {
                eef: rng.gen_range(0..2),
                start: a,
                end: rng.gen_range(a..=t),
                anchor_id: "front".into(),
            }
        })
        .collect();
    KeyframeScript {
        name: format!("random_{}", rng.gen::<u32>()),
        robot_model_id: "chain".into(),
        object_model_id: "crate".into(),
        eef_count: 2,
        interpolation: if rng.gen() { Interpolation::Linear } else { Interpolation::Cubic },
        keyframes,
        contact_windows,
    }
}

pub fn random_motion(rng: &mut impl rand::Rng) -> cotrack_core::refmotion::ReferenceMotion {
    let script = random_script(rng);
    let rate = [10.0, 30.0, 50.0][rng.gen_range(0..3)];
    cotrack_core::refmotion::generate_from_keyframes(&script, rate, &free_box(3.0, Vec2::new(1.0, 0.2))).unwrap()
}

/// Hand-broken motion documents and the location each error must cite.
pub fn crafted_invalid_motions() -> Vec<(String, String, &'static str)> {
    use serde_json::{json, Value};
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(99);
    let mut base = random_motion(&mut rng);
    while base.frames.len() < 10 {
        base = random_motion(&mut rng);
    }
    let good: Value = serde_json::from_str(&base.to_json()).unwrap();
    let edit = |name: &str, loc: &'static str, f: &dyn Fn(&mut Value)| {
        let mut v = good.clone();
        f(&mut v);
        (name.to_string(), v.to_string(), loc)
    };
    let mut out = vec![
        ("truncated".to_string(), base.to_json()[..40].to_string(), "line"),
        ("not json".to_string(), "motion: yes".to_string(), "line"),
    ];
    out.push(edit("missing frames", "line", &|v| {
        v.as_object_mut().unwrap().remove("frames");
    }));
    out.push(edit("wrong version", "motion_version", &|v| v["motion_version"] = json!(2)));
    out.push(edit("zero rate", "frame_rate", &|v| v["frame_rate"] = json!(0.0)));
    out.push(edit("negative rate", "frame_rate", &|v| v["frame_rate"] = json!(-30.0)));
    out.push(edit("single frame", "frames", &|v| {
        let f = v["frames"][0].clone();
        v["frames"] = json!([f]);
    }));
    out.push(edit("short joint vector", "frames[7].joint_pos", &|v| {
        v["frames"][7]["joint_pos"].as_array_mut().unwrap().pop();
    }));
    out.push(edit("flag without anchor", "frames[3].contact_anchor_ids[0]", &|v| {
        v["frames"][3]["contact_flags"][0] = json!(1);
        v["frames"][3]["contact_anchor_ids"][0] = Value::Null;
    }));
    out.push(edit("non-binary flag", "frames[2].contact_flags[1]", &|v| v["frames"][2]["contact_flags"][1] = json!(2)));
    out.push(edit("flag count", "frames[5].contact_flags", &|v| {
        v["frames"][5]["contact_flags"].as_array_mut().unwrap().push(json!(0));
    }));
    out.push(edit("object joint in one frame", "frames[4].object_joint", &|v| v["frames"][4]["object_joint"] = json!(0.1)));
    out.push(edit("string angle", "line", &|v| v["frames"][1]["robot_root_ori"] = json!("x")));
    out.push(edit("string joint", "line", &|v| v["frames"][1]["joint_pos"][0] = json!("0.3")));
    out.push(("huge value".to_string(), good.to_string().replacen("\"frame_rate\":", "\"frame_rate\":1e999,\"x\":", 1), "line"));
    out
}
