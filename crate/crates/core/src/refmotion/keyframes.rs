//! Scripted keyframe source for reference motions.

use serde::{Deserialize, Serialize};

use super::{invalid, MotionError, ReferenceFrame, ReferenceMotion};
use crate::math::{angle_diff, wrap_angle, Vec2};
use crate::sim::{ObjectKind, ObjectModel};

const WINDOW_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Catmull–Rom through the keyframes.
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub time: f64,
    pub root_pos: Vec2,
    pub root_ori: f64,
    pub joint_pos: Vec<f64>,
    /// Required for free objects; derived for hinged and fixed ones.
    #[serde(default)]
    pub object_pos: Option<Vec2>,
    #[serde(default)]
    pub object_ori: Option<f64>,
    /// Required for hinged objects.
    #[serde(default)]
    pub object_joint: Option<f64>,
}

/// Closed interval of script time during which end-effector `eef` should
/// touch anchor `anchor_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactWindow {
    pub eef: usize,
    pub start: f64,
    pub end: f64,
    pub anchor_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeScript {
    pub name: String,
    pub robot_model_id: String,
    pub object_model_id: String,
    pub eef_count: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    pub keyframes: Vec<Keyframe>,
    #[serde(default)]
    pub contact_windows: Vec<ContactWindow>,
}

impl KeyframeScript {
    pub fn duration(&self) -> f64 {
        match (self.keyframes.first(), self.keyframes.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }

    pub fn validate(&self, object: &ObjectModel) -> Result<(), MotionError> {
        if self.keyframes.is_empty() {
            return Err(invalid("keyframes", "script has no keyframes"));
        }
        let n_joints = self.keyframes[0].joint_pos.len();
        for (k, kf) in self.keyframes.iter().enumerate() {
            let path = |f: &str| format!("keyframes[{k}].{f}");
            if !kf.time.is_finite() {
                return Err(invalid(path("time"), "non-finite"));
            }
            if k > 0 && !(kf.time > self.keyframes[k - 1].time) {
                return Err(invalid(path("time"), "keyframe times must be strictly increasing"));
            }
            if kf.joint_pos.len() != n_joints {
                return Err(invalid(path("joint_pos"), format!("expected {n_joints} entries, got {}", kf.joint_pos.len())));
            }
            match object.kind {
                ObjectKind::Free if kf.object_pos.is_none() || kf.object_ori.is_none() => {
                    return Err(invalid(path("object_pos"), "free objects need object_pos and object_ori"));
                }
                ObjectKind::Hinged { .. } if kf.object_joint.is_none() => {
                    return Err(invalid(path("object_joint"), "hinged objects need object_joint"));
                }
                _ => {}
            }
        }
        let t0 = self.keyframes[0].time;
        let t1 = self.keyframes[self.keyframes.len() - 1].time;
        for (i, w) in self.contact_windows.iter().enumerate() {
            let path = |f: &str| format!("contact_windows[{i}].{f}");
            if w.eef >= self.eef_count {
                return Err(invalid(path("eef"), format!("index {} but script has {} end-effectors", w.eef, self.eef_count)));
            }
            if !(w.start <= w.end) || w.start < t0 - WINDOW_EPS || w.end > t1 + WINDOW_EPS {
                return Err(invalid(path("start"), format!("window [{}, {}] not within [{t0}, {t1}]", w.start, w.end)));
            }
            if object.anchor(&w.anchor_id).is_none() {
                return Err(invalid(path("anchor_id"), format!("unknown anchor '{}'", w.anchor_id)));
            }
        }
        Ok(())
    }
}

/// Samples `script` at `rate` Hz from its first keyframe to its last.
pub fn generate_from_keyframes(
    script: &KeyframeScript,
    rate: f64,
    object: &ObjectModel,
) -> Result<ReferenceMotion, MotionError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid("rate", "must be finite and > 0"));
    }
    script.validate(object)?;
    let kfs = &script.keyframes;
    let t0 = kfs[0].time;
    let n_frames = (script.duration() * rate + 1e-9).floor() as usize + 1;
    if n_frames < 2 {
        return Err(invalid("keyframes", "script is shorter than one frame interval"));
    }
    let times: Vec<f64> = kfs.iter().map(|k| k.time).collect();
    let interp = |values: &[f64], t: f64| interpolate(&times, values, t, script.interpolation);
    let unwrapped = |angles: Vec<f64>| -> Vec<f64> {
        let mut out = Vec::with_capacity(angles.len());
        for (i, &a) in angles.iter().enumerate() {
            out.push(if i == 0 { a } else { out[i - 1] + angle_diff(a, angles[i - 1]) });
        }
        out
    };

    let channel = |f: &dyn Fn(&Keyframe) -> f64| kfs.iter().map(f).collect::<Vec<f64>>();
    let root_x = channel(&|k| k.root_pos.x);
    let root_z = channel(&|k| k.root_pos.z);
    let root_ori = unwrapped(channel(&|k| k.root_ori));
    let joints: Vec<Vec<f64>> = (0..kfs[0].joint_pos.len())
        .map(|j| channel(&|k| k.joint_pos[j]))
        .collect();
    let obj_x = channel(&|k| k.object_pos.map_or(0.0, |p| p.x));
    let obj_z = channel(&|k| k.object_pos.map_or(0.0, |p| p.z));
    let obj_ori = unwrapped(channel(&|k| k.object_ori.unwrap_or(0.0)));
    let obj_joint = channel(&|k| k.object_joint.unwrap_or(0.0));

    let mut frames = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let t = t0 + k as f64 / rate;
        let (object_pos, object_ori, object_joint) = match object.kind {
            ObjectKind::Free => (
                Vec2::new(interp(&obj_x, t), interp(&obj_z, t)),
                wrap_angle(interp(&obj_ori, t)),
                None,
            ),
            ObjectKind::Hinged { axis_limits, .. } => {
                let q = interp(&obj_joint, t).clamp(axis_limits[0], axis_limits[1]);
                let pose = object.hinged_pose(q).expect("hinged");
                (pose.pos, wrap_angle(pose.angle), Some(q))
            }
            ObjectKind::Fixed => (object.initial_pose.pos, wrap_angle(object.initial_pose.angle), None),
        };
        let mut flags = vec![0u8; script.eef_count];
        let mut anchors = vec![None; script.eef_count];
        for w in &script.contact_windows {
            if anchors[w.eef].is_none() && t >= w.start - WINDOW_EPS && t <= w.end + WINDOW_EPS {
                flags[w.eef] = 1;
                anchors[w.eef] = Some(w.anchor_id.clone());
            }
        }
        frames.push(ReferenceFrame {
            robot_root_pos: Vec2::new(interp(&root_x, t), interp(&root_z, t)),
            robot_root_ori: wrap_angle(interp(&root_ori, t)),
            joint_pos: joints.iter().map(|c| interp(c, t)).collect(),
            object_pos,
            object_ori,
            object_joint,
            contact_flags: flags,
            contact_anchor_ids: anchors,
        });
    }
    let motion = ReferenceMotion::new(
        script.name.clone(),
        script.robot_model_id.clone(),
        script.object_model_id.clone(),
        rate,
        frames,
    );
    motion.validate()?;
    Ok(motion)
}

fn interpolate(times: &[f64], values: &[f64], t: f64, mode: Interpolation) -> f64 {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return values[0];
    }
    if t >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&x| x <= t) - 1;
    let (ta, tb) = (times[i], times[i + 1]);
    let h = tb - ta;
    let s = (t - ta) / h;
    let (a, b) = (values[i], values[i + 1]);
    match mode {
        Interpolation::Linear => a + (b - a) * s,
        Interpolation::Cubic => {
            let slope = |k: usize| {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(n - 1);
                (values[hi] - values[lo]) / (times[hi] - times[lo])
            };
            let (ma, mb) = (slope(i) * h, slope(i + 1) * h);
            let s2 = s * s;
            let s3 = s2 * s;
            (2.0 * s3 - 3.0 * s2 + 1.0) * a
                + (s3 - 2.0 * s2 + s) * ma
                + (-2.0 * s3 + 3.0 * s2) * b
                + (s3 - s2) * mb
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Pose2;
    use crate::sim::{BodySpec, ContactAnchor, Shape, MODEL_VERSION};
    use std::f64::consts::PI;

    fn object() -> ObjectModel {
        ObjectModel {
            model_version: MODEL_VERSION,
            name: "box".into(),
            kind: ObjectKind::Free,
            body: BodySpec {
                name: "box".into(),
                shape: Shape::Circle { radius: 0.1 },
                mass: 1.0,
                inertia: 0.01,
                friction: 0.5,
                restitution: 0.0,
            },
            contact_anchors: vec![ContactAnchor {
                id: "side".into(),
                offset: Vec2::new(-0.1, 0.0),
            }],
            initial_pose: Pose2::default(),
        }
    }

    fn key(time: f64, x: f64, ori: f64) -> Keyframe {
        Keyframe {
            time,
            root_pos: Vec2::new(x, 1.0),
            root_ori: ori,
            joint_pos: vec![x],
            object_pos: Some(Vec2::new(x, 0.0)),
            object_ori: Some(ori),
            object_joint: None,
        }
    }

    fn script(keys: Vec<Keyframe>) -> KeyframeScript {
        KeyframeScript {
            name: "s".into(),
            robot_model_id: "r".into(),
            object_model_id: "box".into(),
            eef_count: 1,
            interpolation: Interpolation::Linear,
            keyframes: keys,
            contact_windows: vec![],
        }
    }

    #[test]
    fn linear_midpoint_and_frame_count() {
        let m = generate_from_keyframes(&script(vec![key(0.0, 0.0, 0.0), key(1.0, 1.0, 0.0)]), 10.0, &object()).unwrap();
        assert_eq!(m.len(), 11);
        assert!((m.frames[5].robot_root_pos.x - 0.5).abs() < 1e-15);
        assert_eq!(m.frames[10].robot_root_pos.x, 1.0);
    }

    #[test]
    fn closed_contact_window() {
        let mut s = script(vec![key(0.0, 0.0, 0.0), key(1.0, 1.0, 0.0)]);
        s.contact_windows.push(ContactWindow {
            eef: 0,
            start: 0.4,
            end: 0.6,
            anchor_id: "side".into(),
        });
        let m = generate_from_keyframes(&s, 10.0, &object()).unwrap();
        let on: Vec<usize> = (0..m.len()).filter(|&k| m.frames[k].is_active(0)).collect();
        assert_eq!(on, vec![4, 5, 6]);
        assert_eq!(m.frames[5].contact_anchor_ids[0].as_deref(), Some("side"));
    }

    #[test]
    fn orientation_takes_short_arc() {
        let m = generate_from_keyframes(&script(vec![key(0.0, 0.0, -3.0), key(1.0, 1.0, 3.0)]), 10.0, &object()).unwrap();
        let mid = m.frames[5].robot_root_ori;
        assert!((mid.abs() - PI).abs() < 1e-9, "{mid}");
        let mid_obj = m.frames[5].object_ori;
        assert!((mid_obj.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn cubic_passes_through_keys() {
        let mut s = script(vec![key(0.0, 0.0, 0.0), key(0.5, 2.0, 0.0), key(1.0, 1.0, 0.0)]);
        s.interpolation = Interpolation::Cubic;
        let m = generate_from_keyframes(&s, 10.0, &object()).unwrap();
        assert!((m.frames[5].robot_root_pos.x - 2.0).abs() < 1e-12);
        assert!((m.frames[10].robot_root_pos.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn script_errors() {
        let empty = script(vec![]);
        assert!(generate_from_keyframes(&empty, 10.0, &object()).is_err());
        let mut s = script(vec![key(0.0, 0.0, 0.0), key(1.0, 1.0, 0.0)]);
        s.contact_windows.push(ContactWindow {
            eef: 0,
            start: 0.1,
            end: 0.2,
            anchor_id: "nope".into(),
        });
        let err = generate_from_keyframes(&s, 10.0, &object()).unwrap_err();
        assert!(err.to_string().contains("contact_windows[0].anchor_id"), "{err}");
        let s = script(vec![key(0.0, 0.0, 0.0), key(0.0, 1.0, 0.0)]);
        assert!(generate_from_keyframes(&s, 10.0, &object()).is_err());
    }
}
