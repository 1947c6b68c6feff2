//! Reference motions: per-frame robot state, object state and intended
//! contacts, stored as JSON documents with a `"motion_version": 1` field.

mod corrupt;
mod keyframes;

pub use corrupt::{arm_chain, corrupt_reference, Corruption};
pub use keyframes::{generate_from_keyframes, ContactWindow, Interpolation, Keyframe, KeyframeScript};

use serde::{Deserialize, Serialize};

use crate::math::{lerp_angle, Pose2, Vec2};
use crate::sim::{ObjectModel, RobotModel};

pub const MOTION_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MotionError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{0} out of range")]
    Range(String),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> MotionError {
    MotionError::Invalid {
        path: path.into(),
        reason: reason.into(),
    }
}

/// One reference state: robot, object and contact intent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub robot_root_pos: Vec2,
    pub robot_root_ori: f64,
    pub joint_pos: Vec<f64>,
    pub object_pos: Vec2,
    pub object_ori: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_joint: Option<f64>,
    /// 1 where end-effector `i` should be in contact, else 0.
    pub contact_flags: Vec<u8>,
    /// Object anchor bound to end-effector `i`; required when flagged.
    pub contact_anchor_ids: Vec<Option<String>>,
}

impl ReferenceFrame {
    pub fn root_pose(&self) -> Pose2 {
        Pose2::new(self.robot_root_pos, self.robot_root_ori)
    }

    pub fn object_pose(&self) -> Pose2 {
        Pose2::new(self.object_pos, self.object_ori)
    }

    pub fn is_active(&self, eef: usize) -> bool {
        self.contact_flags.get(eef).copied() == Some(1)
    }

    pub fn eef_count(&self) -> usize {
        self.contact_flags.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMotion {
    pub motion_version: u32,
    pub name: String,
    pub robot_model_id: String,
    pub object_model_id: String,
    /// Hz.
    pub frame_rate: f64,
    pub frames: Vec<ReferenceFrame>,
}

impl ReferenceMotion {
    pub fn new(
        name: impl Into<String>,
        robot_model_id: impl Into<String>,
        object_model_id: impl Into<String>,
        frame_rate: f64,
        frames: Vec<ReferenceFrame>,
    ) -> Self {
        Self {
            motion_version: MOTION_VERSION,
            name: name.into(),
            robot_model_id: robot_model_id.into(),
            object_model_id: object_model_id.into(),
            frame_rate,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Seconds from the first to the last frame.
    pub fn duration(&self) -> f64 {
        (self.frames.len().saturating_sub(1)) as f64 / self.frame_rate
    }

    pub fn phase_of_frame(&self, k: usize) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        k as f64 / (self.frames.len() - 1) as f64
    }

    /// Phase range `[first, last]` of frames flagging end-effector `eef`.
    pub fn contact_window(&self, eef: usize) -> Option<(f64, f64)> {
        let first = self.frames.iter().position(|f| f.is_active(eef))?;
        let last = self.frames.iter().rposition(|f| f.is_active(eef))?;
        Some((self.phase_of_frame(first), self.phase_of_frame(last)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("motion serializes")
    }

    /// Checks the dataset invariants that need no model: frame count, rate,
    /// per-frame dimensions consistent with frame 0, finiteness, binary
    /// flags and anchor bindings.
    pub fn validate(&self) -> Result<(), MotionError> {
        if self.motion_version != MOTION_VERSION {
            return Err(invalid(
                "motion_version",
                format!("unsupported version {}, expected {MOTION_VERSION}", self.motion_version),
            ));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(invalid("frame_rate", "must be finite and > 0"));
        }
        if self.frames.len() < 2 {
            return Err(invalid("frames", format!("need at least 2 frames, got {}", self.frames.len())));
        }
        let first = &self.frames[0];
        let n_joints = first.joint_pos.len();
        let n_eef = first.contact_flags.len();
        let has_joint = first.object_joint.is_some();
        for (k, f) in self.frames.iter().enumerate() {
            let path = |field: &str| format!("frames[{k}].{field}");
            if f.joint_pos.len() != n_joints {
                return Err(invalid(
                    path("joint_pos"),
                    format!("expected {n_joints} entries, got {}", f.joint_pos.len()),
                ));
            }
            if f.contact_flags.len() != n_eef {
                return Err(invalid(
                    path("contact_flags"),
                    format!("expected {n_eef} entries, got {}", f.contact_flags.len()),
                ));
            }
            if f.contact_anchor_ids.len() != n_eef {
                return Err(invalid(
                    path("contact_anchor_ids"),
                    format!("expected {n_eef} entries, got {}", f.contact_anchor_ids.len()),
                ));
            }
            if f.object_joint.is_some() != has_joint {
                return Err(invalid(path("object_joint"), "present in some frames but not others"));
            }
            if !f.robot_root_pos.is_finite() {
                return Err(invalid(path("robot_root_pos"), "non-finite value"));
            }
            if !f.robot_root_ori.is_finite() {
                return Err(invalid(path("robot_root_ori"), "non-finite value"));
            }
            if let Some(i) = f.joint_pos.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("frames[{k}].joint_pos[{i}]"), "non-finite value"));
            }
            if !f.object_pos.is_finite() {
                return Err(invalid(path("object_pos"), "non-finite value"));
            }
            if !f.object_ori.is_finite() {
                return Err(invalid(path("object_ori"), "non-finite value"));
            }
            if f.object_joint.is_some_and(|v| !v.is_finite()) {
                return Err(invalid(path("object_joint"), "non-finite value"));
            }
            for (i, &flag) in f.contact_flags.iter().enumerate() {
                if flag > 1 {
                    return Err(invalid(format!("frames[{k}].contact_flags[{i}]"), "flags must be 0 or 1"));
                }
                if flag == 1 && f.contact_anchor_ids[i].is_none() {
                    return Err(invalid(
                        format!("frames[{k}].contact_anchor_ids[{i}]"),
                        "end-effector flagged for contact has no anchor",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Checks the motion against the models it is meant to drive.
    pub fn validate_against(&self, robot: &RobotModel, object: &ObjectModel) -> Result<(), MotionError> {
        self.validate()?;
        let first = &self.frames[0];
        if first.joint_pos.len() != robot.joint_count() {
            return Err(invalid(
                "frames[0].joint_pos",
                format!("robot '{}' has {} joints, motion has {}", robot.name, robot.joint_count(), first.joint_pos.len()),
            ));
        }
        if first.contact_flags.len() != robot.eef_bodies.len() {
            return Err(invalid(
                "frames[0].contact_flags",
                format!("robot has {} end-effectors, motion has {}", robot.eef_bodies.len(), first.contact_flags.len()),
            ));
        }
        if first.object_joint.is_some() != object.has_joint() {
            return Err(invalid("frames[0].object_joint", "object joint presence does not match the object model"));
        }
        for (k, f) in self.frames.iter().enumerate() {
            for (i, id) in f.contact_anchor_ids.iter().enumerate() {
                if let Some(id) = id {
                    if object.anchor(id).is_none() {
                        return Err(invalid(
                            format!("frames[{k}].contact_anchor_ids[{i}]"),
                            format!("unknown anchor '{id}' on object '{}'", object.name),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Frame at phase `phi`, interpolated at continuous index `phi·(N−1)`.
    /// Binary channels come from the nearest frame.
    pub fn sample(&self, phi: f64) -> Result<ReferenceFrame, MotionError> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(MotionError::Range(format!("phase {phi}")));
        }
        let n = self.frames.len();
        if n == 0 {
            return Err(invalid("frames", "motion has no frames"));
        }
        let idx = phi * (n - 1) as f64;
        let i = (idx.floor() as usize).min(n - 1);
        let t = idx - i as f64;
        if t == 0.0 || i == n - 1 {
            return Ok(self.frames[i].clone());
        }
        let (a, b) = (&self.frames[i], &self.frames[i + 1]);
        let nearest = if t < 0.5 { a } else { b };
        Ok(ReferenceFrame {
            robot_root_pos: a.robot_root_pos.lerp(b.robot_root_pos, t),
            robot_root_ori: lerp_angle(a.robot_root_ori, b.robot_root_ori, t),
            joint_pos: a.joint_pos.iter().zip(&b.joint_pos).map(|(x, y)| x + (y - x) * t).collect(),
            object_pos: a.object_pos.lerp(b.object_pos, t),
            object_ori: lerp_angle(a.object_ori, b.object_ori, t),
            object_joint: match (a.object_joint, b.object_joint) {
                (Some(x), Some(y)) => Some(x + (y - x) * t),
                _ => None,
            },
            contact_flags: nearest.contact_flags.clone(),
            contact_anchor_ids: nearest.contact_anchor_ids.clone(),
        })
    }
}

/// Parses and validates a motion document.
pub fn parse_motion(bytes: &[u8]) -> Result<ReferenceMotion, MotionError> {
    let motion: ReferenceMotion = serde_json::from_slice(bytes).map_err(|e| {
        let path = match e.classify() {
            serde_json::error::Category::Data => "data",
            _ => "syntax",
        };
        MotionError::Syntax(format!("{path} error at line {} column {}: {e}", e.line(), e.column()))
    })?;
    motion.validate()?;
    Ok(motion)
}

/// World position of each flagged end-effector's anchor; `None` for
/// inactive end-effectors.
pub fn contact_points_world(frame: &ReferenceFrame, object: &ObjectModel) -> Result<Vec<Option<Vec2>>, MotionError> {
    let pose = frame.object_pose();
    frame
        .contact_flags
        .iter()
        .zip(&frame.contact_anchor_ids)
        .enumerate()
        .map(|(i, (&flag, id))| {
            if flag != 1 {
                return Ok(None);
            }
            let id = id
                .as_deref()
                .ok_or_else(|| invalid(format!("contact_anchor_ids[{i}]"), "flagged without anchor"))?;
            let anchor = object
                .anchor(id)
                .ok_or_else(|| invalid(format!("contact_anchor_ids[{i}]"), format!("unknown anchor '{id}'")))?;
            Ok(Some(pose.transform_point(anchor.offset)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(x: f64) -> ReferenceFrame {
        ReferenceFrame {
            robot_root_pos: Vec2::new(x, 1.0),
            robot_root_ori: 0.0,
            joint_pos: vec![x, -x],
            object_pos: Vec2::new(2.0, 0.2),
            object_ori: 0.0,
            object_joint: None,
            contact_flags: vec![0],
            contact_anchor_ids: vec![None],
        }
    }

    fn motion(xs: &[f64]) -> ReferenceMotion {
        ReferenceMotion::new("m", "r", "o", 10.0, xs.iter().map(|&x| frame(x)).collect())
    }

    #[test]
    fn sample_boundaries_and_index_arithmetic() {
        let m = motion(&[0.0, 1.0, 4.0]);
        assert_eq!(m.sample(0.0).unwrap(), m.frames[0]);
        assert_eq!(m.sample(1.0).unwrap(), m.frames[2]);
        assert_eq!(m.sample(0.5).unwrap().robot_root_pos.x, 1.0);
        assert!((m.sample(0.75).unwrap().robot_root_pos.x - 2.5).abs() < 1e-15);
        assert!(matches!(m.sample(1.01), Err(MotionError::Range(_))));
        assert!(matches!(m.sample(-0.1), Err(MotionError::Range(_))));
    }

    #[test]
    fn flags_come_from_nearest_frame() {
        let mut m = motion(&[0.0, 1.0]);
        m.frames[1].contact_flags = vec![1];
        m.frames[1].contact_anchor_ids = vec![Some("a".into())];
        assert_eq!(m.sample(0.4).unwrap().contact_flags, vec![0]);
        assert_eq!(m.sample(0.6).unwrap().contact_flags, vec![1]);
    }

    #[test]
    fn located_validation_errors() {
        let mut m = motion(&[0.0; 9]);
        m.frames[7].joint_pos.push(0.0);
        let err = parse_motion(m.to_json().as_bytes()).unwrap_err();
        assert!(matches!(&err, MotionError::Invalid { path, .. } if path == "frames[7].joint_pos"), "{err}");

        let mut m = motion(&[0.0; 4]);
        m.frames[2].contact_flags = vec![1];
        let err = parse_motion(m.to_json().as_bytes()).unwrap_err();
        assert!(matches!(&err, MotionError::Invalid { path, .. } if path == "frames[2].contact_anchor_ids[0]"), "{err}");

        assert!(matches!(parse_motion(b"{ not json"), Err(MotionError::Syntax(_))));
        assert!(matches!(parse_motion(motion(&[0.0]).to_json().as_bytes()), Err(MotionError::Invalid { .. })));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut m = motion(&[0.1, 0.7, 1.0 / 3.0]);
        m.frames[1].object_ori = std::f64::consts::PI - 1e-13;
        let back = parse_motion(m.to_json().as_bytes()).unwrap();
        assert_eq!(back, m);
    }
}
