use serde::{Deserialize, Serialize};

use super::config::{BodyErrorReduce, EnvConfig};
use super::reward::{eef_forces, eef_targets, PoseErrors};
use crate::refmotion::ReferenceFrame;
use crate::sim::{ContactReport, SimState, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    #[default]
    None,
    RootPose,
    BodyPose,
    ObjectPose,
    LostContact,
    MotionEnd,
}

impl TerminationReason {
    pub const ALL: [TerminationReason; 6] = [
        TerminationReason::None,
        TerminationReason::RootPose,
        TerminationReason::BodyPose,
        TerminationReason::ObjectPose,
        TerminationReason::LostContact,
        TerminationReason::MotionEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::None => "none",
            TerminationReason::RootPose => "root_pose",
            TerminationReason::BodyPose => "body_pose",
            TerminationReason::ObjectPose => "object_pose",
            TerminationReason::LostContact => "lost_contact",
            TerminationReason::MotionEnd => "motion_end",
        }
    }

    pub fn is_failure(self) -> bool {
        !matches!(self, TerminationReason::None | TerminationReason::MotionEnd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TerminationResult {
    pub terminated: bool,
    pub reason: TerminationReason,
    pub step: u64,
}

/// Inputs to the termination stack for one control step.
pub struct TerminationInputs<'a> {
    pub errors: &'a PoseErrors,
    /// Per end-effector distance to its flagged anchor (None if unflagged).
    pub contact_distance: &'a [Option<f64>],
    pub contact_force: &'a [f64],
    pub phase: f64,
}

/// Distances and forces feeding the lost-contact check.
pub fn contact_status(world: &WorldModel, state: &SimState, frame: &ReferenceFrame, report: &ContactReport) -> (Vec<Option<f64>>, Vec<f64>) {
    let (positions, targets) = eef_targets(world, state, frame);
    let dist = positions
        .iter()
        .zip(&targets)
        .map(|(p, t)| t.map(|t| p.distance(t)))
        .collect();
    (dist, eef_forces(world, report))
}

/// Applies the termination table. Failure reasons take precedence over
/// reaching the end of the motion.
pub fn check_termination(inputs: &TerminationInputs<'_>, step: u64, cfg: &EnvConfig) -> TerminationResult {
    let t = &cfg.termination;
    let e = inputs.errors;
    let result = |reason: TerminationReason| TerminationResult {
        terminated: reason != TerminationReason::None,
        reason,
        step,
    };
    if step >= t.min_steps {
        if e.root_pos > t.root_pos || e.root_ori > t.root_ori {
            return result(TerminationReason::RootPose);
        }
        if cfg.use_body_track_termination {
            let body = match t.body_error {
                BodyErrorReduce::Max => e.body_local_max,
                BodyErrorReduce::Mean => e.body_local_mean,
            };
            if body > t.body_pos || e.body_ori_max > t.body_ori {
                return result(TerminationReason::BodyPose);
            }
        }
        if e.object_pos > t.object_pos || e.object_ori > t.object_ori || e.object_joint > t.object_ori {
            return result(TerminationReason::ObjectPose);
        }
    }
    if cfg.use_contact_termination && step >= t.contact_min_steps {
        let lost = inputs
            .contact_distance
            .iter()
            .zip(inputs.contact_force)
            .any(|(d, &f)| matches!(d, Some(d) if *d > t.contact_pos) && f < t.contact_force);
        if lost {
            return result(TerminationReason::LostContact);
        }
    }
    if inputs.phase >= 1.0 {
        return result(TerminationReason::MotionEnd);
    }
    result(TerminationReason::None)
}
