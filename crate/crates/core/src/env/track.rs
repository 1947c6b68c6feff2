//! Reference motion with derived kinematic channels: per-body poses from
//! forward kinematics and velocities from finite differences, precomputed
//! once per motion.

use crate::math::{angle_diff, Pose2, Vec2};
use crate::refmotion::{MotionError, ReferenceFrame, ReferenceMotion};
use crate::sim::WorldModel;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSample {
    pub frame: ReferenceFrame,
    /// World poses of the robot bodies.
    pub body_poses: Vec<Pose2>,
    pub body_vel: Vec<Vec2>,
    pub root_vel: Vec2,
    pub root_ang_vel: f64,
    pub joint_vel: Vec<f64>,
    pub object_vel: Vec2,
    pub object_ang_vel: f64,
    pub object_joint_vel: f64,
}

#[derive(Debug, Clone)]
pub struct ReferenceTrack {
    pub motion: ReferenceMotion,
    samples: Vec<TrackSample>,
}

impl ReferenceTrack {
    pub fn new(motion: ReferenceMotion, world: &WorldModel) -> Result<Self, MotionError> {
        motion.validate_against(&world.robot, &world.object)?;
        let n = motion.len();
        let rate = motion.frame_rate;
        let poses: Vec<Vec<Pose2>> = motion
            .frames
            .iter()
            .map(|f| world.forward_kinematics(f.root_pose(), &f.joint_pos))
            .collect();
        let span = |k: usize| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            (lo, hi, (hi - lo) as f64 / rate)
        };
        let samples = (0..n)
            .map(|k| {
                let (lo, hi, dt) = span(k);
                let (a, b) = (&motion.frames[lo], &motion.frames[hi]);
                let body_vel = poses[lo]
                    .iter()
                    .zip(&poses[hi])
                    .map(|(p, q)| (q.pos - p.pos) / dt)
                    .collect();
                TrackSample {
                    frame: motion.frames[k].clone(),
                    body_poses: poses[k].clone(),
                    body_vel,
                    root_vel: (b.robot_root_pos - a.robot_root_pos) / dt,
                    root_ang_vel: angle_diff(b.robot_root_ori, a.robot_root_ori) / dt,
                    joint_vel: a.joint_pos.iter().zip(&b.joint_pos).map(|(x, y)| (y - x) / dt).collect(),
                    object_vel: (b.object_pos - a.object_pos) / dt,
                    object_ang_vel: angle_diff(b.object_ori, a.object_ori) / dt,
                    object_joint_vel: match (a.object_joint, b.object_joint) {
                        (Some(x), Some(y)) => (y - x) / dt,
                        _ => 0.0,
                    },
                }
            })
            .collect();
        Ok(Self { motion, samples })
    }

    pub fn duration(&self) -> f64 {
        self.motion.duration()
    }

    pub fn frame_count(&self) -> usize {
        self.samples.len()
    }

    /// Track state at phase `phi`; the frame follows the motion's own
    /// sampling rule and the derived channels interpolate linearly.
    pub fn sample(&self, phi: f64) -> Result<TrackSample, MotionError> {
        let frame = self.motion.sample(phi)?;
        let n = self.samples.len();
        let idx = phi * (n - 1) as f64;
        let i = (idx.floor() as usize).min(n - 1);
        let t = idx - i as f64;
        if t == 0.0 || i == n - 1 {
            return Ok(TrackSample {
                frame,
                ..self.samples[i].clone()
            });
        }
        let (a, b) = (&self.samples[i], &self.samples[i + 1]);
        let lerp = |x: f64, y: f64| x + (y - x) * t;
        Ok(TrackSample {
            body_poses: a
                .body_poses
                .iter()
                .zip(&b.body_poses)
                .map(|(p, q)| Pose2::new(p.pos.lerp(q.pos, t), p.angle + angle_diff(q.angle, p.angle) * t))
                .collect(),
            body_vel: a.body_vel.iter().zip(&b.body_vel).map(|(p, q)| p.lerp(*q, t)).collect(),
            root_vel: a.root_vel.lerp(b.root_vel, t),
            root_ang_vel: lerp(a.root_ang_vel, b.root_ang_vel),
            joint_vel: a.joint_vel.iter().zip(&b.joint_vel).map(|(x, y)| lerp(*x, *y)).collect(),
            object_vel: a.object_vel.lerp(b.object_vel, t),
            object_ang_vel: lerp(a.object_ang_vel, b.object_ang_vel),
            object_joint_vel: lerp(a.object_joint_vel, b.object_joint_vel),
            frame,
        })
    }
}
