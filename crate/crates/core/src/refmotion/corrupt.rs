//! Synthetic imperfection: bend an arm chain so its end-effector misses
//! the intended contact by a fixed offset.

use serde::{Deserialize, Serialize};

use super::{invalid, MotionError, ReferenceMotion};
use crate::math::Vec2;
use crate::sim::{BodyId, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corruption {
    /// Index into the robot's end-effector list.
    pub eef: usize,
    /// World-frame displacement of the end-effector, m.
    pub offset: Vec2,
    /// Phase interval `[start, end]` that gets corrupted.
    pub window: (f64, f64),
    /// Phase width of the linear fade in and out; 0 gives a hard step.
    #[serde(default)]
    pub ramp: f64,
}

/// Robot joints from the base down to `body`, root first.
pub fn arm_chain(world: &WorldModel, body: BodyId) -> Vec<usize> {
    let mut chain = Vec::new();
    let mut cur = body;
    while cur != 0 {
        match world.joints[..world.joint_count()].iter().position(|j| j.child == cur) {
            Some(j) => {
                chain.push(j);
                cur = world.joints[j].parent.expect("robot joint");
            }
            None => break,
        }
    }
    chain.reverse();
    chain
}

/// Returns a copy of `motion` whose arm-chain joint angles inside the
/// window place the end-effector body at its nominal position plus
/// `offset`. Root, object and contact channels are untouched.
pub fn corrupt_reference(
    motion: &ReferenceMotion,
    world: &WorldModel,
    corruption: &Corruption,
) -> Result<ReferenceMotion, MotionError> {
    motion.validate()?;
    let (lo, hi) = corruption.window;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
        return Err(MotionError::Range(format!("window [{lo}, {hi}]")));
    }
    if !(lo < hi) {
        return Err(invalid("window", format!("empty window [{lo}, {hi}]")));
    }
    if !(corruption.ramp >= 0.0) || !corruption.offset.is_finite() {
        return Err(invalid("corruption", "ramp must be >= 0 and offset finite"));
    }
    let eef_body = *world
        .eef_ids()
        .get(corruption.eef)
        .ok_or_else(|| invalid("eef", format!("no end-effector {}", corruption.eef)))?;
    if motion.frames[0].joint_pos.len() != world.joint_count() {
        return Err(invalid("frames[0].joint_pos", "motion does not match the robot"));
    }
    let chain = arm_chain(world, eef_body);

    let mut out = motion.clone();
    if corruption.offset == Vec2::ZERO {
        return Ok(out);
    }
    for k in 0..out.frames.len() {
        let phi = motion.phase_of_frame(k);
        if phi < lo || phi > hi {
            continue;
        }
        let scale = if corruption.ramp > 0.0 {
            ((phi - lo) / corruption.ramp).min((hi - phi) / corruption.ramp).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if scale == 0.0 {
            continue;
        }
        let frame = &mut out.frames[k];
        let root = frame.root_pose();
        let nominal = world.forward_kinematics(root, &frame.joint_pos)[eef_body].pos;
        let target = nominal + corruption.offset * scale;
        solve_ik(world, root, &mut frame.joint_pos, &chain, eef_body, target);
    }
    Ok(out)
}

/// Damped least squares on the chain's joints, respecting joint limits.
fn solve_ik(
    world: &WorldModel,
    root: crate::math::Pose2,
    q: &mut [f64],
    chain: &[usize],
    body: BodyId,
    target: Vec2,
) {
    const DAMPING: f64 = 0.05;
    for _ in 0..200 {
        let poses = world.forward_kinematics(root, q);
        let p = poses[body].pos;
        let err = target - p;
        if err.length() < 1e-7 {
            return;
        }
        let cols: Vec<Vec2> = chain
            .iter()
            .map(|&j| {
                let def = &world.joints[j];
                let pivot = poses[def.parent.expect("robot joint")].transform_point(def.anchor_parent);
                (p - pivot).perp()
            })
            .collect();
        // (J Jᵀ + λ² I) y = err, then Δq = Jᵀ y.
        let (mut a, mut b, mut d) = (DAMPING * DAMPING, 0.0, DAMPING * DAMPING);
        for c in &cols {
            a += c.x * c.x;
            b += c.x * c.z;
            d += c.z * c.z;
        }
        let det = a * d - b * b;
        let y = Vec2::new((d * err.x - b * err.z) / det, (a * err.z - b * err.x) / det);
        for (c, &j) in cols.iter().zip(chain) {
            let [lo, hi] = world.joint_limits(j);
            q[j] = (q[j] + c.dot(y)).clamp(lo, hi);
        }
    }
}
