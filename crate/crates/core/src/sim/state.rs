use super::world::{BodyId, WorldModel};
use super::SimError;
use crate::math::{angle_diff, Pose2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BodyState {
    pub pose: Pose2,
    pub vel: Vec2,
    pub ang_vel: f64,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        self.pose.pos.is_finite()
            && self.pose.angle.is_finite()
            && self.vel.is_finite()
            && self.ang_vel.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct JointImpulse {
    pub point: Vec2,
    pub lower: f64,
    pub upper: f64,
    pub motor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CachedContact {
    pub a: BodyId,
    pub b: BodyId,
    pub feature: u32,
    pub normal: f64,
    pub tangent: f64,
}

/// Solver impulses carried between steps for warm starting.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct WarmStart {
    pub joints: Vec<JointImpulse>,
    pub contacts: Vec<CachedContact>,
}

/// Full dynamic state of one simulation instance, in maximal coordinates.
///
/// `joint_*` vectors are derived from the body poses after every step and
/// are indexed like the robot model's joints.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub bodies: Vec<BodyState>,
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
    /// PD torque applied over the last step, per robot joint.
    pub joint_torque: Vec<f64>,
    pub object_joint_pos: Option<f64>,
    pub object_joint_vel: Option<f64>,
    pub time: f64,
    pub step_count: u64,
    pub(crate) warm: WarmStart,
}

/// Generalized robot configuration: floating root plus joint coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfiguration {
    pub root: Pose2,
    pub root_vel: Vec2,
    pub root_ang_vel: f64,
    pub joint_pos: Vec<f64>,
    pub joint_vel: Vec<f64>,
}

impl RobotConfiguration {
    pub fn at_rest(root: Pose2, joint_pos: Vec<f64>) -> Self {
        let n = joint_pos.len();
        Self {
            root,
            root_vel: Vec2::ZERO,
            root_ang_vel: 0.0,
            joint_pos,
            joint_vel: vec![0.0; n],
        }
    }
}

/// Object configuration. Hinged objects use `joint`; their pose is derived.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectConfiguration {
    pub pose: Pose2,
    pub vel: Vec2,
    pub ang_vel: f64,
    pub joint: f64,
    pub joint_vel: f64,
}

impl SimState {
    /// Builds a state from generalized coordinates. Joint angles are clamped
    /// into their limits.
    pub fn from_configuration(
        world: &WorldModel,
        robot: &RobotConfiguration,
        object: &ObjectConfiguration,
    ) -> Result<SimState, SimError> {
        let n = world.joint_count();
        if robot.joint_pos.len() != n || robot.joint_vel.len() != n {
            return Err(SimError::Dimension {
                what: "joint configuration",
                expected: n,
                actual: robot.joint_pos.len().min(robot.joint_vel.len()),
            });
        }
        let q: Vec<f64> = robot
            .joint_pos
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let [lo, hi] = world.joints[j].limits;
                v.clamp(lo, hi)
            })
            .collect();
        let poses = world.forward_kinematics(robot.root, &q);
        let vels = world.forward_velocities(
            robot.root,
            robot.root_vel,
            robot.root_ang_vel,
            &q,
            &robot.joint_vel,
        );
        let mut bodies: Vec<BodyState> = poses
            .iter()
            .zip(&vels)
            .map(|(&pose, &(vel, ang_vel))| BodyState { pose, vel, ang_vel })
            .collect();

        let obj = &world.object;
        let (obj_state, obj_q) = match world.object.kind {
            super::ObjectKind::Free => (
                BodyState {
                    pose: object.pose,
                    vel: object.vel,
                    ang_vel: object.ang_vel,
                },
                None,
            ),
            super::ObjectKind::Fixed => (
                BodyState {
                    pose: obj.initial_pose,
                    ..Default::default()
                },
                None,
            ),
            super::ObjectKind::Hinged {
                local_anchor,
                axis_limits,
                ..
            } => {
                let q = object.joint.clamp(axis_limits[0], axis_limits[1]);
                let pose = obj.hinged_pose(q).expect("hinged");
                // Point on the hinge stays still: v = -w × r.
                let r = local_anchor.rotate(q);
                let vel = -Vec2::cross_scalar(object.joint_vel, r);
                (
                    BodyState {
                        pose,
                        vel,
                        ang_vel: object.joint_vel,
                    },
                    Some((q, object.joint_vel)),
                )
            }
        };
        bodies.push(obj_state);

        let state = SimState {
            bodies,
            joint_pos: q,
            joint_vel: robot.joint_vel.clone(),
            joint_torque: vec![0.0; n],
            object_joint_pos: obj_q.map(|v| v.0),
            object_joint_vel: obj_q.map(|v| v.1),
            time: 0.0,
            step_count: 0,
            warm: WarmStart::default(),
        };
        if !state.is_finite() {
            return Err(SimError::NonFinite("configuration"));
        }
        Ok(state)
    }

    /// Robot at zero joint angles with its base at `root`; object at its
    /// initial pose (or hinge angle 0).
    pub fn rest(world: &WorldModel, root: Pose2) -> SimState {
        let robot = RobotConfiguration::at_rest(root, vec![0.0; world.joint_count()]);
        let object = ObjectConfiguration {
            pose: world.object.initial_pose,
            ..Default::default()
        };
        Self::from_configuration(world, &robot, &object).expect("rest configuration is valid")
    }

    pub fn is_finite(&self) -> bool {
        self.bodies.iter().all(BodyState::is_finite)
            && self.joint_pos.iter().all(|v| v.is_finite())
            && self.joint_vel.iter().all(|v| v.is_finite())
            && self.time.is_finite()
    }

    pub fn root(&self) -> &BodyState {
        &self.bodies[0]
    }

    pub fn object<'a>(&'a self, world: &WorldModel) -> &'a BodyState {
        &self.bodies[world.object_body]
    }

    pub fn linear_momentum(&self, world: &WorldModel) -> Vec2 {
        self.bodies
            .iter()
            .zip(world.bodies())
            .filter(|(_, def)| !def.is_static)
            .fold(Vec2::ZERO, |acc, (b, def)| acc + b.vel * def.mass)
    }

    /// Recomputes the derived joint coordinates from body poses.
    pub(crate) fn refresh_joint_coordinates(&mut self, world: &WorldModel) {
        let n = world.joint_count();
        for j in 0..n {
            let def = &world.joints[j];
            let p = def.parent.expect("robot joint");
            let (bp, bc) = (self.bodies[p], self.bodies[def.child]);
            self.joint_pos[j] = angle_diff(bc.pose.angle, bp.pose.angle);
            self.joint_vel[j] = bc.ang_vel - bp.ang_vel;
        }
        if world.object.has_joint() {
            let b = self.bodies[world.object_body];
            self.object_joint_pos = Some(angle_diff(b.pose.angle, 0.0));
            self.object_joint_vel = Some(b.ang_vel);
        }
    }

    /// Applies a rigid transform to every robot and object body. Static
    /// objects are moved too; the caller is responsible for the world.
    pub fn transformed(&self, t: &crate::math::Se2) -> SimState {
        let mut out = self.clone();
        for b in &mut out.bodies {
            b.pose.pos = t.apply_point(b.pose.pos);
            b.pose.angle += t.angle;
            b.vel = t.apply_vector(b.vel);
        }
        out
    }
}

/// World-frame pose of a body.
pub fn body_pose(world: &WorldModel, state: &SimState, body: BodyId) -> Result<Pose2, SimError> {
    if body >= world.body_count() || body >= state.bodies.len() {
        return Err(SimError::UnknownBody(body.to_string()));
    }
    Ok(state.bodies[body].pose)
}

pub fn body_pose_by_name(world: &WorldModel, state: &SimState, name: &str) -> Result<Pose2, SimError> {
    let id = world
        .body_id(name)
        .ok_or_else(|| SimError::UnknownBody(name.to_string()))?;
    body_pose(world, state, id)
}
