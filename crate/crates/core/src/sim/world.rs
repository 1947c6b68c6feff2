use serde::{Deserialize, Serialize};

use super::model::{invalid, ObjectKind, ObjectModel, RobotModel, Shape};
use super::SimError;
use crate::math::{Pose2, Vec2};

/// Index of a body inside a [`WorldModel`]. The robot base is 0, robot links
/// follow in model order, and the object comes last.
pub type BodyId = usize;

/// Pseudo body id for the ground half-plane `z <= 0`.
pub const GROUND: BodyId = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub gravity: Vec2,
    pub contacts_enabled: bool,
    pub ground_enabled: bool,
    pub velocity_iterations: usize,
    pub position_iterations: usize,
    /// Allowed penetration before position correction kicks in.
    pub slop: f64,
    /// Contacts closer than this are handed to the solver speculatively.
    pub speculative_margin: f64,
    pub restitution_threshold: f64,
    pub max_correction: f64,
    pub position_beta: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            gravity: Vec2::new(0.0, -9.81),
            contacts_enabled: true,
            ground_enabled: true,
            velocity_iterations: 10,
            position_iterations: 4,
            slop: 1e-3,
            speculative_margin: 0.02,
            restitution_threshold: 1.0,
            max_correction: 0.1,
            position_beta: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BodyGroup {
    Robot,
    Object,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyDef {
    pub name: String,
    pub shape: Shape,
    pub mass: f64,
    pub inertia: f64,
    pub inv_mass: f64,
    pub inv_inertia: f64,
    pub friction: f64,
    pub restitution: f64,
    pub group: BodyGroup,
    pub is_static: bool,
}

/// A revolute joint; `parent == None` anchors the child to the world.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDef {
    pub name: String,
    pub parent: Option<BodyId>,
    pub child: BodyId,
    pub anchor_parent: Vec2,
    pub anchor_child: Vec2,
    pub limits: [f64; 2],
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
}

/// Immutable description of one simulated scene.
#[derive(Debug, Clone)]
pub struct WorldModel {
    pub robot: RobotModel,
    pub object: ObjectModel,
    pub ground_friction: f64,
    pub settings: SimSettings,
    pub(crate) bodies: Vec<BodyDef>,
    /// Robot joints in model order, then the object hinge if any.
    pub(crate) joints: Vec<JointDef>,
    /// Robot joint indices ordered parents-before-children.
    pub(crate) joint_order: Vec<usize>,
    /// For each robot joint, the bodies moved rigidly with its child.
    pub(crate) subtrees: Vec<Vec<BodyId>>,
    pub(crate) object_body: BodyId,
    pub(crate) eef_ids: Vec<BodyId>,
    pub(crate) foot_ids: Vec<BodyId>,
}

pub fn build_world(
    robot: RobotModel,
    object: ObjectModel,
    ground_friction: f64,
) -> Result<WorldModel, SimError> {
    robot.validate()?;
    object.validate()?;
    if !(0.0..=2.0).contains(&ground_friction) {
        return Err(invalid("ground_friction", "must lie in [0, 2]"));
    }

    let mut bodies = Vec::with_capacity(robot.links.len() + 2);
    for spec in std::iter::once(&robot.base).chain(robot.links.iter()) {
        bodies.push(BodyDef {
            name: spec.name.clone(),
            shape: spec.shape.clone(),
            mass: spec.mass,
            inertia: spec.inertia,
            inv_mass: 1.0 / spec.mass,
            inv_inertia: 1.0 / spec.inertia,
            friction: spec.friction,
            restitution: spec.restitution,
            group: BodyGroup::Robot,
            is_static: false,
        });
    }
    let object_body = bodies.len();
    let is_static = matches!(object.kind, ObjectKind::Fixed);
    bodies.push(BodyDef {
        name: object.body.name.clone(),
        shape: object.body.shape.clone(),
        mass: object.body.mass,
        inertia: object.body.inertia,
        inv_mass: if is_static { 0.0 } else { 1.0 / object.body.mass },
        inv_inertia: if is_static { 0.0 } else { 1.0 / object.body.inertia },
        friction: object.body.friction,
        restitution: object.body.restitution,
        group: BodyGroup::Object,
        is_static,
    });

    let mut joints: Vec<JointDef> = robot
        .joints
        .iter()
        .map(|j| JointDef {
            name: j.name.clone(),
            parent: robot.body_index(&j.parent),
            child: robot.body_index(&j.child).expect("validated"),
            anchor_parent: j.anchor,
            anchor_child: j.child_anchor,
            limits: j.limits,
            torque_limit: j.torque_limit,
            kp: j.kp,
            kd: j.kd,
        })
        .collect();

    let n_robot_joints = joints.len();
    let mut joint_order = Vec::with_capacity(n_robot_joints);
    let mut placed = vec![false; robot.links.len() + 1];
    placed[0] = true;
    while joint_order.len() < n_robot_joints {
        for (i, j) in joints.iter().enumerate() {
            let parent = j.parent.expect("robot joints have parents");
            if !placed[j.child] && placed[parent] {
                placed[j.child] = true;
                joint_order.push(i);
            }
        }
    }

    let mut subtrees = vec![Vec::new(); n_robot_joints];
    for (i, j) in joints.iter().enumerate() {
        let mut members = vec![j.child];
        let mut k = 0;
        while k < members.len() {
            let b = members[k];
            for other in joints.iter() {
                if other.parent == Some(b) {
                    members.push(other.child);
                }
            }
            k += 1;
        }
        subtrees[i] = members;
    }

    if let ObjectKind::Hinged {
        anchor,
        local_anchor,
        axis_limits,
        damping,
    } = object.kind
    {
        joints.push(JointDef {
            name: format!("{}_hinge", object.name),
            parent: None,
            child: object_body,
            anchor_parent: anchor,
            anchor_child: local_anchor,
            limits: axis_limits,
            torque_limit: f64::INFINITY,
            kp: 0.0,
            kd: damping,
        });
    }

    let eef_ids = robot
        .eef_bodies
        .iter()
        .map(|n| robot.body_index(n).expect("validated"))
        .collect();
    let foot_ids = robot
        .feet
        .iter()
        .map(|n| robot.body_index(n).expect("validated"))
        .collect();

    Ok(WorldModel {
        robot,
        object,
        ground_friction,
        settings: SimSettings::default(),
        bodies,
        joints,
        joint_order,
        subtrees,
        object_body,
        eef_ids,
        foot_ids,
    })
}

/// Per-body multiplicative randomisation factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyScale {
    pub mass_scale: f64,
    pub inertia_scale: f64,
    pub friction_scale: f64,
}

impl BodyScale {
    pub const IDENTITY: BodyScale = BodyScale {
        mass_scale: 1.0,
        inertia_scale: 1.0,
        friction_scale: 1.0,
    };
}

impl Default for BodyScale {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Returns a copy of `world` with per-body mass, inertia and friction
/// scaled; one entry of `scales` per body. Friction is clamped to `[0, 2]`.
pub fn apply_randomization(world: &WorldModel, scales: &[BodyScale]) -> Result<WorldModel, SimError> {
    if scales.len() != world.bodies.len() {
        return Err(invalid(
            "scales",
            format!("expected {} entries, got {}", world.bodies.len(), scales.len()),
        ));
    }
    for (i, s) in scales.iter().enumerate() {
        for (name, v) in [
            ("mass_scale", s.mass_scale),
            ("inertia_scale", s.inertia_scale),
            ("friction_scale", s.friction_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("scales[{i}].{name}"), "must be > 0"));
            }
        }
    }
    let mut out = world.clone();
    for (id, (body, s)) in out.bodies.iter_mut().zip(scales).enumerate() {
        body.friction = (body.friction * s.friction_scale).clamp(0.0, 2.0);
        body.restitution = body.restitution.clamp(0.0, 1.0);
        if !body.is_static {
            body.mass *= s.mass_scale;
            body.inertia *= s.inertia_scale;
            body.inv_mass = 1.0 / body.mass;
            body.inv_inertia = 1.0 / body.inertia;
        }
        let spec = if id == 0 {
            &mut out.robot.base
        } else if id == out.object_body {
            &mut out.object.body
        } else {
            &mut out.robot.links[id - 1]
        };
        spec.mass = body.mass;
        spec.inertia = body.inertia;
        spec.friction = body.friction;
    }
    Ok(out)
}

impl WorldModel {
    pub fn body_count(&self) -> usize {
        self.bodies.len()
    }

    pub fn dynamic_body_count(&self) -> usize {
        self.bodies.iter().filter(|b| !b.is_static).count()
    }

    pub fn robot_body_count(&self) -> usize {
        self.robot.links.len() + 1
    }

    pub fn joint_count(&self) -> usize {
        self.robot.joints.len()
    }

    /// Number of object joint coordinates (1 for hinged objects, else 0).
    pub fn object_joint_count(&self) -> usize {
        usize::from(self.object.has_joint())
    }

    pub fn bodies(&self) -> &[BodyDef] {
        &self.bodies
    }

    pub fn body(&self, id: BodyId) -> Option<&BodyDef> {
        self.bodies.get(id)
    }

    pub fn body_id(&self, name: &str) -> Option<BodyId> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn body_name(&self, id: BodyId) -> &str {
        if id == GROUND {
            "ground"
        } else {
            &self.bodies[id].name
        }
    }

    pub fn object_body(&self) -> BodyId {
        self.object_body
    }

    pub fn eef_ids(&self) -> &[BodyId] {
        &self.eef_ids
    }

    pub fn foot_ids(&self) -> &[BodyId] {
        &self.foot_ids
    }

    pub fn joint_limits(&self, j: usize) -> [f64; 2] {
        self.joints[j].limits
    }

    pub fn robot_mass(&self) -> f64 {
        self.bodies[..self.robot_body_count()].iter().map(|b| b.mass).sum()
    }

    pub fn with_settings(mut self, settings: SimSettings) -> Self {
        self.settings = settings;
        self
    }

    /// Forward kinematics of the robot: world poses of the base and every
    /// link for a root pose and joint angles.
    pub fn forward_kinematics(&self, root: Pose2, joint_pos: &[f64]) -> Vec<Pose2> {
        let mut poses = vec![Pose2::default(); self.robot_body_count()];
        poses[0] = root;
        for &j in &self.joint_order {
            let def = &self.joints[j];
            let parent = poses[def.parent.expect("robot joint")];
            let angle = parent.angle + joint_pos[j];
            let pivot = parent.transform_point(def.anchor_parent);
            poses[def.child] = Pose2::new(pivot - def.anchor_child.rotate(angle), angle);
        }
        poses
    }

    /// Velocities `(linear, angular)` of every robot body for the given
    /// configuration and generalized velocities.
    pub fn forward_velocities(
        &self,
        root: Pose2,
        root_vel: Vec2,
        root_ang_vel: f64,
        joint_pos: &[f64],
        joint_vel: &[f64],
    ) -> Vec<(Vec2, f64)> {
        let poses = self.forward_kinematics(root, joint_pos);
        let mut vels = vec![(Vec2::ZERO, 0.0); poses.len()];
        vels[0] = (root_vel, root_ang_vel);
        for &j in &self.joint_order {
            let def = &self.joints[j];
            let p = def.parent.expect("robot joint");
            let (vp, wp) = vels[p];
            let wc = wp + joint_vel[j];
            let rp = def.anchor_parent.rotate(poses[p].angle);
            let rc = def.anchor_child.rotate(poses[def.child].angle);
            let vc = vp + Vec2::cross_scalar(wp, rp) - Vec2::cross_scalar(wc, rc);
            vels[def.child] = (vc, wc);
        }
        vels
    }
}
