//! Physical descriptions of the robot and the manipulated object.
//!
//! These are the on-disk model files: JSON documents carrying a
//! `"model_version": 1` field, SI units and radians throughout.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::math::{Pose2, Vec2};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Circle { radius: f64 },
    Box { half_extents: Vec2 },
}

impl Shape {
    /// Radius of the smallest origin-centred circle containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => radius,
            Shape::Box { half_extents } => half_extents.length(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub shape: Shape,
    /// kg; ignored for fixed objects.
    pub mass: f64,
    /// kg·m² about the centre of mass.
    pub inertia: f64,
    #[serde(rename = "friction_coeff")]
    pub friction: f64,
    #[serde(default)]
    pub restitution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: String,
    pub child: String,
    /// Joint location in the parent body frame.
    pub anchor: Vec2,
    /// Joint location in the child body frame.
    #[serde(default)]
    pub child_anchor: Vec2,
    /// `[lo, hi]` on the relative angle `θ_child − θ_parent`.
    pub limits: [f64; 2],
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    /// Nominal standing angle; the origin of absolute (non-residual) actions.
    #[serde(default)]
    pub default_pos: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub model_version: u32,
    pub name: String,
    /// Floating base (x, z, pitch).
    pub base: BodySpec,
    pub links: Vec<BodySpec>,
    pub joints: Vec<JointSpec>,
    /// Links designated as end-effectors (hands, feet).
    pub eef_bodies: Vec<String>,
    /// Links that are feet, for the foot regularisers.
    #[serde(default)]
    pub feet: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObjectKind {
    Free,
    Hinged {
        /// Hinge location in world coordinates.
        anchor: Vec2,
        /// Hinge location in the object body frame.
        local_anchor: Vec2,
        axis_limits: [f64; 2],
        #[serde(default)]
        damping: f64,
    },
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactAnchor {
    pub id: String,
    /// Target contact point in the object's local frame.
    pub offset: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub model_version: u32,
    pub name: String,
    pub kind: ObjectKind,
    pub body: BodySpec,
    pub contact_anchors: Vec<ContactAnchor>,
    /// Spawn pose; the fixed pose for fixed objects. Hinged objects derive
    /// their pose from the hinge angle instead.
    #[serde(default)]
    pub initial_pose: Pose2,
}

impl ObjectModel {
    pub fn has_joint(&self) -> bool {
        matches!(self.kind, ObjectKind::Hinged { .. })
    }

    pub fn anchor(&self, id: &str) -> Option<&ContactAnchor> {
        self.contact_anchors.iter().find(|a| a.id == id)
    }

    /// Body pose of a hinged object at hinge angle `q`.
    pub fn hinged_pose(&self, q: f64) -> Option<Pose2> {
        match self.kind {
            ObjectKind::Hinged {
                anchor,
                local_anchor,
                ..
            } => Some(Pose2::new(anchor - local_anchor.rotate(q), q)),
            _ => None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let model: ObjectModel =
            serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("object model serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check_version(self.model_version, "object.model_version")?;
        let dynamic = !matches!(self.kind, ObjectKind::Fixed);
        validate_body(&self.body, "object.body", dynamic)?;
        let mut seen = HashSet::new();
        for (i, a) in self.contact_anchors.iter().enumerate() {
            if !seen.insert(a.id.as_str()) {
                return Err(invalid(
                    format!("object.contact_anchors[{i}].id"),
                    format!("duplicate anchor id '{}'", a.id),
                ));
            }
            if !a.offset.is_finite() {
                return Err(invalid(
                    format!("object.contact_anchors[{i}].offset"),
                    "non-finite offset",
                ));
            }
        }
        if let ObjectKind::Hinged {
            anchor,
            local_anchor,
            axis_limits,
            damping,
        } = self.kind
        {
            if !anchor.is_finite() || !local_anchor.is_finite() {
                return Err(invalid("object.kind.anchor", "non-finite hinge anchor"));
            }
            if !(axis_limits[0] < axis_limits[1]) {
                return Err(invalid("object.kind.axis_limits", "expected lo < hi"));
            }
            if !(damping >= 0.0) {
                return Err(invalid("object.kind.damping", "must be >= 0"));
            }
        }
        Ok(())
    }
}

impl RobotModel {
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    /// Index of a link or the base; the base is 0, links follow in order.
    pub fn body_index(&self, name: &str) -> Option<usize> {
        if self.base.name == name {
            return Some(0);
        }
        self.links.iter().position(|l| l.name == name).map(|i| i + 1)
    }

    pub fn default_pose(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.default_pos).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let model: RobotModel =
            serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot model serializes")
    }

    /// Checks body parameters and that the joints form a tree rooted at
    /// the base in which every link has exactly one parent joint.
    pub fn validate(&self) -> Result<(), SimError> {
        check_version(self.model_version, "robot.model_version")?;
        validate_body(&self.base, "robot.base", true)?;
        let mut names: HashMap<&str, usize> = HashMap::new();
        names.insert(self.base.name.as_str(), 0);
        for (i, link) in self.links.iter().enumerate() {
            validate_body(link, &format!("robot.links[{i}]"), true)?;
            if names.insert(link.name.as_str(), i + 1).is_some() {
                return Err(invalid(
                    format!("robot.links[{i}].name"),
                    format!("duplicate body name '{}'", link.name),
                ));
            }
        }

        let mut parent_of: Vec<Option<usize>> = vec![None; self.links.len() + 1];
        for (j, joint) in self.joints.iter().enumerate() {
            let path = |f: &str| format!("robot.joints[{j}].{f}");
            let parent = *names
                .get(joint.parent.as_str())
                .ok_or_else(|| invalid(path("parent"), format!("unknown body '{}'", joint.parent)))?;
            let child = *names
                .get(joint.child.as_str())
                .ok_or_else(|| invalid(path("child"), format!("unknown body '{}'", joint.child)))?;
            if parent == child {
                return Err(invalid(path("child"), "joint connects a body to itself"));
            }
            if child == 0 {
                return Err(invalid(path("child"), "the base cannot be a joint child"));
            }
            if parent_of[child].is_some() {
                return Err(invalid(
                    path("child"),
                    format!("body '{}' has more than one parent joint", joint.child),
                ));
            }
            parent_of[child] = Some(parent);
            if !(joint.limits[0] < joint.limits[1]) {
                return Err(invalid(path("limits"), "expected lo < hi"));
            }
            if !(joint.torque_limit > 0.0) {
                return Err(invalid(path("torque_limit"), "must be > 0"));
            }
            if !(joint.kp >= 0.0 && joint.kd >= 0.0) {
                return Err(invalid(path("kp"), "gains must be >= 0"));
            }
            if !joint.anchor.is_finite() || !joint.child_anchor.is_finite() {
                return Err(invalid(path("anchor"), "non-finite anchor"));
            }
            if !joint.default_pos.is_finite() {
                return Err(invalid(path("default_pos"), "non-finite"));
            }
        }
        for (i, p) in parent_of.iter().enumerate().skip(1) {
            if p.is_none() {
                return Err(invalid(
                    format!("robot.links[{}]", i - 1),
                    format!("link '{}' is not attached by any joint", self.links[i - 1].name),
                ));
            }
        }
        // Every link has one parent; reject cycles by walking to the base.
        for start in 1..parent_of.len() {
            let mut cur = start;
            let mut hops = 0;
            while cur != 0 {
                cur = parent_of[cur].expect("checked above");
                hops += 1;
                if hops > parent_of.len() {
                    return Err(invalid(
                        "robot.joints",
                        format!("joint graph has a cycle through '{}'", self.links[start - 1].name),
                    ));
                }
            }
        }
        for (i, e) in self.eef_bodies.iter().enumerate() {
            match names.get(e.as_str()) {
                Some(&idx) if idx > 0 => {}
                _ => {
                    return Err(invalid(
                        format!("robot.eef_bodies[{i}]"),
                        format!("'{e}' does not name a link"),
                    ))
                }
            }
        }
        for (i, f) in self.feet.iter().enumerate() {
            if !matches!(names.get(f.as_str()), Some(&idx) if idx > 0) {
                return Err(invalid(
                    format!("robot.feet[{i}]"),
                    format!("'{f}' does not name a link"),
                ));
            }
        }
        Ok(())
    }
}

fn check_version(v: u32, field: &str) -> Result<(), SimError> {
    if v != MODEL_VERSION {
        return Err(invalid(field, format!("unsupported version {v}, expected {MODEL_VERSION}")));
    }
    Ok(())
}

fn validate_body(b: &BodySpec, path: &str, dynamic: bool) -> Result<(), SimError> {
    match b.shape {
        Shape::Circle { radius } if !(radius > 0.0 && radius.is_finite()) => {
            return Err(invalid(format!("{path}.shape.radius"), "must be > 0"));
        }
        Shape::Box { half_extents } if !(half_extents.x > 0.0 && half_extents.z > 0.0 && half_extents.is_finite()) => {
            return Err(invalid(format!("{path}.shape.half_extents"), "must be > 0"));
        }
        _ => {}
    }
    if dynamic {
        if !(b.mass > 0.0 && b.mass.is_finite()) {
            return Err(invalid(format!("{path}.mass"), "must be > 0 for dynamic bodies"));
        }
        if !(b.inertia > 0.0 && b.inertia.is_finite()) {
            return Err(invalid(format!("{path}.inertia"), "must be > 0"));
        }
    }
    if !(0.0..=2.0).contains(&b.friction) {
        return Err(invalid(format!("{path}.friction_coeff"), "must lie in [0, 2]"));
    }
    if !(0.0..=1.0).contains(&b.restitution) {
        return Err(invalid(format!("{path}.restitution"), "must lie in [0, 1]"));
    }
    Ok(())
}

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> SimError {
    SimError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Inertia of a uniform box about its centre.
pub fn box_inertia(mass: f64, half_extents: Vec2) -> f64 {
    mass * (4.0 * half_extents.x * half_extents.x + 4.0 * half_extents.z * half_extents.z) / 12.0
}

/// Inertia of a uniform disc about its centre.
pub fn disc_inertia(mass: f64, radius: f64) -> f64 {
    0.5 * mass * radius * radius
}
