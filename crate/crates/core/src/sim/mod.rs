//! Deterministic planar rigid-body simulation of an articulated robot and
//! one object, with PD-actuated joints and ground/object contact.

mod collide;
pub mod contact;
pub mod model;
pub mod solver;
pub mod state;
pub mod world;

pub use contact::{eef_contact_force, ContactPoint, ContactReport};
pub use model::{
    box_inertia, disc_inertia, BodySpec, ContactAnchor, JointSpec, ObjectKind, ObjectModel,
    RobotModel, Shape, MODEL_VERSION,
};
pub use solver::{step, step_in_place};
pub use state::{
    body_pose, body_pose_by_name, BodyState, ObjectConfiguration, RobotConfiguration, SimState,
};
pub use world::{
    apply_randomization, build_world, BodyDef, BodyGroup, BodyId, BodyScale, JointDef, SimSettings,
    WorldModel, GROUND,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{what}: expected length {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown body '{0}'")]
    UnknownBody(String),
}
