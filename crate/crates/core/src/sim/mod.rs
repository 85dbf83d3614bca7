//! Deterministic tabletop simulator: kinematic pick/place, containers and
//! lids, synthetic depth capture with ground-truth boxes, AprilTag readout
//! and fault injection.

mod faults;
mod render;
pub mod rng;
mod shapes;
mod spec;
mod world;

use thiserror::Error;

pub use faults::{ActiveFault, FaultSchedule, FaultSpec};
pub use render::{rgb_png, CaptureResult, NO_HIT, TABLE_ID};
pub use shapes::{Footprint, PlacedFootprint, Shape, FLOOR, WALL};
pub use spec::{ObjectSpec, Region, TableSpec, WorldSpec};
pub use world::{PlaceOutcome, SimConfig, SimObject, Support, TableExtent, WorldState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("gripper already holds {0}")]
    GripperOccupied(String),
    #[error("gripper is empty")]
    GripperEmpty,
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error("{0} cannot be grasped")]
    NotGraspable(String),
    #[error("grasp missed the object by {distance:.3} m")]
    GraspMissed { distance: f64 },
    #[error("{object} is covered by {by}")]
    ObjectCovered { object: String, by: String },
    #[error("{object} is inside the closed {container}")]
    ObjectInsideClosedContainer { object: String, container: String },
    #[error("point ({x:.3}, {y:.3}) is outside the workspace")]
    OutOfWorkspace { x: f64, y: f64 },
    #[error("placement collision: {0}")]
    PlacementCollision(String),
    #[error("cannot capture while holding an object")]
    GripperOccupiedDuringCapture,
    #[error("camera returned no frame")]
    CaptureDropout,
    #[error("no camera view {0}")]
    UnknownView(usize),
    #[error("unknown fault kind '{0}'")]
    UnknownFaultKind(String),
    #[error("invalid world: {0}")]
    InvalidWorld(String),
}
