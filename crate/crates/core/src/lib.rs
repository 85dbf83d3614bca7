//! Language-to-action orchestration for tabletop manipulation.

pub mod geometry;
pub mod planner;
pub mod scene_graph;
pub mod sim;
pub mod backends;
pub mod eval;
pub mod orchestrator;
pub mod tools;
