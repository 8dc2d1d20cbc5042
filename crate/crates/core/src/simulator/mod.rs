//! A small kinematic tabletop: analytic shapes, a pinhole camera, an end-effector that can
//! hold one object, and step-level success checks.

mod evaluate;
mod render;
mod shape;
mod world;

use thiserror::Error;

pub use evaluate::{discrete_frechet, evaluate, path_alignment, resample, Evaluation, StepOutcome, TaskSpec};
pub use render::{render, Frame};
pub use shape::Shape;
pub use world::{
    Camera, Expectation, Gripper, Hold, SceneObject, SlideJoint, SupportPlane, WorldState, DEFAULT_GRASP_RADIUS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("no graspable object within {radius} m")]
    NothingToGrasp { radius: f64 },
    #[error("already holding {0:?}")]
    AlreadyHolding(String),
    #[error("gripper is empty")]
    NotHolding,
}

impl SimError {
    pub fn code(&self) -> &'static str {
        match self {
            SimError::InvalidScene(_) => "InvalidScene",
            SimError::NothingToGrasp { .. } => "NothingToGrasp",
            SimError::AlreadyHolding(_) => "AlreadyHolding",
            SimError::NotHolding => "NotHolding",
        }
    }
}
