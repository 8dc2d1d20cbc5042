//! RoVI: turning hand-drawn step-colored sketches into robot trajectories.

pub mod datagen;
pub mod eval;
pub mod geom;
pub mod io;
pub mod lifter;
pub mod parser;
pub mod pipeline;
pub mod planner;
pub mod policy;
pub mod scalar;
pub mod simulator;
pub mod types;
pub mod viz;

pub use scalar::Scalar;
pub use types::*;

pub type Vec3d = geom::Vec3<f64>;
pub type Quatd = geom::Quat<f64>;
pub type Isometryd = geom::Isometry<f64>;
pub type Posed = types::Pose<f64>;
pub type Keypoint3d = types::Keypoint3<f64>;
pub type DepthMapd = types::DepthMap<f64>;
