//! Trajectory synthesis, analysis and evaluation toolkit.
//!
//! The geometric and numeric core is generic over [`Scalar`] (`f32`/`f64`);
//! the aliases below fix the scalar for the common case. Simulators,
//! generators and the training loops work in `f64`.

pub mod analysis;
pub mod baseline;
pub mod cluster;
pub mod error;
pub mod interaction;
pub mod kinematics;
pub mod metrics;
pub mod neural;
pub mod policy;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod traj;

pub use error::{Error, Result};
pub use rng::SeededRng;
pub use scalar::Scalar;

pub type Point2d = traj::Point2<f64>;
pub type Point2f = traj::Point2<f32>;
pub type Rect64 = traj::Rect<f64>;
pub type Trajectory64 = traj::Trajectory<f64>;
pub type Trajectory32 = traj::Trajectory<f32>;
pub type Scene64 = traj::Scene<f64>;
pub type Dataset64 = traj::Dataset<f64>;
pub type Dataset32 = traj::Dataset<f32>;
pub type Mlp64 = neural::Mlp<f64>;
pub type Mlp32 = neural::Mlp<f32>;
