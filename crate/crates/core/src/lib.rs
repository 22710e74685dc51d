//! Executable analytic concepts: parametric part assets, articulated-object
//! blueprints, point-cloud fitting, grasp and force synthesis, motion
//! planning and a quasi-static articulation simulator.

pub mod blueprint;
pub mod concepts;
pub mod executor;
pub mod fit;
pub mod geom;
pub mod manipulation;
pub mod sim;

pub use geom::{PointCloud, Rotation3, Transform3, Vec3};
