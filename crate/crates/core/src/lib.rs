//! Exploration path planning for aerial robots in ternary voxel maps.
//!
//! The planner is split in two layers. A local layer grows a tree of motion
//! primitives inside a fixed window around the robot and follows the branch
//! that is expected to reveal the most unknown volume. When the local window
//! is exhausted, a global layer uses a roadmap accreted along the flown
//! trajectory to reposition the robot at a frontier, or to bring it home once
//! the map is complete or the endurance budget runs out.
//!
//! Everything runs against a simulated ground-truth world so that missions
//! are reproducible and their safety can be checked exactly.

pub mod baselines;
pub mod error;
pub mod global_planner;
pub mod harness;
pub mod local_planner;
pub mod mission;
pub mod motion_primitives;
pub mod path;
pub mod sensor_sim;
pub mod voxel_map;

pub use error::{Error, Result};
pub use path::Path;

/// World-frame vector, metres.
pub type Vec3 = nalgebra::Vector3<f64>;
