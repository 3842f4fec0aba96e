//! Kinodynamic motion planning with discontinuity-bounded search over motion
//! primitives, repaired by trajectory optimization.

pub mod bench;
pub mod dbastar;
pub mod dynamics;
mod error;
pub mod metricspace;
pub mod planner;
pub mod primitives;
pub mod trajopt;
pub mod workspace;

pub use dynamics::{Control, ModelId, ModelSpec, State};
pub use planner::{plan, PlannerConfig, SolutionReport};
pub use primitives::{MotionPrimitive, PrimitiveSet};
pub use workspace::{Obstacle, Problem, Trajectory};
pub use error::{Error, Result};
