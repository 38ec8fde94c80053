//! Constraint-aware planning with language-model-written plan sketches.
//!
//! A language model writes a parametric program (`gen_plan` plus a `gen_domain`
//! describing how to sample its free parameters). A sampling solver looks for
//! parameter values whose rollout in a simple kinematic simulator violates no
//! constraint, and reports aggregated failures back to the model otherwise.

pub mod bench;
pub mod config;
pub mod constraints;
pub mod geometry;
pub mod lmp;
pub mod orchestrator;
pub mod scene;
pub mod solver;
pub mod sim;
pub mod tasks;

pub use config::Config;
pub use constraints::{run_all, ConstraintId, Violation};
pub use scene::{ActionParam, Category, EnvKind, GroundAction, Pose, SceneObject, Shape, WorldState};
pub use sim::{MotionTrace, Simulator};
