//! Policy search with parameter-based exploration (PGPE) and its
//! importance-weighted extension with an optimal constant baseline, plus two
//! simulated benchmark tasks: 5-DOF arm target reaching and an arm-driven
//! cart-pole swing-up.

pub mod cli;
pub mod core;
pub mod envs;
pub mod estimators;
pub mod policy;
pub mod runner;

pub use crate::core::{Action, EnvKind, PgpeError, Result, RngStream, State, Trajectory};
pub use crate::policy::{GradientVec, HyperParams, PolicyParams};
