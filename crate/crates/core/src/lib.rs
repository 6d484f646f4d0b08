//! Monte-Carlo tree search with power-mean value backups and polynomial
//! exploration bonuses for stochastic MDPs.
//!
//! * [`estimators`]: power mean and running mean primitives.
//! * [`schedule`]: exploration bonus schedules and their exponent constants.
//! * [`envs`]: generative models (synthetic tree, FrozenLake, Taxi) and exact
//!   value solvers.
//! * [`mcts`]: the search tree, trajectory simulation and planning.
//! * [`harness`]: experiments, statistics, CSV output and parallel trials.

pub mod envs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mcts;
pub mod schedule;

pub use error::{Error, Result};
