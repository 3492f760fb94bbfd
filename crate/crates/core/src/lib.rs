//! Port-navigation vessel simulator and reinforcement-learning harness.
//!
//! The crate is organised bottom-up:
//!
//! - [`kinematics`]: 3-DOF vessel motion with runtime-mutable mass and turn rate.
//! - [`geometry`] and [`world`]: seeded port generation, moving traffic, collision and goal tests.
//! - [`sensor`]: fan-of-rays range sensing against the scene.
//! - [`env`]: the episodic reset/step environment, rewards and trajectory logs.
//! - [`nn`]: small dense networks with hand-written backprop and Adam.
//! - [`agents`]: soft actor-critic, a deterministic actor-critic baseline and a scripted controller.
//! - [`trainer`]: parallel rollout workers feeding a single learner, plus evaluation.
//! - [`sweep`]: mass / turn-rate robustness sweeps of a frozen policy.
//! - [`config`]: the sectioned TOML configuration and its provenance hash.

pub mod agents;
pub mod config;
pub mod env;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod nn;
pub mod plot;
pub mod sensor;
pub mod stats;
pub mod sweep;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
