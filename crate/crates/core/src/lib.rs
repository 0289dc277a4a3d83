//! Vehicle-to-access-point association simulator.
//!
//! Vehicles drive across a small square world populated by WiFi access
//! points, each backed by an edge server. At every step a policy picks one
//! AP per vehicle. The crate provides:
//!
//! - [`channel`]: breakpoint path loss, shadow fading and SNR.
//! - [`world`]: straight-line vehicle kinematics and random-waypoint APs.
//! - [`env`]: the decision process (observations, rewards, termination).
//! - [`policies`]: random, strongest-signal and least-loaded baselines.
//! - [`ddpg`]: an actor-critic learner with hand-written backpropagation.
//! - [`harness`]: configuration, training/evaluation runs and CSV output.

pub mod channel;
pub mod ddpg;
pub mod env;
mod error;
pub mod harness;
pub mod policies;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
