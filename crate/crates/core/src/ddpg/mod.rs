//! Deep deterministic policy gradient learner.
//!
//! The actor maps an observation to a score per (vehicle, AP) pair through
//! sigmoid outputs; those scores are the continuous action stored in replay
//! and fed to the critic, and a row-wise argmax turns them into the discrete
//! association sent to the environment.

pub mod adam;
pub mod agent;
pub mod checkpoint;
pub mod mlp;
pub mod replay;
pub mod train;

pub use agent::{ActMode, AgentConfig, AgentDims, DdpgAgent, DdpgPolicy, UpdateStats};
pub use checkpoint::{config_hash, Checkpoint};
pub use mlp::{soft_update, Activation, Dense, Gradients, Mlp};
pub use replay::{ReplayBuffer, Transition};
pub use train::{episode_seed, train};
