//! Layer-wise neural-network pruning driven by a DQN agent with per-layer rewards.
//!
//! The pieces, bottom-up:
//!
//! - [`nn`]: dense networks with prune masks, backprop and checkpoints.
//! - [`pruning`]: the standard-deviation prune rule, the magnitude-target rule and sparsity accounting.
//! - [`env`]: the pruning MDP, one step per layer.
//! - [`agent`]: DQN with replay buffer and target network.
//! - [`driver`]: agent training, pruning with the trained agent, fine-tuning, iterative rounds and the uniform baseline.

pub mod agent;
pub mod data;
pub mod driver;
pub mod env;
pub mod error;
pub mod nn;
pub mod pruning;
pub mod seed;

pub use error::{Error, Result};
