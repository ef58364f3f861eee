//! Simulation laboratory for tacit collusion between independent learning
//! pricing agents in an episodic market with fixed inventories.
//!
//! * [`market`]: the pricing game itself.
//! * [`equilibria`]: competitive and collusive benchmark prices.
//! * [`metrics`]: profit gain, collusion index and convergence metric.
//! * [`nn`]: small dense networks with Adam.
//! * [`agents`]: DQN and PPO learners.
//! * [`harness`]: configuration, training loops, evaluation and sweeps.
//! * [`analysis`]: forced deviations, response surfaces, learning curves.

pub mod error;
pub mod market;
pub mod equilibria;
pub mod metrics;
pub mod nn;
pub mod agents;
pub mod harness;
pub mod analysis;

pub use error::{Error, Result};
