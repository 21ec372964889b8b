//! Joint predictive distributions for decision making.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the algorithmic
//! pieces; file formats, configuration and parallel drivers live in the
//! `jointpred-cli` crate.
//!
//! - [`prob`]: finite pmfs, Beta distributions, KL / entropy / mutual
//!   information in nats, plus exact multi-axis joint tables.
//! - [`metrics`]: τ-th order cross-entropy and expected KL of an agent's joint
//!   predictive, and the universality-gap certificate for decision problems.
//! - [`envs`]: the coin, the movie recommender, and Bernoulli bandit priors.
//! - [`agents`]: agents that imagine τ future outcome vectors.
//! - [`bandit`]: approximate Thompson sampling, baselines and regret accounting.
//! - [`seqpred`]: incremental agents in sequential prediction, verified by
//!   exhaustive enumeration.
//!
//! All logarithms are natural; every information quantity is in nats.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod bandit;
pub mod envs;
mod error;
pub mod math;
pub mod metrics;
pub mod prob;
mod rng;
pub mod seqpred;

pub use error::{Error, Result};
pub use rng::RngStream;
