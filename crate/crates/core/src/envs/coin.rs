//! The biased coin with two agents that agree on every marginal.
//!
//! Agent 1 believes `p = 2/3` and tosses independently. Agent 2 believes the
//! coin is heads-only with probability 2/3 and tails-only otherwise. Joint
//! pmfs over τ tosses encode toss `i` in bit `i` (1 = heads).

use alloc::vec;

use crate::envs::EnvModel;
use crate::math::exp;
use crate::prob::{binary_sequence_pmf, FinitePmf};
use crate::Result;

pub const HEADS_PROB: f64 = 2.0 / 3.0;

/// Agent 1's belief as a one-armed bandit prior: `p = 2/3` surely.
pub fn agent1_prior() -> EnvModel {
    EnvModel::finite_hypothesis(vec![(1.0, vec![HEADS_PROB])]).expect("valid coin prior")
}

/// Agent 2's belief, also used as the true coin prior: heads-only w.p. 2/3,
/// tails-only w.p. 1/3.
pub fn agent2_prior() -> EnvModel {
    EnvModel::finite_hypothesis(vec![(HEADS_PROB, vec![1.0]), (1.0 - HEADS_PROB, vec![0.0])])
        .expect("valid coin prior")
}

/// Closed-form joint predictive pmfs of the two coin agents.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoinAgents;

/// Both agents' joints.
pub fn coin_agents() -> CoinAgents {
    CoinAgents
}

impl CoinAgents {
    /// Product of `Ber(2/3)` over τ tosses.
    pub fn agent1_joint(&self, tau: usize) -> Result<FinitePmf<u32>> {
        let (lh, lt) = (crate::math::ln(HEADS_PROB), crate::math::ln(1.0 - HEADS_PROB));
        binary_sequence_pmf(tau, |code| {
            let heads = code.count_ones() as f64;
            exp(heads * lh + (tau as f64 - heads) * lt)
        })
    }

    /// All heads w.p. 2/3, all tails w.p. 1/3, nothing else.
    pub fn agent2_joint(&self, tau: usize) -> Result<FinitePmf<u32>> {
        let all_heads = if tau == 0 { 0 } else { (1u32 << tau) - 1 };
        binary_sequence_pmf(tau, |code| {
            if tau == 0 {
                1.0
            } else if code == all_heads {
                HEADS_PROB
            } else if code == 0 {
                1.0 - HEADS_PROB
            } else {
                0.0
            }
        })
    }
}
