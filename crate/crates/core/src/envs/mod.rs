//! Environment families: Bernoulli bandit priors, the biased coin and the
//! two-user-type movie recommender.
//!
//! Arms are 0-indexed here. Anything user-facing reports them 1-indexed.

pub mod coin;
pub mod recommender;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::prob::{BetaParams, NORMALIZATION_TOLERANCE};
use crate::{Error, Result, RngStream};

/// Default smoothing for deterministic hypotheses.
pub const DEFAULT_DELTA: f64 = 1e-6;

/// A weighted finite set of arm-probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    weights: Vec<f64>,
    arms: Vec<Vec<f64>>,
}

impl HypothesisSet {
    pub fn new(hypotheses: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let k = match hypotheses.first() {
            Some((_, p)) => p.len(),
            None => return Err(Error::InvalidDistribution("no hypotheses".into())),
        };
        if k == 0 {
            return Err(Error::InvalidDistribution("hypotheses need at least one arm".into()));
        }
        let mut weights = Vec::with_capacity(hypotheses.len());
        let mut arms = Vec::with_capacity(hypotheses.len());
        for (i, (w, p)) in hypotheses.into_iter().enumerate() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidDistribution(format!("hypothesis {i} weight {w}")));
            }
            if p.len() != k {
                return Err(Error::InvalidDistribution(format!(
                    "hypothesis {i} has {} arms, expected {k}",
                    p.len()
                )));
            }
            if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidDistribution(format!(
                    "hypothesis {i} has arm probability {x}"
                )));
            }
            weights.push(w);
            arms.push(p);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("hypothesis weights sum to {total}")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { weights, arms })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Arm-probability vector of every hypothesis.
    pub fn arms(&self) -> &[Vec<f64>] {
        &self.arms
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn n_arms(&self) -> usize {
        self.arms[0].len()
    }
}

/// Prior over K-armed Bernoulli bandit environments.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvModel {
    /// Independent `Beta(α_k, β_k)` prior per arm.
    IndependentBeta(Vec<BetaParams>),
    /// Finite set of arm-probability vectors with prior weights.
    FiniteHypothesis(HypothesisSet),
}

impl EnvModel {
    pub fn independent_beta(priors: Vec<BetaParams>) -> Result<Self> {
        if priors.is_empty() {
            return Err(Error::InvalidArgument("bandit needs at least one arm".into()));
        }
        Ok(EnvModel::IndependentBeta(priors))
    }

    /// K arms, each with a Beta(1,1) prior.
    pub fn uniform_beta(k: usize) -> Result<Self> {
        Self::independent_beta(vec![BetaParams::uniform(); k])
    }

    pub fn finite_hypothesis(hypotheses: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        Ok(EnvModel::FiniteHypothesis(HypothesisSet::new(hypotheses)?))
    }

    /// The informative-arm bandit: arms `0..K-1` pay `Ber(0.5)` under both
    /// hypotheses; the last arm pays `1 − δ` under one and `δ` under the
    /// other, each with prior weight one half.
    ///
    /// `δ = 0` makes the last arm deterministic; that is only safe for exact
    /// enumeration, since imagined data can then contradict every hypothesis.
    pub fn informative_arm(k: usize, delta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("informative-arm bandit needs K >= 2, got {k}")));
        }
        if !(0.0..0.5).contains(&delta) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 0.5), got {delta}")));
        }
        let mut high = vec![0.5; k];
        let mut low = vec![0.5; k];
        high[k - 1] = 1.0 - delta;
        low[k - 1] = delta;
        Self::finite_hypothesis(vec![(0.5, high), (0.5, low)])
    }

    pub fn n_arms(&self) -> usize {
        match self {
            EnvModel::IndependentBeta(b) => b.len(),
            EnvModel::FiniteHypothesis(h) => h.n_arms(),
        }
    }

    /// Prior mean of each arm's success probability.
    pub fn marginal_means(&self) -> Vec<f64> {
        match self {
            EnvModel::IndependentBeta(b) => b.iter().map(BetaParams::mean).collect(),
            EnvModel::FiniteHypothesis(h) => {
                let mut m = vec![0.0; h.n_arms()];
                for (w, p) in h.weights.iter().zip(&h.arms) {
                    for (mk, pk) in m.iter_mut().zip(p) {
                        *mk += w * pk;
                    }
                }
                m
            }
        }
    }

    /// Draws an environment from the prior.
    pub fn sample(&self, rng: &mut RngStream) -> SampledEnv {
        match self {
            EnvModel::IndependentBeta(b) => SampledEnv {
                p: b.iter().map(|x| x.sample(rng)).collect(),
            },
            EnvModel::FiniteHypothesis(h) => {
                let i = crate::prob::sample_weighted_index(&h.weights, rng);
                SampledEnv { p: h.arms[i].clone() }
            }
        }
    }
}

/// One realized bandit environment: arm success probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledEnv {
    p: Vec<f64>,
}

impl SampledEnv {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidArgument("arm probabilities must lie in [0, 1]".into()));
        }
        Ok(Self { p })
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    pub fn n_arms(&self) -> usize {
        self.p.len()
    }

    /// Pulls `arm` and returns the binary reward.
    pub fn step(&self, arm: usize, rng: &mut RngStream) -> Result<u8> {
        let p = *self.p.get(arm).ok_or(Error::IndexOutOfRange {
            index: arm,
            len: self.p.len(),
        })?;
        Ok(rng.bernoulli(p))
    }

    /// Smallest index among the best arms.
    pub fn best_arm(&self) -> usize {
        crate::bandit::min_argmax(&self.p)
    }

    pub fn p_star(&self) -> f64 {
        self.p[self.best_arm()]
    }
}
