//! Bandit agents that expose a joint predictive over τ future outcome vectors.
//!
//! Every agent predicts by first drawing an environment `p` from its belief
//! and then sampling τ conditionally independent K-vectors from `Ber(p)`. The
//! kinds differ only in what "draw an environment" means:
//!
//! | kind              | environment draw                          |
//! |-------------------|-------------------------------------------|
//! | `ExactPosterior`  | a sample from the exact posterior         |
//! | `MarginalProduct` | the posterior mean vector (deterministic) |
//! | `Ensemble`        | one member, chosen by its weight          |
//! | `StaticPrior`     | a sample from the prior, never updated    |
//!
//! Because of that structure, the probability of an imagined matrix depends
//! only on its column sums, which the bandit driver exploits.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Binomial, Distribution};

use crate::envs::EnvModel;
use crate::math::{exp, ln, log_sum_exp};
use crate::prob::{sample_weighted_index, BetaParams, FinitePmf};
use crate::{Error, Result, RngStream};

/// Largest `τ·K` for which [`AgentState::joint_pmf`] enumerates.
pub const JOINT_PMF_CUTOFF_BITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AgentKind {
    ExactPosterior,
    MarginalProduct,
    Ensemble,
    StaticPrior,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::ExactPosterior,
        AgentKind::MarginalProduct,
        AgentKind::Ensemble,
        AgentKind::StaticPrior,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::ExactPosterior => "exact_posterior",
            AgentKind::MarginalProduct => "marginal_product",
            AgentKind::Ensemble => "ensemble",
            AgentKind::StaticPrior => "static_prior",
        }
    }
}

/// Ensemble hyperparameters.
///
/// Members start as independent prior draws with equal weight. An update
/// multiplies each weight by the member's likelihood; when the effective
/// sample size `1 / Σ w²` falls below `resample_threshold · size`, members are
/// resampled multinomially by weight and the weights reset to uniform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub size: usize,
    pub resample_threshold: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: 10,
            resample_threshold: 0.5,
        }
    }
}

/// τ imagined outcome vectors, stored row-major (`t * K + k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImaginedOutcomes {
    tau: usize,
    k: usize,
    bits: Vec<u8>,
}

impl ImaginedOutcomes {
    pub fn new(tau: usize, k: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != tau * k {
            return Err(Error::InvalidArgument(format!(
                "{} entries for a {tau}x{k} matrix",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("imagined outcomes must be 0 or 1".into()));
        }
        Ok(Self { tau, k, bits })
    }

    /// Matrix with element `(t, k)` taken from bit `t * K + k` of `code`.
    pub fn from_code(tau: usize, k: usize, code: u32) -> Self {
        let bits = (0..tau * k).map(|i| (code >> i & 1) as u8).collect();
        Self { tau, k, bits }
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn n_arms(&self) -> usize {
        self.k
    }

    pub fn get(&self, t: usize, k: usize) -> u8 {
        self.bits[t * self.k + k]
    }

    pub fn row(&self, t: usize) -> &[u8] {
        &self.bits[t * self.k..(t + 1) * self.k]
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut s = vec![0u64; self.k];
        for row in self.bits.chunks(self.k.max(1)) {
            for (sk, &b) in s.iter_mut().zip(row) {
                *sk += u64::from(b);
            }
        }
        s
    }

    /// Column means; all zeros when `τ = 0`.
    pub fn column_means(&self) -> Vec<f64> {
        let denom = self.tau.max(1) as f64;
        self.column_sums().iter().map(|&s| s as f64 / denom).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Belief {
    Beta(Vec<BetaParams>),
    /// Normalized weights over fixed arm vectors. Ensembles use this too.
    Weighted { weights: Vec<f64>, arms: Vec<Vec<f64>> },
}

/// An agent's parameters θ_t together with its private random stream.
#[derive(Debug, Clone)]
pub struct AgentState {
    kind: AgentKind,
    belief: Belief,
    ensemble: EnsembleConfig,
    rng: RngStream,
    resamples: u64,
}

impl AgentState {
    /// A fresh agent whose belief is `prior`. Ensemble members are drawn
    /// from `prior` with `rng`, which the agent then keeps.
    pub fn new(kind: AgentKind, prior: &EnvModel, ensemble: EnsembleConfig, mut rng: RngStream) -> Result<Self> {
        let belief = match kind {
            AgentKind::Ensemble => {
                if ensemble.size == 0 {
                    return Err(Error::InvalidArgument("ensemble size must be positive".into()));
                }
                if !(0.0..=1.0).contains(&ensemble.resample_threshold) {
                    return Err(Error::InvalidArgument(format!(
                        "resample threshold {} outside [0, 1]",
                        ensemble.resample_threshold
                    )));
                }
                let arms: Vec<Vec<f64>> = (0..ensemble.size)
                    .map(|_| prior.sample(&mut rng).probs().to_vec())
                    .collect();
                Belief::Weighted {
                    weights: vec![1.0 / ensemble.size as f64; ensemble.size],
                    arms,
                }
            }
            _ => match prior {
                EnvModel::IndependentBeta(b) => Belief::Beta(b.clone()),
                EnvModel::FiniteHypothesis(h) => Belief::Weighted {
                    weights: h.weights().to_vec(),
                    arms: h.arms().to_vec(),
                },
            },
        };
        Ok(Self {
            kind,
            belief,
            ensemble,
            rng,
            resamples: 0,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn n_arms(&self) -> usize {
        match &self.belief {
            Belief::Beta(b) => b.len(),
            Belief::Weighted { arms, .. } => arms[0].len(),
        }
    }

    /// Per-arm Beta parameters, when the belief is conjugate.
    pub fn beta_params(&self) -> Option<&[BetaParams]> {
        match &self.belief {
            Belief::Beta(b) => Some(b),
            Belief::Weighted { .. } => None,
        }
    }

    /// Hypothesis (or ensemble member) weights.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.belief {
            Belief::Beta(_) => None,
            Belief::Weighted { weights, .. } => Some(weights),
        }
    }

    /// Arm vectors of the hypotheses or ensemble members.
    pub fn members(&self) -> Option<&[Vec<f64>]> {
        match &self.belief {
            Belief::Beta(_) => None,
            Belief::Weighted { arms, .. } => Some(arms),
        }
    }

    /// Number of ensemble resampling events so far.
    pub fn resamples(&self) -> u64 {
        self.resamples
    }

    /// Mean of each arm's success probability under the current belief.
    pub fn marginal_means(&self) -> Vec<f64> {
        match &self.belief {
            Belief::Beta(b) => b.iter().map(BetaParams::mean).collect(),
            Belief::Weighted { weights, arms } => {
                let mut m = vec![0.0; arms[0].len()];
                for (w, p) in weights.iter().zip(arms) {
                    for (mk, pk) in m.iter_mut().zip(p) {
                        *mk += w * pk;
                    }
                }
                m
            }
        }
    }

    /// Draws the environment the next imagined outcomes come from.
    pub fn sample_env(&mut self) -> Vec<f64> {
        if self.kind == AgentKind::MarginalProduct {
            return self.marginal_means();
        }
        match &self.belief {
            Belief::Beta(b) => b.iter().map(|x| x.sample(&mut self.rng)).collect(),
            Belief::Weighted { weights, arms } => arms[sample_weighted_index(weights, &mut self.rng)].clone(),
        }
    }

    /// Samples τ imagined outcome vectors from the agent's joint predictive.
    pub fn predict_joint(&mut self, tau: usize) -> ImaginedOutcomes {
        let p = self.sample_env();
        let k = p.len();
        let mut bits = Vec::with_capacity(tau * k);
        for _ in 0..tau {
            for &pk in &p {
                bits.push(self.rng.bernoulli(pk));
            }
        }
        ImaginedOutcomes { tau, k, bits }
    }

    /// Column sums of a [`predict_joint`](Self::predict_joint) draw, sampled
    /// directly (one binomial per arm instead of τ Bernoullis).
    pub fn predict_column_sums(&mut self, tau: usize) -> Vec<u64> {
        let p = self.sample_env();
        p.iter()
            .map(|&pk| binomial(tau as u64, pk, &mut self.rng))
            .collect()
    }

    /// Log-probability that the agent assigns to seeing `ones[k]` ones and
    /// `zeros[k]` zeros (in one particular order) on each arm `k`.
    pub fn ln_counts_prob(&self, ones: &[u64], zeros: &[u64]) -> f64 {
        if self.kind == AgentKind::MarginalProduct {
            return ln_product_prob(&self.marginal_means(), ones, zeros);
        }
        match &self.belief {
            Belief::Beta(b) => b
                .iter()
                .zip(ones.iter().zip(zeros))
                .map(|(bk, (&o, &z))| bk.ln_sequence_prob(o, z))
                .sum(),
            Belief::Weighted { weights, arms } => {
                let terms: Vec<f64> = weights
                    .iter()
                    .zip(arms)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, p)| ln(*w) + ln_product_prob(p, ones, zeros))
                    .collect();
                log_sum_exp(&terms)
            }
        }
    }

    /// Probability of observing `labels[i]` on arm `arms[i]` for every `i`,
    /// jointly, under the agent's predictive.
    pub fn sequence_prob(&self, arms: &[usize], labels: &[u8]) -> Result<f64> {
        if arms.len() != labels.len() {
            return Err(Error::InvalidArgument("arms and labels differ in length".into()));
        }
        let k = self.n_arms();
        let mut ones = vec![0u64; k];
        let mut zeros = vec![0u64; k];
        for (&a, &y) in arms.iter().zip(labels) {
            if a >= k {
                return Err(Error::IndexOutOfRange { index: a, len: k });
            }
            match y {
                0 => zeros[a] += 1,
                1 => ones[a] += 1,
                _ => return Err(Error::RewardOutOfRange { action: a, value: f64::from(y) }),
            }
        }
        Ok(exp(self.ln_counts_prob(&ones, &zeros)))
    }

    /// Exact pmf of [`predict_joint`](Self::predict_joint) over `{0,1}^{τ×K}`,
    /// element `(t, k)` in bit `t * K + k` of the outcome code.
    pub fn joint_pmf(&self, tau: usize) -> Result<FinitePmf<u32>> {
        let k = self.n_arms();
        let bits = tau * k;
        if bits > JOINT_PMF_CUTOFF_BITS {
            return Err(Error::EnumerationCutoff {
                required: 1u128 << bits.min(127),
                cutoff: 1u128 << JOINT_PMF_CUTOFF_BITS,
            });
        }
        let n = 1u32 << bits;
        let mut probs = Vec::with_capacity(n as usize);
        let mut ones = vec![0u64; k];
        for code in 0..n {
            ones.iter_mut().for_each(|o| *o = 0);
            for t in 0..tau {
                for (kk, o) in ones.iter_mut().enumerate() {
                    *o += u64::from(code >> (t * k + kk) & 1);
                }
            }
            let zeros: Vec<u64> = ones.iter().map(|&o| tau as u64 - o).collect();
            probs.push(exp(self.ln_counts_prob(&ones, &zeros)));
        }
        FinitePmf::new((0..n).collect(), probs)
    }

    /// Incorporates the observation `(arm, reward)`.
    pub fn update(&mut self, arm: usize, reward: u8) -> Result<()> {
        let k = self.n_arms();
        if arm >= k {
            return Err(Error::IndexOutOfRange { index: arm, len: k });
        }
        if reward > 1 {
            return Err(Error::RewardOutOfRange {
                action: arm,
                value: f64::from(reward),
            });
        }
        if self.kind == AgentKind::StaticPrior {
            return Ok(());
        }
        match &mut self.belief {
            Belief::Beta(b) => {
                let r = u64::from(reward);
                b[arm] = b[arm].update(r, 1 - r);
            }
            Belief::Weighted { weights, arms } => {
                for (w, p) in weights.iter_mut().zip(arms.iter()) {
                    *w *= if reward == 1 { p[arm] } else { 1.0 - p[arm] };
                }
                let total: f64 = weights.iter().sum();
                if total.is_nan() || total <= 0.0 {
                    return Err(Error::Contradiction(format!(
                        "reward {reward} on arm {} has zero probability under every {}",
                        arm + 1,
                        if self.kind == AgentKind::Ensemble { "ensemble member" } else { "hypothesis" }
                    )));
                }
                weights.iter_mut().for_each(|w| *w /= total);
                if self.kind == AgentKind::Ensemble {
                    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
                    if ess < self.ensemble.resample_threshold * weights.len() as f64 {
                        let picked: Vec<Vec<f64>> = (0..weights.len())
                            .map(|_| arms[sample_weighted_index(weights, &mut self.rng)].clone())
                            .collect();
                        *arms = picked;
                        let m = weights.len() as f64;
                        weights.iter_mut().for_each(|w| *w = 1.0 / m);
                        self.resamples += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// The state after observing `(arm, reward)`; `self` is left untouched.
    pub fn updated(&self, arm: usize, reward: u8) -> Result<Self> {
        let mut next = self.clone();
        next.update(arm, reward)?;
        Ok(next)
    }

    /// Same belief, ignoring the random stream.
    pub fn same_belief(&self, other: &AgentState) -> bool {
        self.kind == other.kind && self.belief == other.belief
    }
}

/// `Σ_k ones_k ln p_k + zeros_k ln(1 − p_k)` with `0 · ln 0 = 0`.
pub(crate) fn ln_product_prob(p: &[f64], ones: &[u64], zeros: &[u64]) -> f64 {
    let mut acc = 0.0;
    for ((&pk, &o), &z) in p.iter().zip(ones).zip(zeros) {
        if o > 0 {
            acc += o as f64 * ln(pk);
        }
        if z > 0 {
            acc += z as f64 * ln(1.0 - pk);
        }
    }
    acc
}

pub(crate) fn binomial(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("p lies in (0, 1)").sample(rng)
}
