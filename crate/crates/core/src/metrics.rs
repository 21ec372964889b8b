//! τ-th order cross-entropy and expected KL of an agent's joint predictive,
//! and the universality-gap certificate for finite decision problems.
//!
//! Predictive scenarios here are bandit-shaped: an input is an arm index and
//! a label is that arm's binary outcome. The training inputs `X_0..X_{T−1}`
//! and test inputs `X_T..X_{T+τ−1}` are fixed lists chosen per scenario.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::agents::{AgentKind, AgentState, EnsembleConfig};
use crate::envs::EnvModel;
use crate::math::{ln, pairwise_sum, sqrt, xlog_ratio, Estimate};
use crate::prob::{kl_divergence, FinitePmf};
use crate::{Error, Result, RngStream};

/// Largest `T + τ` handled by exact enumeration (`2^(T+τ)` table entries).
pub const ENUMERATION_CUTOFF_BITS: usize = 20;

/// `d_KL` between the posterior predictive joint and the agent's joint for
/// one realization of the data.
pub fn exact_dkl_tau<O: PartialEq>(posterior_joint: &FinitePmf<O>, agent_joint: &FinitePmf<O>) -> Result<f64> {
    kl_divergence(posterior_joint, agent_joint)
}

/// A data-generating process plus an agent to evaluate on it.
#[derive(Debug, Clone)]
pub struct PredictiveScenario {
    /// Prior the environment is actually drawn from.
    pub env_prior: EnvModel,
    /// Prior the agent starts from; equal to `env_prior` for a well-specified agent.
    pub agent_prior: EnvModel,
    pub agent_kind: AgentKind,
    pub ensemble: EnsembleConfig,
    /// Arms pulled to build the training data `D_T`.
    pub train_arms: Vec<usize>,
    /// Arms whose joint outcome is predicted; its length is τ.
    pub test_arms: Vec<usize>,
}

impl PredictiveScenario {
    /// An agent that starts from the true prior.
    pub fn well_specified(env_prior: EnvModel, agent_kind: AgentKind, train_arms: Vec<usize>, test_arms: Vec<usize>) -> Self {
        Self {
            agent_prior: env_prior.clone(),
            env_prior,
            agent_kind,
            ensemble: EnsembleConfig::default(),
            train_arms,
            test_arms,
        }
    }

    pub fn tau(&self) -> usize {
        self.test_arms.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.test_arms.is_empty() {
            return Err(Error::InvalidArgument("tau must be at least 1".into()));
        }
        let k = self.env_prior.n_arms();
        if self.agent_prior.n_arms() != k {
            return Err(Error::InvalidArgument(format!(
                "agent prior has {} arms, environment has {k}",
                self.agent_prior.n_arms()
            )));
        }
        if let Some(&a) = self.train_arms.iter().chain(&self.test_arms).find(|&&a| a >= k) {
            return Err(Error::IndexOutOfRange { index: a, len: k });
        }
        Ok(())
    }

    fn fresh_agent(&self, rng: RngStream) -> Result<AgentState> {
        AgentState::new(self.agent_kind, &self.agent_prior, self.ensemble, rng)
    }

    fn bayes_agent(&self) -> Result<AgentState> {
        AgentState::new(
            AgentKind::ExactPosterior,
            &self.env_prior,
            EnsembleConfig::default(),
            RngStream::new(0, 0),
        )
    }
}

/// Monte-Carlo cross-entropy estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossEntropyEstimate {
    /// Mean of `−ln P̂(Y)`; `+inf` when any draw had `P̂(Y) = 0`.
    pub mean: f64,
    /// Standard error over the finite draws.
    pub std_error: f64,
    pub n: usize,
    /// Draws whose observed test labels got zero agent probability.
    pub infinite_count: usize,
}

/// Estimates `d_CE^τ` by drawing `(𝓔, D_T, Y)` `n_samples` times.
///
/// Draw `i` uses stream `i` of `master_seed`, so the estimate does not depend
/// on how draws are scheduled.
pub fn mc_cross_entropy(scenario: &PredictiveScenario, n_samples: usize, master_seed: u64) -> Result<CrossEntropyEstimate> {
    scenario.validate()?;
    let mut losses = Vec::with_capacity(n_samples);
    let mut infinite_count = 0;
    for i in 0..n_samples {
        let base = RngStream::new(master_seed, i as u64);
        let mut env_rng = base.substream(0);
        let env = scenario.env_prior.sample(&mut env_rng);
        let mut agent = scenario.fresh_agent(base.substream(1))?;
        let mut impossible = false;
        for &a in &scenario.train_arms {
            let y = env.step(a, &mut env_rng)?;
            if let Err(Error::Contradiction(_)) = agent.update(a, y) {
                impossible = true;
                break;
            }
        }
        let labels: Vec<u8> = scenario
            .test_arms
            .iter()
            .map(|&a| env.step(a, &mut env_rng))
            .collect::<Result<_>>()?;
        let p = if impossible { 0.0 } else { agent.sequence_prob(&scenario.test_arms, &labels)? };
        if p > 0.0 {
            losses.push(-ln(p));
        } else {
            infinite_count += 1;
        }
    }
    let est = Estimate::from_samples(&losses);
    Ok(CrossEntropyEstimate {
        mean: if infinite_count > 0 { f64::INFINITY } else { est.mean },
        std_error: est.std_error,
        n: n_samples,
        infinite_count,
    })
}

/// Exact `d_CE^τ` and `d_KL^τ` of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveMetrics {
    pub d_ce: f64,
    pub d_kl: f64,
    /// `E[H(P̄)]`, the part of `d_CE` no agent can remove.
    pub posterior_entropy: f64,
}

fn code_labels(code: u32, len: usize) -> Vec<u8> {
    (0..len).map(|i| (code >> i & 1) as u8).collect()
}

/// Exact metrics by enumerating every training dataset and every test-label
/// sequence. The ensemble agent's members are drawn once from `agent_seed`.
pub fn exact_predictive_metrics(scenario: &PredictiveScenario, agent_seed: u64) -> Result<PredictiveMetrics> {
    scenario.validate()?;
    let t_len = scenario.train_arms.len();
    let tau = scenario.tau();
    if t_len + tau > ENUMERATION_CUTOFF_BITS {
        return Err(Error::EnumerationCutoff {
            required: 1u128 << (t_len + tau).min(127),
            cutoff: 1u128 << ENUMERATION_CUTOFF_BITS,
        });
    }
    let bayes0 = scenario.bayes_agent()?;
    let agent0 = scenario.fresh_agent(RngStream::new(agent_seed, 0))?;
    let (mut ce, mut kl, mut ent) = (Vec::new(), Vec::new(), Vec::new());
    for d_code in 0..1u32 << t_len {
        let data = code_labels(d_code, t_len);
        let p_data = bayes0.sequence_prob(&scenario.train_arms, &data)?;
        if p_data <= 0.0 {
            continue;
        }
        let mut bayes = bayes0.clone();
        let mut agent = agent0.clone();
        let mut agent_ok = true;
        for (&a, &y) in scenario.train_arms.iter().zip(&data) {
            bayes.update(a, y)?;
            match agent.update(a, y) {
                Ok(()) => {}
                Err(Error::Contradiction(_)) => agent_ok = false,
                Err(e) => return Err(e),
            }
        }
        for y_code in 0..1u32 << tau {
            let labels = code_labels(y_code, tau);
            let pbar = bayes.sequence_prob(&scenario.test_arms, &labels)?;
            if pbar <= 0.0 {
                continue;
            }
            let phat = if agent_ok { agent.sequence_prob(&scenario.test_arms, &labels)? } else { 0.0 };
            let w = p_data * pbar;
            ce.push(if phat > 0.0 { -w * ln(phat) } else { f64::INFINITY });
            kl.push(p_data * xlog_ratio(pbar, phat));
            ent.push(-w * ln(pbar));
        }
    }
    let total = |v: &[f64]| {
        if v.iter().any(|x| x.is_infinite()) {
            f64::INFINITY
        } else {
            pairwise_sum(v)
        }
    };
    Ok(PredictiveMetrics {
        d_ce: total(&ce),
        d_kl: total(&kl).max(0.0),
        posterior_entropy: pairwise_sum(&ent),
    })
}

/// Finite actions, a finite outcome space and rewards in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProblem<O> {
    n_actions: usize,
    outcomes: Vec<O>,
    /// Row-major `[action][outcome]`.
    rewards: Vec<f64>,
}

impl<O: PartialEq> DecisionProblem<O> {
    /// Tabulates `reward(a, y)` over every action and outcome.
    pub fn new(n_actions: usize, outcomes: Vec<O>, reward: impl Fn(usize, &O) -> f64) -> Result<Self> {
        if n_actions == 0 {
            return Err(Error::InvalidArgument("decision problem needs at least one action".into()));
        }
        let mut rewards = Vec::with_capacity(n_actions * outcomes.len());
        for a in 0..n_actions {
            for y in &outcomes {
                let r = reward(a, y);
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::RewardOutOfRange { action: a, value: r });
                }
                rewards.push(r);
            }
        }
        Ok(Self {
            n_actions,
            outcomes,
            rewards,
        })
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn outcomes(&self) -> &[O] {
        &self.outcomes
    }

    pub fn reward(&self, action: usize, outcome_index: usize) -> f64 {
        self.rewards[action * self.outcomes.len() + outcome_index]
    }

    pub fn expected_reward(&self, action: usize, dist: &FinitePmf<O>) -> Result<f64> {
        if dist.outcomes() != self.outcomes.as_slice() {
            return Err(Error::OutcomeMismatch);
        }
        if action >= self.n_actions {
            return Err(Error::IndexOutOfRange {
                index: action,
                len: self.n_actions,
            });
        }
        let row = &self.rewards[action * self.outcomes.len()..(action + 1) * self.outcomes.len()];
        let terms: Vec<f64> = row.iter().zip(dist.probs()).map(|(r, p)| r * p).collect();
        Ok(pairwise_sum(&terms))
    }

    /// Smallest action maximizing expected reward under `dist`.
    pub fn best_action(&self, dist: &FinitePmf<O>) -> Result<usize> {
        let values: Vec<f64> = (0..self.n_actions)
            .map(|a| self.expected_reward(a, dist))
            .collect::<Result<_>>()?;
        Ok(crate::bandit::min_argmax(&values))
    }
}

/// Outcome of [`universality_gap`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalityGap {
    /// Posterior-expected reward lost by acting on the agent's joint.
    pub gap: f64,
    /// `sqrt(2 · d_KL)`.
    pub bound: f64,
    pub d_kl: f64,
    pub holds: bool,
    pub agent_action: usize,
    pub best_action: usize,
}

/// Loss from choosing the action that is best under `agent_joint` when
/// outcomes really follow `posterior_joint`, against `sqrt(2 d_KL)`.
pub fn universality_gap<O: PartialEq>(
    dp: &DecisionProblem<O>,
    posterior_joint: &FinitePmf<O>,
    agent_joint: &FinitePmf<O>,
) -> Result<UniversalityGap> {
    let d_kl = exact_dkl_tau(posterior_joint, agent_joint)?;
    let agent_action = dp.best_action(agent_joint)?;
    let best_action = dp.best_action(posterior_joint)?;
    let gap = dp.expected_reward(best_action, posterior_joint)? - dp.expected_reward(agent_action, posterior_joint)?;
    let bound = sqrt(2.0 * d_kl);
    Ok(UniversalityGap {
        gap,
        bound,
        d_kl,
        holds: gap <= bound + 1e-10,
        agent_action,
        best_action,
    })
}

/// Random decision problem over binary sequences of length `tau` with
/// `n_actions` actions and uniform `[0,1]` rewards, plus two random joints.
/// Used for randomized checks of the certificate.
pub fn random_decision_instance(
    n_actions: usize,
    tau: usize,
    rng: &mut RngStream,
) -> Result<(DecisionProblem<u32>, FinitePmf<u32>, FinitePmf<u32>)> {
    let n = 1usize << tau;
    let table: Vec<f64> = (0..n_actions * n).map(|_| rng.uniform()).collect();
    let outcomes: Vec<u32> = (0..n as u32).collect();
    let dp = DecisionProblem::new(n_actions, outcomes.clone(), |a, &y| table[a * n + y as usize])?;
    let mut draw = || -> Result<FinitePmf<u32>> {
        // Occasionally zero out entries so supports differ.
        let mut w: Vec<f64> = (0..n)
            .map(|_| if rng.uniform() < 0.15 { 0.0 } else { -ln(1.0 - rng.uniform()) })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        FinitePmf::new(outcomes.clone(), w.iter().map(|x| x / s).collect())
    };
    let p = draw()?;
    let q = draw()?;
    Ok((dp, p, q))
}

/// `d_CE` for a list of agent joints against one posterior joint, all over
/// the same outcomes: `−Σ P̄(y) ln P̂(y)`.
pub fn cross_entropy_of<O: PartialEq>(posterior_joint: &FinitePmf<O>, agent_joint: &FinitePmf<O>) -> Result<f64> {
    if posterior_joint.outcomes() != agent_joint.outcomes() {
        return Err(Error::OutcomeMismatch);
    }
    let mut terms = vec![];
    for (&p, &q) in posterior_joint.probs().iter().zip(agent_joint.probs()) {
        if p > 0.0 {
            if q <= 0.0 {
                return Ok(f64::INFINITY);
            }
            terms.push(-p * ln(q));
        }
    }
    Ok(pairwise_sum(&terms))
}
