//! Approximate Thompson sampling driven by imagined outcomes, its exact and
//! naive baselines, and regret accounting.
//!
//! One approximate-TS step: the agent imagines τ outcome vectors `Ŷ_{1:τ}`;
//! the true prior is conditioned on them as if they were real data; an
//! environment `p̂` is drawn from that conditional; the action is the
//! smallest index maximizing `p̂`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::agents::{binomial, ln_product_prob, AgentKind, AgentState, EnsembleConfig, ImaginedOutcomes};
use crate::envs::{EnvModel, SampledEnv};
use crate::math::{exp, ln, sqrt, Estimate};
use crate::prob::sample_weighted_index;
use crate::{Error, Result, RngStream};

/// Smallest index attaining the maximum, by exact comparison. NaNs are skipped.
pub fn min_argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if x > best_val {
            best = i;
            best_val = x;
        }
    }
    best
}

/// Uniformly random index among the maximizers.
fn random_argmax(xs: &[f64], rng: &mut RngStream) -> usize {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..xs.len()).filter(|&i| xs[i] == max).collect();
    ties[rng.index(ties.len())]
}

/// The observed history `(A_0, Y_1, …, A_{t−1}, Y_t)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BanditHistory {
    steps: Vec<(usize, u8)>,
}

impl BanditHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, arm: usize, reward: u8) -> Result<()> {
        if reward > 1 {
            return Err(Error::RewardOutOfRange {
                action: arm,
                value: f64::from(reward),
            });
        }
        self.steps.push((arm, reward));
        Ok(())
    }

    pub fn steps(&self) -> &[(usize, u8)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// How `p̂` is formed from the imagined outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TsVariant {
    /// Draw `p̂` from the prior conditioned on the imagined outcomes.
    #[default]
    PosteriorSample,
    /// Use the column means of the imagined outcomes.
    SampleMean,
}

/// An environment drawn from a conditional posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDraw {
    pub env: SampledEnv,
    /// The imagined data had zero likelihood under every hypothesis, so the
    /// draw fell back to the prior.
    pub contradiction: bool,
}

/// Draws `p̂ ~ P(p | Ỹ_{1:τ} = imagined)` under `prior`.
pub fn conditional_posterior_given_imagined(
    prior: &EnvModel,
    imagined: &ImaginedOutcomes,
    rng: &mut RngStream,
) -> Result<ConditionalDraw> {
    if imagined.n_arms() != prior.n_arms() && imagined.tau() > 0 {
        return Err(Error::InvalidArgument(format!(
            "imagined outcomes have {} arms, prior has {}",
            imagined.n_arms(),
            prior.n_arms()
        )));
    }
    let sums = if imagined.tau() == 0 {
        vec![0; prior.n_arms()]
    } else {
        imagined.column_sums()
    };
    conditional_posterior_given_counts(prior, &sums, imagined.tau() as u64, rng)
}

/// Same as [`conditional_posterior_given_imagined`], from column sums: the
/// conditional depends on the matrix only through them.
pub fn conditional_posterior_given_counts(
    prior: &EnvModel,
    ones: &[u64],
    tau: u64,
    rng: &mut RngStream,
) -> Result<ConditionalDraw> {
    if ones.len() != prior.n_arms() {
        return Err(Error::InvalidArgument(format!(
            "{} column sums for {} arms",
            ones.len(),
            prior.n_arms()
        )));
    }
    if ones.iter().any(|&s| s > tau) {
        return Err(Error::InvalidArgument("column sum exceeds tau".into()));
    }
    match prior {
        EnvModel::IndependentBeta(b) => {
            let p = b
                .iter()
                .zip(ones)
                .map(|(bk, &s)| bk.update(s, tau - s).sample(rng))
                .collect();
            Ok(ConditionalDraw {
                env: SampledEnv::new(p)?,
                contradiction: false,
            })
        }
        EnvModel::FiniteHypothesis(h) => {
            let zeros: Vec<u64> = ones.iter().map(|&s| tau - s).collect();
            let lw: Vec<f64> = h
                .weights()
                .iter()
                .zip(h.arms())
                .map(|(&w, p)| if w > 0.0 { ln(w) + ln_product_prob(p, ones, &zeros) } else { f64::NEG_INFINITY })
                .collect();
            let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (weights, contradiction) = if max == f64::NEG_INFINITY {
                (h.weights().to_vec(), true)
            } else {
                let w: Vec<f64> = lw.iter().map(|&x| exp(x - max)).collect();
                let s: f64 = w.iter().sum();
                (w.iter().map(|x| x / s).collect(), false)
            };
            let i = sample_weighted_index(&weights, rng);
            Ok(ConditionalDraw {
                env: SampledEnv::new(h.arms()[i].clone())?,
                contradiction,
            })
        }
    }
}

/// One approximate-TS decision.
#[derive(Debug, Clone, PartialEq)]
pub struct TsStepRecord {
    pub imagined: ImaginedOutcomes,
    pub p_hat: Vec<f64>,
    pub action: usize,
    /// Filled in once the environment responds.
    pub reward: Option<u8>,
    pub contradiction: bool,
}

/// Imagine, condition, act. The reward is left unset.
pub fn approx_ts_step(
    agent: &mut AgentState,
    prior: &EnvModel,
    tau: usize,
    variant: TsVariant,
    rng: &mut RngStream,
) -> Result<TsStepRecord> {
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be at least 1".into()));
    }
    let imagined = agent.predict_joint(tau);
    let (p_hat, contradiction) = match variant {
        TsVariant::SampleMean => (imagined.column_means(), false),
        TsVariant::PosteriorSample => {
            let d = conditional_posterior_given_imagined(prior, &imagined, rng)?;
            (d.env.probs().to_vec(), d.contradiction)
        }
    };
    let action = min_argmax(&p_hat);
    Ok(TsStepRecord {
        imagined,
        p_hat,
        action,
        reward: None,
        contradiction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Approximate TS from the agent's imagined outcomes.
    ApproxTs,
    /// TS with a direct draw from the exact posterior.
    ExactTs,
    /// Best posterior marginal mean, ties broken uniformly at random.
    GreedyMarginal,
    UniformRandom,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::ApproxTs, Policy::ExactTs, Policy::GreedyMarginal, Policy::UniformRandom];

    pub fn name(self) -> &'static str {
        match self {
            Policy::ApproxTs => "approx_ts",
            Policy::ExactTs => "exact_ts",
            Policy::GreedyMarginal => "greedy_marginal",
            Policy::UniformRandom => "uniform_random",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BanditConfig {
    pub env: EnvModel,
    pub policy: Policy,
    pub agent: AgentKind,
    pub ensemble: EnsembleConfig,
    pub horizon: usize,
    pub tau: usize,
    pub variant: TsVariant,
    pub replications: usize,
    pub master_seed: u64,
}

impl BanditConfig {
    /// Exact-posterior agent, posterior-sample variant, default ensemble.
    pub fn new(env: EnvModel, policy: Policy, horizon: usize, tau: usize, replications: usize, master_seed: u64) -> Self {
        Self {
            env,
            policy,
            agent: AgentKind::ExactPosterior,
            ensemble: EnsembleConfig::default(),
            horizon,
            tau,
            variant: TsVariant::PosteriorSample,
            replications,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.policy == Policy::ApproxTs && self.tau == 0 {
            return Err(Error::InvalidArgument("tau must be at least 1".into()));
        }
        if self.policy == Policy::ExactTs && self.agent != AgentKind::ExactPosterior {
            return Err(Error::InvalidArgument(format!(
                "exact_ts needs the exact_posterior agent, got {}",
                self.agent.name()
            )));
        }
        Ok(())
    }
}

/// One step of a replication; `t` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub action: usize,
    pub reward: u8,
    pub step_regret: f64,
    pub cum_regret: f64,
}

/// Everything recorded in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub replication: u64,
    /// `max_k p_k` of the realized environment.
    pub p_star: f64,
    pub env: SampledEnv,
    pub rows: Vec<TraceRow>,
    /// Fallbacks to the prior in the conditional-posterior draw.
    pub contradictions: u64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Step (from 1) at which `arm` was first pulled.
    pub fn first_pull(&self, arm: usize) -> Option<usize> {
        self.rows.iter().find(|r| r.action == arm).map(|r| r.t)
    }
}

/// Runs replication `replication` of `cfg`.
///
/// Stream layout under `(master_seed, replication)`: substream 0 drives the
/// environment (prior draw and rewards), 1 the agent, 2 the policy.
pub fn run_replication(cfg: &BanditConfig, replication: u64) -> Result<RegretTrace> {
    cfg.validate()?;
    let base = RngStream::new(cfg.master_seed, replication);
    let mut env_rng = base.substream(0);
    let mut policy_rng = base.substream(2);
    let env = cfg.env.sample(&mut env_rng);
    let mut agent = AgentState::new(cfg.agent, &cfg.env, cfg.ensemble, base.substream(1))?;
    let k = env.n_arms();
    let p = env.probs().to_vec();
    let p_star = env.p_star();
    let mut rows = Vec::with_capacity(cfg.horizon);
    let mut cum = 0.0;
    let mut contradictions = 0;
    for t in 1..=cfg.horizon {
        let action = match cfg.policy {
            Policy::ApproxTs => {
                let sums = agent.predict_column_sums(cfg.tau);
                match cfg.variant {
                    TsVariant::SampleMean => {
                        let m: Vec<f64> = sums.iter().map(|&s| s as f64 / cfg.tau as f64).collect();
                        min_argmax(&m)
                    }
                    TsVariant::PosteriorSample => {
                        let d = conditional_posterior_given_counts(&cfg.env, &sums, cfg.tau as u64, &mut policy_rng)?;
                        contradictions += u64::from(d.contradiction);
                        min_argmax(d.env.probs())
                    }
                }
            }
            Policy::ExactTs => min_argmax(&agent.sample_env()),
            Policy::GreedyMarginal => random_argmax(&agent.marginal_means(), &mut policy_rng),
            Policy::UniformRandom => policy_rng.index(k),
        };
        let reward = env.step(action, &mut env_rng)?;
        agent.update(action, reward)?;
        let step_regret = p_star - p[action];
        cum += step_regret;
        rows.push(TraceRow {
            t,
            action,
            reward,
            step_regret,
            cum_regret: cum,
        });
    }
    Ok(RegretTrace {
        replication,
        p_star,
        env,
        rows,
        contradictions,
    })
}

/// Across-replication statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditSummary {
    pub horizon: usize,
    pub replications: usize,
    /// Mean cumulative regret after step `t`, index `t − 1`.
    pub mean_cum_regret: Vec<f64>,
    pub std_error: Vec<f64>,
    pub final_regret: Estimate,
    /// Present when `K ≥ 2`; `ε = 0` is assumed.
    pub theorem2_bound: Option<f64>,
    /// Final mean regret is within the bound plus five standard errors.
    pub bound_holds: Option<bool>,
    pub contradictions: u64,
    /// Mean step of the first pull per arm; unpulled replications count as `T + 1`.
    pub mean_first_pull: Vec<f64>,
    /// Replications that never pulled each arm.
    pub never_pulled: Vec<usize>,
}

/// Aggregates traces in the order given.
pub fn summarize(cfg: &BanditConfig, traces: &[RegretTrace]) -> BanditSummary {
    let horizon = cfg.horizon;
    let k = cfg.env.n_arms();
    let mut mean_cum_regret = Vec::with_capacity(horizon);
    let mut std_error = Vec::with_capacity(horizon);
    let mut column = Vec::with_capacity(traces.len());
    for t in 0..horizon {
        column.clear();
        column.extend(traces.iter().map(|tr| tr.rows[t].cum_regret));
        let e = Estimate::from_samples(&column);
        mean_cum_regret.push(e.mean);
        std_error.push(e.std_error);
    }
    let finals: Vec<f64> = traces.iter().map(RegretTrace::final_regret).collect();
    let final_regret = Estimate::from_samples(&finals);
    let tau = if cfg.policy == Policy::ApproxTs { cfg.tau as f64 } else { f64::INFINITY };
    let theorem2 = (k >= 2).then(|| theorem2_bound(k, horizon, tau, 0.0));
    let mut mean_first_pull = Vec::with_capacity(k);
    let mut never_pulled = Vec::with_capacity(k);
    for arm in 0..k {
        let firsts: Vec<f64> = traces
            .iter()
            .map(|tr| tr.first_pull(arm).unwrap_or(horizon + 1) as f64)
            .collect();
        mean_first_pull.push(Estimate::from_samples(&firsts).mean);
        never_pulled.push(traces.iter().filter(|tr| tr.first_pull(arm).is_none()).count());
    }
    BanditSummary {
        horizon,
        replications: traces.len(),
        mean_cum_regret,
        std_error,
        final_regret,
        theorem2_bound: theorem2,
        bound_holds: theorem2.map(|b| final_regret.mean <= b + 5.0 * final_regret.std_error),
        contradictions: traces.iter().map(|t| t.contradictions).sum(),
        mean_first_pull,
        never_pulled,
    }
}

/// Runs every replication in order.
pub fn run_bandit(cfg: &BanditConfig) -> Result<(Vec<RegretTrace>, BanditSummary)> {
    cfg.validate()?;
    let traces = (0..cfg.replications as u64)
        .map(|r| run_replication(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(cfg, &traces);
    Ok((traces, summary))
}

/// `sqrt(½ K T ln K) + (K / sqrt(2τ) + sqrt(2ε)) T`. Pass `f64::INFINITY`
/// for `tau` to drop the imagination term.
pub fn theorem2_bound(k: usize, horizon: usize, tau: f64, epsilon: f64) -> f64 {
    let (kf, tf) = (k as f64, horizon as f64);
    let imagination = if tau.is_infinite() { 0.0 } else { kf / sqrt(2.0 * tau) };
    sqrt(0.5 * kf * tf * ln(kf)) + (imagination + sqrt(2.0 * epsilon)) * tf
}

/// Monte-Carlo estimate of `E[p_{A*} − p_Ã]`, where `Ã` is the min argmax of
/// a draw from the prior conditioned on τ real outcomes per arm.
///
/// Sample `i` uses stream `i` of `master_seed`.
pub fn target_suboptimality(env_model: &EnvModel, tau: usize, n_mc: usize, master_seed: u64) -> Result<Estimate> {
    if tau == 0 {
        return Err(Error::InvalidArgument("tau must be at least 1".into()));
    }
    let mut gaps = Vec::with_capacity(n_mc);
    for i in 0..n_mc {
        let mut rng = RngStream::new(master_seed, i as u64);
        let env = env_model.sample(&mut rng);
        let sums: Vec<u64> = env.probs().iter().map(|&p| binomial(tau as u64, p, &mut rng)).collect();
        let d = conditional_posterior_given_counts(env_model, &sums, tau as u64, &mut rng)?;
        let a_tilde = min_argmax(d.env.probs());
        gaps.push(env.p_star() - env.probs()[a_tilde]);
    }
    Ok(Estimate::from_samples(&gaps))
}
