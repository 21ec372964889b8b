//! Experiment configuration files (TOML).
//!
//! Arms are 1-indexed in configs and in every output file. Unknown keys are
//! rejected, and validation errors name the offending field.

use std::path::Path;

use jointpred::agents::{AgentKind, EnsembleConfig};
use jointpred::bandit::{BanditConfig, Policy, TsVariant};
use jointpred::envs::recommender::{RecommenderInstance, UserType};
use jointpred::envs::{EnvModel, DEFAULT_DELTA};
use jointpred::prob::BetaParams;
use jointpred::seqpred::{RandomInstanceLimits, SeqPredProblem, DEFAULT_ENUMERATION_CUTOFF};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Bandit,
    Metrics,
    Recommender,
    Seqpred,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::Bandit,
        ExperimentKind::Metrics,
        ExperimentKind::Recommender,
        ExperimentKind::Seqpred,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Bandit => "bandit",
            ExperimentKind::Metrics => "metrics",
            ExperimentKind::Recommender => "recommender",
            ExperimentKind::Seqpred => "seqpred",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentKind,
    seed: u64,
    output: Option<OutputSection>,
    env: Option<EnvSpec>,
    bandit: Option<BanditSection>,
    metrics: Option<MetricsSection>,
    recommender: Option<RecommenderSection>,
    seqpred: Option<SeqpredSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    IndependentBeta {
        arms: Option<usize>,
        alpha: Option<Vec<f64>>,
        beta: Option<Vec<f64>>,
    },
    FiniteHypothesis {
        hypotheses: Vec<HypothesisSpec>,
    },
    InformativeArm {
        arms: usize,
        delta: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    weight: f64,
    p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyName {
    ApproxTs,
    ExactTs,
    GreedyMarginal,
    UniformRandom,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AgentName {
    ExactPosterior,
    MarginalProduct,
    Ensemble,
    StaticPrior,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum VariantName {
    PosteriorSample,
    SampleMean,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSpec {
    size: usize,
    resample_threshold: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BanditSection {
    policy: PolicyName,
    horizon: usize,
    replications: usize,
    tau: Option<usize>,
    agent: Option<AgentName>,
    variant: Option<VariantName>,
    ensemble: Option<EnsembleSpec>,
    /// Approximation error assumed when reporting the regret bound.
    epsilon: Option<f64>,
    write_trace: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsSection {
    tau: usize,
    test_arms: Option<Vec<usize>>,
    #[serde(default)]
    train_arms: Vec<usize>,
    #[serde(default)]
    mc_samples: usize,
    agents: Vec<MetricsAgentSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsAgentSpec {
    name: String,
    kind: AgentName,
    prior: Option<EnvSpec>,
    ensemble: Option<EnsembleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommenderSection {
    movies: Vec<Vec<f64>>,
    user_types: Vec<UserTypeSpec>,
    k_select: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserTypeSpec {
    weight: f64,
    preference: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqpredSection {
    problem: SeqpredProblemSpec,
    agent: SeqpredAgentSpec,
    times: Option<Vec<usize>>,
    lemma3_candidates: Option<usize>,
    random_instances: Option<usize>,
    cutoff: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SeqpredProblemSpec {
    Coin { horizon: usize },
    Custom { envs: Vec<SeqpredEnvSpec>, inputs: Vec<usize> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqpredEnvSpec {
    weight: f64,
    /// One label pmf per input id.
    labels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeqpredAgentSpec {
    PerfectMemory,
    Amnesiac,
    Random { states: usize },
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub seed: u64,
    pub output_dir: Option<String>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone)]
pub enum Experiment {
    Bandit(BanditExperiment),
    Metrics(MetricsExperiment),
    Recommender(RecommenderInstance),
    Seqpred(SeqpredExperiment),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::Bandit(_) => ExperimentKind::Bandit,
            Experiment::Metrics(_) => ExperimentKind::Metrics,
            Experiment::Recommender(_) => ExperimentKind::Recommender,
            Experiment::Seqpred(_) => ExperimentKind::Seqpred,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BanditExperiment {
    pub config: BanditConfig,
    pub epsilon: f64,
    pub write_trace: bool,
}

#[derive(Debug, Clone)]
pub struct MetricsAgent {
    pub name: String,
    pub kind: AgentKind,
    pub prior: EnvModel,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone)]
pub struct MetricsExperiment {
    pub env: EnvModel,
    /// 0-indexed.
    pub train_arms: Vec<usize>,
    /// 0-indexed; its length is τ.
    pub test_arms: Vec<usize>,
    pub mc_samples: usize,
    pub agents: Vec<MetricsAgent>,
}

#[derive(Debug, Clone)]
pub struct SeqpredExperiment {
    pub problem: SeqPredProblem,
    pub agent: SeqpredAgentSpec,
    pub times: Vec<usize>,
    pub lemma3_candidates: usize,
    pub random_instances: usize,
    pub random_limits: RandomInstanceLimits,
    pub cutoff: u128,
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn missing(field: &str) -> CliError {
    invalid(field, "required for this experiment")
}

pub fn load(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<Config, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?;
    let stray = [
        ("bandit", raw.bandit.is_some(), ExperimentKind::Bandit),
        ("metrics", raw.metrics.is_some(), ExperimentKind::Metrics),
        ("recommender", raw.recommender.is_some(), ExperimentKind::Recommender),
        ("seqpred", raw.seqpred.is_some(), ExperimentKind::Seqpred),
    ];
    for (name, present, kind) in stray {
        if present && kind != raw.experiment {
            return Err(invalid(
                name,
                format!("section does not apply to experiment \"{}\"", raw.experiment.name()),
            ));
        }
    }
    let needs_env = matches!(raw.experiment, ExperimentKind::Bandit | ExperimentKind::Metrics);
    if raw.env.is_some() && !needs_env {
        return Err(invalid("env", format!("not used by experiment \"{}\"", raw.experiment.name())));
    }
    let experiment = match raw.experiment {
        ExperimentKind::Bandit => {
            let env = build_env(raw.env.as_ref().ok_or_else(|| missing("env"))?, "env")?;
            let section = raw.bandit.ok_or_else(|| missing("bandit"))?;
            Experiment::Bandit(build_bandit(section, env, raw.seed)?)
        }
        ExperimentKind::Metrics => {
            let env = build_env(raw.env.as_ref().ok_or_else(|| missing("env"))?, "env")?;
            let section = raw.metrics.ok_or_else(|| missing("metrics"))?;
            Experiment::Metrics(build_metrics(section, env)?)
        }
        ExperimentKind::Recommender => {
            let s = raw.recommender.ok_or_else(|| missing("recommender"))?;
            let types = s
                .user_types
                .into_iter()
                .map(|u| UserType {
                    weight: u.weight,
                    preference: u.preference,
                })
                .collect();
            Experiment::Recommender(
                RecommenderInstance::new(s.movies, types, s.k_select).map_err(|e| invalid("recommender", e))?,
            )
        }
        ExperimentKind::Seqpred => Experiment::Seqpred(build_seqpred(raw.seqpred.ok_or_else(|| missing("seqpred"))?)?),
    };
    Ok(Config {
        seed: raw.seed,
        output_dir: raw.output.and_then(|o| o.dir),
        experiment,
    })
}

pub fn build_env(spec: &EnvSpec, field: &str) -> Result<EnvModel, CliError> {
    match spec {
        EnvSpec::IndependentBeta { arms, alpha, beta } => {
            let k = match (arms, alpha, beta) {
                (Some(k), _, _) => *k,
                (None, Some(a), _) => a.len(),
                (None, None, Some(b)) => b.len(),
                (None, None, None) => return Err(invalid(&format!("{field}.arms"), "give arms or alpha/beta lists")),
            };
            if k == 0 {
                return Err(invalid(&format!("{field}.arms"), "must be at least 1"));
            }
            let list = |v: &Option<Vec<f64>>, name: &str| -> Result<Vec<f64>, CliError> {
                match v {
                    None => Ok(vec![1.0; k]),
                    Some(v) if v.len() == k => Ok(v.clone()),
                    Some(v) => Err(invalid(&format!("{field}.{name}"), format!("has {} entries, expected {k}", v.len()))),
                }
            };
            let (a, b) = (list(alpha, "alpha")?, list(beta, "beta")?);
            let priors = a
                .iter()
                .zip(&b)
                .map(|(&x, &y)| BetaParams::new(x, y))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(&format!("{field}.alpha/beta"), e))?;
            EnvModel::independent_beta(priors).map_err(|e| invalid(field, e))
        }
        EnvSpec::FiniteHypothesis { hypotheses } => {
            EnvModel::finite_hypothesis(hypotheses.iter().map(|h| (h.weight, h.p.clone())).collect())
                .map_err(|e| invalid(&format!("{field}.hypotheses"), e))
        }
        EnvSpec::InformativeArm { arms, delta } => {
            let delta = delta.unwrap_or(DEFAULT_DELTA);
            if *arms < 2 {
                return Err(invalid(&format!("{field}.arms"), "informative_arm needs at least 2 arms"));
            }
            if !(0.0..0.5).contains(&delta) {
                return Err(invalid(&format!("{field}.delta"), "must lie in [0, 0.5)"));
            }
            EnvModel::informative_arm(*arms, delta).map_err(|e| invalid(field, e))
        }
    }
}

fn agent_kind(a: AgentName) -> AgentKind {
    match a {
        AgentName::ExactPosterior => AgentKind::ExactPosterior,
        AgentName::MarginalProduct => AgentKind::MarginalProduct,
        AgentName::Ensemble => AgentKind::Ensemble,
        AgentName::StaticPrior => AgentKind::StaticPrior,
    }
}

fn ensemble(spec: Option<EnsembleSpec>, field: &str) -> Result<EnsembleConfig, CliError> {
    let mut e = EnsembleConfig::default();
    if let Some(s) = spec {
        if s.size == 0 {
            return Err(invalid(&format!("{field}.size"), "must be at least 1"));
        }
        e.size = s.size;
        if let Some(t) = s.resample_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid(&format!("{field}.resample_threshold"), "must lie in [0, 1]"));
            }
            e.resample_threshold = t;
        }
    }
    Ok(e)
}

fn build_bandit(s: BanditSection, env: EnvModel, seed: u64) -> Result<BanditExperiment, CliError> {
    let policy = match s.policy {
        PolicyName::ApproxTs => Policy::ApproxTs,
        PolicyName::ExactTs => Policy::ExactTs,
        PolicyName::GreedyMarginal => Policy::GreedyMarginal,
        PolicyName::UniformRandom => Policy::UniformRandom,
    };
    if s.horizon == 0 {
        return Err(invalid("bandit.horizon", "must be at least 1"));
    }
    if s.replications == 0 {
        return Err(invalid("bandit.replications", "must be at least 1"));
    }
    let tau = match (policy, s.tau) {
        (_, Some(0)) => return Err(invalid("bandit.tau", "must be at least 1")),
        (Policy::ApproxTs, None) => return Err(invalid("bandit.tau", "required for approx_ts")),
        (_, t) => t.unwrap_or(1),
    };
    let agent = agent_kind(s.agent.unwrap_or(AgentName::ExactPosterior));
    if policy == Policy::ExactTs && agent != AgentKind::ExactPosterior {
        return Err(invalid("bandit.agent", "exact_ts needs the exact_posterior agent"));
    }
    let variant = match s.variant {
        None | Some(VariantName::PosteriorSample) => TsVariant::PosteriorSample,
        Some(VariantName::SampleMean) => TsVariant::SampleMean,
    };
    if s.variant.is_some() && policy != Policy::ApproxTs {
        return Err(invalid("bandit.variant", "only applies to approx_ts"));
    }
    let mut config = BanditConfig::new(env, policy, s.horizon, tau, s.replications, seed);
    config.agent = agent;
    config.variant = variant;
    config.ensemble = ensemble(s.ensemble, "bandit.ensemble")?;
    let epsilon = s.epsilon.unwrap_or(0.0);
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(invalid("bandit.epsilon", "must be finite and non-negative"));
    }
    Ok(BanditExperiment {
        config,
        epsilon,
        write_trace: s.write_trace.unwrap_or(true),
    })
}

fn arms_from_one(list: &[usize], k: usize, field: &str) -> Result<Vec<usize>, CliError> {
    list.iter()
        .map(|&a| {
            if a == 0 || a > k {
                Err(invalid(field, format!("arm {a} outside 1..={k}")))
            } else {
                Ok(a - 1)
            }
        })
        .collect()
}

fn build_metrics(s: MetricsSection, env: EnvModel) -> Result<MetricsExperiment, CliError> {
    if s.tau == 0 {
        return Err(invalid("metrics.tau", "must be at least 1"));
    }
    let k = env.n_arms();
    let test_arms = match &s.test_arms {
        Some(t) if t.len() != s.tau => {
            return Err(invalid("metrics.test_arms", format!("has {} entries but tau = {}", t.len(), s.tau)))
        }
        Some(t) => arms_from_one(t, k, "metrics.test_arms")?,
        None => vec![0; s.tau],
    };
    let train_arms = arms_from_one(&s.train_arms, k, "metrics.train_arms")?;
    if s.agents.is_empty() {
        return Err(invalid("metrics.agents", "list at least one agent"));
    }
    let mut agents = Vec::with_capacity(s.agents.len());
    for (i, a) in s.agents.into_iter().enumerate() {
        let field = format!("metrics.agents[{i}]");
        let prior = match &a.prior {
            Some(p) => build_env(p, &format!("{field}.prior"))?,
            None => env.clone(),
        };
        if prior.n_arms() != k {
            return Err(invalid(&format!("{field}.prior"), format!("has {} arms, env has {k}", prior.n_arms())));
        }
        agents.push(MetricsAgent {
            name: a.name,
            kind: agent_kind(a.kind),
            prior,
            ensemble: ensemble(a.ensemble, &format!("{field}.ensemble"))?,
        });
    }
    Ok(MetricsExperiment {
        env,
        train_arms,
        test_arms,
        mc_samples: s.mc_samples,
        agents,
    })
}

fn build_seqpred(s: SeqpredSection) -> Result<SeqpredExperiment, CliError> {
    let problem = match s.problem {
        SeqpredProblemSpec::Coin { horizon } => {
            if horizon == 0 {
                return Err(invalid("seqpred.problem.horizon", "must be at least 1"));
            }
            SeqPredProblem::coin(horizon).map_err(|e| invalid("seqpred.problem", e))?
        }
        SeqpredProblemSpec::Custom { envs, inputs } => {
            SeqPredProblem::new(envs.into_iter().map(|e| (e.weight, e.labels)).collect(), inputs)
                .map_err(|e| invalid("seqpred.problem", e))?
        }
    };
    if let SeqpredAgentSpec::Random { states: 0 } = s.agent {
        return Err(invalid("seqpred.agent.states", "must be at least 1"));
    }
    let horizon = problem.horizon();
    let times = s.times.unwrap_or_else(|| (0..horizon).collect());
    if let Some(&t) = times.iter().find(|&&t| t >= horizon) {
        return Err(invalid("seqpred.times", format!("time {t} must be below the horizon {horizon}")));
    }
    Ok(SeqpredExperiment {
        problem,
        agent: s.agent,
        times,
        lemma3_candidates: s.lemma3_candidates.unwrap_or(20),
        random_instances: s.random_instances.unwrap_or(0),
        random_limits: RandomInstanceLimits::default(),
        cutoff: s.cutoff.map_or(DEFAULT_ENUMERATION_CUTOFF, u128::from),
    })
}

/// Schema help printed by `list`.
pub fn schema_help(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Bandit => {
            "bandit: Bernoulli bandit regret runs
  [env]     kind = independent_beta (arms | alpha, beta lists)
            kind = finite_hypothesis, hypotheses = [{ weight, p = [..] }]
            kind = informative_arm, arms >= 2, delta in [0, 0.5) (default 1e-6)
  [bandit]  policy = approx_ts | exact_ts | greedy_marginal | uniform_random
            horizon >= 1, replications >= 1
            tau >= 1 (required for approx_ts)
            agent = exact_posterior | marginal_product | ensemble | static_prior
            variant = posterior_sample | sample_mean (approx_ts only)
            ensemble = { size, resample_threshold }, epsilon = 0
            write_trace = true
  writes    trace.csv, regret_curve.csv, summary.json"
        }
        ExperimentKind::Metrics => {
            "metrics: cross-entropy and expected KL of agents' joint predictives
  [env]     the true prior (same kinds as bandit)
  [metrics] tau >= 1, test_arms (1-indexed, length tau; default arm 1)
            train_arms (1-indexed), mc_samples (0 = exact only)
            agents = [{ name, kind, prior = <env table>, ensemble }]
  writes    metrics.json"
        }
        ExperimentKind::Recommender => {
            "recommender: marginal vs joint movie-set selection
  [recommender] movies = [[..]], k_select, user_types = [{ weight, preference = [..] }]
  writes        summary.json"
        }
        ExperimentKind::Seqpred => {
            "seqpred: incremental agents, information retention and predictor optimality
  [seqpred] problem = { kind = coin, horizon } | { kind = custom, envs = [{ weight, labels }], inputs }
            agent = { kind = perfect_memory | amnesiac | random, states }
            times (default all), lemma3_candidates (20), random_instances (0)
            cutoff (table entries, default 1e7)
  writes    seqpred.json"
        }
    }
}
