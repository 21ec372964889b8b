//! Sequential prediction with incrementally updated agents, checked by
//! exhaustive enumeration.
//!
//! Inputs are a fixed sequence `X_0..X_{T−1}`, so conditioning on them is
//! implicit and the dataset `D_t` is just the label prefix `Y_{1:t}`. An
//! agent's state evolves as `θ_{t+1} ~ kernel(θ_t, X_t, Y_{t+1}, t)` and it
//! predicts `Y_{t+1}` from `(θ_t, X_t)` alone.
//!
//! Axis names used in enumerated joints: `env`, `y1..yT` and either
//! `theta0..thetaT` ([`enumerate_joint`]) or a single `theta`
//! ([`joint_at`]).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math::{ln, pairwise_sum, xlog_ratio};
use crate::prob::{Axis, JointPmf, NORMALIZATION_TOLERANCE};
use crate::{Error, Result, RngStream};

/// Default limit on enumerated table entries.
pub const DEFAULT_ENUMERATION_CUTOFF: u128 = 10_000_000;

/// Slack allowed in the information inequalities.
pub const INEQUALITY_TOLERANCE: f64 = 1e-9;

fn check_pmf(row: &[f64], what: &dyn core::fmt::Display) -> Result<()> {
    if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

/// A finite prior over environments, each mapping an input to a label pmf,
/// and a fixed input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqPredProblem {
    weights: Vec<f64>,
    /// `[env][input][label]`.
    envs: Vec<Vec<Vec<f64>>>,
    inputs: Vec<usize>,
    n_inputs: usize,
    n_labels: usize,
}

impl SeqPredProblem {
    pub fn new(envs: Vec<(f64, Vec<Vec<f64>>)>, inputs: Vec<usize>) -> Result<Self> {
        let (n_inputs, n_labels) = match envs.first() {
            Some((_, e)) if !e.is_empty() && !e[0].is_empty() => (e.len(), e[0].len()),
            _ => return Err(Error::InvalidArgument("need at least one environment with inputs and labels".into())),
        };
        let mut weights = Vec::with_capacity(envs.len());
        let mut tables = Vec::with_capacity(envs.len());
        for (i, (w, e)) in envs.into_iter().enumerate() {
            if e.len() != n_inputs || e.iter().any(|r| r.len() != n_labels) {
                return Err(Error::InvalidArgument(format!("environment {i} has inconsistent shape")));
            }
            for (x, row) in e.iter().enumerate() {
                check_pmf(row, &format_args!("environment {i} label pmf at input {x}"))?;
            }
            weights.push(w);
            tables.push(e);
        }
        check_pmf(&weights, &"environment weights")?;
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if let Some(&x) = inputs.iter().find(|&&x| x >= n_inputs) {
            return Err(Error::IndexOutOfRange { index: x, len: n_inputs });
        }
        Ok(Self {
            weights,
            envs: tables,
            inputs,
            n_inputs,
            n_labels,
        })
    }

    /// Heads-only coin with weight 2/3, tails-only with 1/3, one input.
    pub fn coin(horizon: usize) -> Result<Self> {
        Self::new(
            vec![(2.0 / 3.0, vec![vec![0.0, 1.0]]), (1.0 / 3.0, vec![vec![1.0, 0.0]])],
            vec![0; horizon],
        )
    }

    /// Random instance: `Dirichlet(1)` environment weights, uniform label
    /// pmfs drawn from `Dirichlet(1)`, uniform inputs.
    pub fn random(n_envs: usize, n_inputs: usize, n_labels: usize, horizon: usize, rng: &mut RngStream) -> Result<Self> {
        let weights = dirichlet1(n_envs, rng);
        let envs = weights
            .into_iter()
            .map(|w| (w, (0..n_inputs).map(|_| dirichlet1(n_labels, rng)).collect()))
            .collect();
        let inputs = (0..horizon).map(|_| rng.index(n_inputs)).collect();
        Self::new(envs, inputs)
    }

    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[usize] {
        &self.inputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn n_envs(&self) -> usize {
        self.weights.len()
    }

    pub fn env_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Label pmf of environment `env` at input `x`.
    pub fn label_pmf(&self, env: usize, x: usize) -> &[f64] {
        &self.envs[env][x]
    }

    /// `P(Y_{t+1} | Y_{1:t} = prefix)` at input `x`, or `None` when the
    /// prefix has zero probability.
    pub fn posterior_predictive(&self, prefix: &[usize], x: usize) -> Option<Vec<f64>> {
        let mut post: Vec<f64> = self.weights.clone();
        for (e, w) in post.iter_mut().enumerate() {
            for (s, &y) in prefix.iter().enumerate() {
                *w *= self.envs[e][self.inputs[s]][y];
            }
        }
        let total: f64 = post.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let mut out = vec![0.0; self.n_labels];
        for (e, w) in post.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(&self.envs[e][x]) {
                *o += w / total * p;
            }
        }
        Some(out)
    }
}

fn dirichlet1(n: usize, rng: &mut RngStream) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -ln(1.0 - rng.uniform())).collect();
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    } else {
        w = vec![1.0 / n as f64; n];
    }
    w
}

/// An agent with finitely many states, a time-dependent transition kernel
/// and a per-state predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalAgent {
    n_states: usize,
    n_inputs: usize,
    n_labels: usize,
    horizon: usize,
    init: Vec<f64>,
    /// `[t][θ][x][y][θ']`.
    kernel: Vec<f64>,
    /// `[θ][x][y]`.
    predictor: Vec<f64>,
}

impl IncrementalAgent {
    /// Tabulates the kernel and predictor from closures returning pmfs.
    pub fn from_fn(
        problem: &SeqPredProblem,
        n_states: usize,
        init: Vec<f64>,
        mut kernel: impl FnMut(usize, usize, usize, usize) -> Vec<f64>,
        mut predictor: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidArgument("agent needs at least one state".into()));
        }
        if init.len() != n_states {
            return Err(Error::InvalidArgument("initial pmf has the wrong length".into()));
        }
        check_pmf(&init, &"initial state pmf")?;
        let (nx, ny, horizon) = (problem.n_inputs, problem.n_labels, problem.horizon());
        let mut k = Vec::with_capacity(horizon * n_states * nx * ny * n_states);
        for t in 0..horizon {
            for th in 0..n_states {
                for x in 0..nx {
                    for y in 0..ny {
                        let row = kernel(t, th, x, y);
                        if row.len() != n_states {
                            return Err(Error::InvalidArgument("kernel row has the wrong length".into()));
                        }
                        check_pmf(&row, &format_args!("kernel row (t={t}, theta={th}, x={x}, y={y})"))?;
                        k.extend_from_slice(&row);
                    }
                }
            }
        }
        let mut pred = Vec::with_capacity(n_states * nx * ny);
        for th in 0..n_states {
            for x in 0..nx {
                let row = predictor(th, x);
                if row.len() != ny {
                    return Err(Error::InvalidArgument("predictor row has the wrong length".into()));
                }
                check_pmf(&row, &format_args!("predictor row (theta={th}, x={x})"))?;
                pred.extend_from_slice(&row);
            }
        }
        Ok(Self {
            n_states,
            n_inputs: nx,
            n_labels: ny,
            horizon,
            init,
            kernel: k,
            predictor: pred,
        })
    }

    /// Remembers the whole label prefix and predicts with the exact posterior.
    /// States are prefixes of length `0..=T`.
    pub fn perfect_memory(problem: &SeqPredProblem) -> Result<Self> {
        let (ny, horizon) = (problem.n_labels, problem.horizon());
        let prefixes = all_prefixes(ny, horizon);
        let index_of = |p: &[usize]| prefixes.iter().position(|q| q.as_slice() == p).unwrap();
        let mut init = vec![0.0; prefixes.len()];
        init[0] = 1.0;
        let n = prefixes.len();
        let prior_marginal = |x: usize| problem.posterior_predictive(&[], x).expect("prior has mass");
        IncrementalAgent::from_fn(
            problem,
            n,
            init,
            |t, th, _x, y| {
                let mut row = vec![0.0; n];
                let p = &prefixes[th];
                if p.len() == t && t < horizon {
                    let mut next = p.clone();
                    next.push(y);
                    row[index_of(&next)] = 1.0;
                } else {
                    row[th] = 1.0;
                }
                row
            },
            |th, x| problem.posterior_predictive(&prefixes[th], x).unwrap_or_else(|| prior_marginal(x)),
        )
    }

    /// A single state that always predicts the prior predictive.
    pub fn amnesiac(problem: &SeqPredProblem) -> Result<Self> {
        IncrementalAgent::from_fn(
            problem,
            1,
            vec![1.0],
            |_, _, _, _| vec![1.0],
            |_, x| problem.posterior_predictive(&[], x).expect("prior has mass"),
        )
    }

    /// Initial pmf, kernel rows and predictor rows all drawn from `Dirichlet(1)`.
    pub fn random(problem: &SeqPredProblem, n_states: usize, rng: &mut RngStream) -> Result<Self> {
        let init = dirichlet1(n_states, rng);
        let mut kernel_rows = Vec::new();
        for _ in 0..problem.horizon() * n_states * problem.n_inputs * problem.n_labels {
            kernel_rows.push(dirichlet1(n_states, rng));
        }
        let mut pred_rows = Vec::new();
        for _ in 0..n_states * problem.n_inputs {
            pred_rows.push(dirichlet1(problem.n_labels, rng));
        }
        let (nx, ny) = (problem.n_inputs, problem.n_labels);
        IncrementalAgent::from_fn(
            problem,
            n_states,
            init,
            |t, th, x, y| kernel_rows[((t * n_states + th) * nx + x) * ny + y].clone(),
            |th, x| pred_rows[th * nx + x].clone(),
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn kernel_row(&self, t: usize, theta: usize, x: usize, y: usize) -> &[f64] {
        let start = (((t * self.n_states + theta) * self.n_inputs + x) * self.n_labels + y) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    pub fn predictor_row(&self, theta: usize, x: usize) -> &[f64] {
        let start = (theta * self.n_inputs + x) * self.n_labels;
        &self.predictor[start..start + self.n_labels]
    }

    fn check_compatible(&self, problem: &SeqPredProblem) -> Result<()> {
        if self.n_inputs != problem.n_inputs || self.n_labels != problem.n_labels || self.horizon != problem.horizon() {
            return Err(Error::InvalidArgument("agent was built for a different problem shape".into()));
        }
        Ok(())
    }
}

fn all_prefixes(n_labels: usize, horizon: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for p in &layer {
            for y in 0..n_labels {
                let mut q: Vec<usize> = p.clone();
                q.push(y);
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn label_axes(horizon: usize, n_labels: usize) -> Vec<Axis> {
    (1..=horizon).map(|i| Axis::new(format!("y{i}"), n_labels)).collect()
}

fn label_names(range: core::ops::Range<usize>) -> Vec<String> {
    range.map(|i| format!("y{i}")).collect()
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn env_label_prob(problem: &SeqPredProblem, env: usize, labels: &[usize]) -> f64 {
    let mut p = problem.weights[env];
    for (s, &y) in labels.iter().enumerate() {
        p *= problem.envs[env][problem.inputs[s]][y];
    }
    p
}

/// Exact joint of `(𝓔, Y_{1:T}, θ_{0:T})`.
pub fn enumerate_joint(problem: &SeqPredProblem, agent: &IncrementalAgent, cutoff: u128) -> Result<JointPmf> {
    agent.check_compatible(problem)?;
    let horizon = problem.horizon();
    let required = problem.n_envs() as u128
        * (problem.n_labels as u128).saturating_pow(horizon as u32)
        * (agent.n_states as u128).saturating_pow(horizon as u32 + 1);
    if required > cutoff {
        return Err(Error::EnumerationCutoff { required, cutoff });
    }
    let mut axes = vec![Axis::new("env", problem.n_envs())];
    axes.extend(label_axes(horizon, problem.n_labels));
    axes.extend((0..=horizon).map(|t| Axis::new(format!("theta{t}"), agent.n_states)));
    JointPmf::from_fn(axes, |idx| {
        let e = idx[0];
        let ys = &idx[1..=horizon];
        let th = &idx[horizon + 1..];
        let mut p = env_label_prob(problem, e, ys);
        if p == 0.0 {
            return 0.0;
        }
        p *= agent.init[th[0]];
        for s in 0..horizon {
            p *= agent.kernel_row(s, th[s], problem.inputs[s], ys[s])[th[s + 1]];
        }
        p
    })
}

/// Distribution of θ_t given every label prefix of length `t`, indexed by
/// the prefix in row-major order (`y1` slowest).
fn state_marginals(problem: &SeqPredProblem, agent: &IncrementalAgent, t: usize) -> Vec<Vec<f64>> {
    let ny = problem.n_labels;
    let mut layer = vec![agent.init.clone()];
    for s in 0..t {
        let mut next = Vec::with_capacity(layer.len() * ny);
        for dist in &layer {
            for y in 0..ny {
                let mut out = vec![0.0; agent.n_states];
                for (th, &w) in dist.iter().enumerate() {
                    if w > 0.0 {
                        for (o, k) in out.iter_mut().zip(agent.kernel_row(s, th, problem.inputs[s], y)) {
                            *o += w * k;
                        }
                    }
                }
                next.push(out);
            }
        }
        layer = next;
    }
    layer
}

/// Exact joint of `(𝓔, Y_{1:T}, θ_t)`, with earlier and later states
/// summed out. The state axis is named `theta`.
pub fn joint_at(problem: &SeqPredProblem, agent: &IncrementalAgent, t: usize) -> Result<JointPmf> {
    agent.check_compatible(problem)?;
    let horizon = problem.horizon();
    if t > horizon {
        return Err(Error::InvalidArgument(format!("time {t} beyond horizon {horizon}")));
    }
    let marg = state_marginals(problem, agent, t);
    let ny = problem.n_labels;
    let mut axes = vec![Axis::new("env", problem.n_envs())];
    axes.extend(label_axes(horizon, ny));
    axes.push(Axis::new("theta", agent.n_states));
    JointPmf::from_fn(axes, |idx| {
        let ys = &idx[1..=horizon];
        let p = env_label_prob(problem, idx[0], ys);
        if p == 0.0 {
            return 0.0;
        }
        let prefix = ys[..t].iter().fold(0, |acc, &y| acc * ny + y);
        p * marg[prefix][idx[horizon + 1]]
    })
}

/// `E[KL(P(Y_{t+1} | Y_{1:t}) ‖ q(θ_t))]` over the joint from [`joint_at`].
fn expected_kl_to(joint: &JointPmf, t: usize, q: &dyn Fn(usize) -> Vec<f64>) -> Result<f64> {
    let mut names = label_names(1..t + 1);
    names.push("theta".to_string());
    names.push(format!("y{}", t + 1));
    let m = joint.marginal(&as_strs(&names))?;
    let n_states = joint.axes()[joint.axis_position("theta")?].cardinality;
    let ny = m.axes().last().expect("label axis").cardinality;
    let probs = m.probs();
    let block = n_states * ny;
    let q_rows: Vec<Vec<f64>> = (0..n_states).map(q).collect();
    let mut terms = Vec::new();
    for chunk in probs.chunks(block) {
        let total: f64 = chunk.iter().sum();
        if total <= 0.0 {
            continue;
        }
        let mut post = vec![0.0; ny];
        for th in 0..n_states {
            for y in 0..ny {
                post[y] += chunk[th * ny + y];
            }
        }
        post.iter_mut().for_each(|p| *p /= total);
        for (th, q_row) in q_rows.iter().enumerate() {
            let w: f64 = chunk[th * ny..(th + 1) * ny].iter().sum();
            if w <= 0.0 {
                continue;
            }
            let kl: f64 = post.iter().zip(q_row).map(|(&p, &qq)| xlog_ratio(p, qq)).sum();
            if kl.is_infinite() {
                return Ok(f64::INFINITY);
            }
            terms.push(w * kl);
        }
    }
    Ok(pairwise_sum(&terms).max(0.0))
}

/// Per-step and total expected KL of the agent's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeKl {
    pub total: f64,
    /// Entry `t` is `E[KL(P̄_{t+1} ‖ P̂_{t+1})]`.
    pub per_step: Vec<f64>,
    /// Steps where the predictor gave zero probability to a possible label.
    pub infinite_steps: Vec<usize>,
}

fn per_step_kl(problem: &SeqPredProblem, agent: &IncrementalAgent, t: usize) -> Result<f64> {
    let joint = joint_at(problem, agent, t)?;
    let x = problem.inputs[t];
    expected_kl_to(&joint, t, &|th| agent.predictor_row(th, x).to_vec())
}

pub fn cumulative_kl(problem: &SeqPredProblem, agent: &IncrementalAgent) -> Result<CumulativeKl> {
    let per_step = (0..problem.horizon())
        .map(|t| per_step_kl(problem, agent, t))
        .collect::<Result<Vec<_>>>()?;
    let infinite_steps: Vec<usize> = (0..per_step.len()).filter(|&t| per_step[t].is_infinite()).collect();
    let total = if infinite_steps.is_empty() { pairwise_sum(&per_step) } else { f64::INFINITY };
    Ok(CumulativeKl {
        total,
        per_step,
        infinite_steps,
    })
}

/// Information retained by the agent's state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Check {
    pub t: usize,
    /// Expected prediction KL summed over steps `t..T`.
    pub epsilon: f64,
    /// `I(Y_{t+1:T}; θ_t)`.
    pub i_theta: f64,
    /// `I(Y_{t+1:T}; D_t)`.
    pub i_data: f64,
    /// `I(Y_{t+1:T}; D_t | θ_t)`, which the argument bounds by `epsilon`.
    pub i_data_given_theta: f64,
    /// `I_theta ≥ I_data − epsilon`.
    pub holds: bool,
    /// `I_data ≥ I_theta`.
    pub data_processing_holds: bool,
}

pub fn verify_theorem1(problem: &SeqPredProblem, agent: &IncrementalAgent, t: usize) -> Result<Theorem1Check> {
    let horizon = problem.horizon();
    if t >= horizon {
        return Err(Error::InvalidArgument(format!("t must be below the horizon {horizon}")));
    }
    let per_step = (t..horizon)
        .map(|s| per_step_kl(problem, agent, s))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = if per_step.iter().any(|x| x.is_infinite()) { f64::INFINITY } else { pairwise_sum(&per_step) };
    let joint = joint_at(problem, agent, t)?;
    let future = label_names(t + 1..horizon + 1);
    let past = label_names(1..t + 1);
    let (future, past) = (as_strs(&future), as_strs(&past));
    let i_theta = joint.mutual_information(&future, &["theta"], &[])?.nats;
    let i_data = joint.mutual_information(&future, &past, &[])?.nats;
    let i_data_given_theta = joint.mutual_information(&future, &past, &["theta"])?.nats;
    Ok(Theorem1Check {
        t,
        epsilon,
        i_theta,
        i_data,
        i_data_given_theta,
        holds: i_theta >= i_data - epsilon - INEQUALITY_TOLERANCE,
        data_processing_holds: i_data >= i_theta - INEQUALITY_TOLERANCE,
    })
}

/// The two chain-rule expansions of `I(Y_{t+1:T}; D_t, θ_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleCheck {
    /// `I(Y; θ_t) + I(Y; D_t | θ_t)`.
    pub via_theta: f64,
    /// `I(Y; D_t) + I(Y; θ_t | D_t)`.
    pub via_data: f64,
    /// `I(Y; θ_t | D_t)`, zero because θ_t depends on the labels only through `D_t`.
    pub theta_given_data: f64,
    /// `E[KL(P(Y_{t+1:T} | D_t) ‖ P(Y_{t+1:T} | θ_t))]`.
    pub joint_kl: f64,
    /// The same quantity telescoped: the one-step KL at `t` plus the
    /// remaining-sequence KL conditioned on `(θ_t, Y_{t+1})`.
    pub telescoped_kl: f64,
}

pub fn chain_rule_check(problem: &SeqPredProblem, agent: &IncrementalAgent, t: usize) -> Result<ChainRuleCheck> {
    let horizon = problem.horizon();
    if t >= horizon {
        return Err(Error::InvalidArgument(format!("t must be below the horizon {horizon}")));
    }
    let joint = joint_at(problem, agent, t)?;
    let future_s = label_names(t + 1..horizon + 1);
    let past_s = label_names(1..t + 1);
    let (future, past) = (as_strs(&future_s), as_strs(&past_s));
    let mi = |a: &[&str], b: &[&str], c: &[&str]| joint.mutual_information(a, b, c).map(|m| m.nats);
    let i_theta = mi(&future, &["theta"], &[])?;
    let i_data_given_theta = mi(&future, &past, &["theta"])?;
    let i_data = mi(&future, &past, &[])?;
    let theta_given_data = mi(&future, &["theta"], &past)?;

    let joint_kl = joint.expected_conditional_kl(&future, &past, &["theta"])?;
    let next = format!("y{}", t + 1);
    let first = joint.expected_conditional_kl(&[next.as_str()], &past, &["theta"])?;
    let rest = &future[1..];
    let remainder = if rest.is_empty() {
        0.0
    } else {
        let mut past_next = past.clone();
        past_next.push(&next);
        joint.expected_conditional_kl(rest, &past_next, &["theta", next.as_str()])?
    };
    Ok(ChainRuleCheck {
        via_theta: i_theta + i_data_given_theta,
        via_data: i_data + theta_given_data,
        theta_given_data,
        joint_kl,
        telescoped_kl: first + remainder,
    })
}

/// Expected one-step KL of candidate predictors against the induced one.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Check {
    /// Expected KL to the induced conditional `P(Y_{t+1} | θ_t)`.
    pub baseline: f64,
    pub candidates: Vec<f64>,
    /// Every candidate is at least the baseline, within tolerance.
    pub holds: bool,
}

/// Checks that the induced conditional `P(Y_{t+1} | θ_t, X_t)` beats every
/// candidate predictor. A candidate gives one label pmf per state.
pub fn verify_lemma3(
    problem: &SeqPredProblem,
    agent: &IncrementalAgent,
    t: usize,
    candidates: &[Vec<Vec<f64>>],
) -> Result<Lemma3Check> {
    if t >= problem.horizon() {
        return Err(Error::InvalidArgument(format!("t must be below the horizon {}", problem.horizon())));
    }
    let joint = joint_at(problem, agent, t)?;
    let induced = induced_predictor(&joint, t)?;
    let baseline = expected_kl_to(&joint, t, &|th| induced[th].clone())?;
    let mut values = Vec::with_capacity(candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        if c.len() != agent.n_states || c.iter().any(|r| r.len() != problem.n_labels) {
            return Err(Error::InvalidArgument(format!("candidate {i} has the wrong shape")));
        }
        values.push(expected_kl_to(&joint, t, &|th| c[th].clone())?);
    }
    Ok(Lemma3Check {
        baseline,
        holds: values.iter().all(|&v| v >= baseline - INEQUALITY_TOLERANCE),
        candidates: values,
    })
}

/// `P(Y_{t+1} | θ_t)` from the joint; unreachable states get the uniform pmf.
pub fn induced_predictor(joint: &JointPmf, t: usize) -> Result<Vec<Vec<f64>>> {
    let next = format!("y{}", t + 1);
    let m = joint.marginal(&["theta", next.as_str()])?;
    let ny = m.axes()[1].cardinality;
    Ok(m
        .probs()
        .chunks(ny)
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|p| p / s).collect()
            } else {
                vec![1.0 / ny as f64; ny]
            }
        })
        .collect())
}

/// Random candidate predictor: one `Dirichlet(1)` label pmf per state.
pub fn random_predictor(n_states: usize, n_labels: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    (0..n_states).map(|_| dirichlet1(n_labels, rng)).collect()
}

/// Shape limits for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomInstanceLimits {
    pub max_envs: usize,
    pub max_states: usize,
    pub max_horizon: usize,
    pub max_inputs: usize,
    pub n_labels: usize,
}

impl Default for RandomInstanceLimits {
    fn default() -> Self {
        Self {
            max_envs: 3,
            max_states: 4,
            max_horizon: 4,
            max_inputs: 2,
            n_labels: 2,
        }
    }
}

/// A random problem and random agent, reproducible from `(seed, index)`.
pub fn random_instance(limits: RandomInstanceLimits, seed: u64, index: u64) -> Result<(SeqPredProblem, IncrementalAgent)> {
    let mut rng = RngStream::new(seed, index);
    let n_envs = 1 + rng.index(limits.max_envs);
    let n_inputs = 1 + rng.index(limits.max_inputs);
    let horizon = 1 + rng.index(limits.max_horizon);
    let n_states = 1 + rng.index(limits.max_states);
    let problem = SeqPredProblem::random(n_envs, n_inputs, limits.n_labels, horizon, &mut rng)?;
    let agent = IncrementalAgent::random(&problem, n_states, &mut rng)?;
    Ok((problem, agent))
}
