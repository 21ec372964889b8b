//! Experiment dispatch. Parallel work is always collected in index order, so
//! result files do not depend on the thread count.

use std::path::{Path, PathBuf};

use jointpred::bandit::{run_replication, summarize, theorem2_bound, Policy, TsVariant};
use jointpred::envs::recommender::RecommenderInstance;
use jointpred::metrics::{
    exact_predictive_metrics, mc_cross_entropy, universality_gap, PredictiveScenario, ENUMERATION_CUTOFF_BITS,
};
use jointpred::seqpred::{
    chain_rule_check, cumulative_kl, random_instance, random_predictor, verify_lemma3, verify_theorem1,
    IncrementalAgent, SeqPredProblem,
};
use jointpred::RngStream;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{BanditExperiment, Config, Experiment, MetricsExperiment, SeqpredAgentSpec, SeqpredExperiment};
use crate::output::{num, nums, regret_curve_csv, trace_csv, write_json, write_text};
use crate::CliError;

/// Files written and a short human-readable result.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub headline: Vec<String>,
}

pub fn execute(cfg: &Config, dir: &Path, quiet: bool) -> Result<Report, CliError> {
    let progress = |msg: String| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    match &cfg.experiment {
        Experiment::Bandit(b) => bandit(b, cfg.seed, dir, &progress),
        Experiment::Metrics(m) => metrics(m, cfg.seed, dir, &progress),
        Experiment::Recommender(r) => recommender(r, cfg.seed, dir),
        Experiment::Seqpred(s) => seqpred(s, cfg.seed, dir, &progress),
    }
}

fn bandit(b: &BanditExperiment, seed: u64, dir: &Path, progress: &dyn Fn(String)) -> Result<Report, CliError> {
    let cfg = &b.config;
    cfg.validate()?;
    progress(format!(
        "bandit: {} on K={} for T={}, {} replications",
        cfg.policy.name(),
        cfg.env.n_arms(),
        cfg.horizon,
        cfg.replications
    ));
    let traces = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(cfg, &traces);
    let k = cfg.env.n_arms();
    let approx = cfg.policy == Policy::ApproxTs;
    let tau = if approx { cfg.tau as f64 } else { f64::INFINITY };
    let bound = (k >= 2).then(|| theorem2_bound(k, cfg.horizon, tau, b.epsilon));
    let fr = summary.final_regret;
    let value = json!({
        "experiment": "bandit",
        "seed": seed,
        "config": {
            "arms": k,
            "policy": cfg.policy.name(),
            "agent": cfg.agent.name(),
            "tau": if approx { Value::from(cfg.tau) } else { Value::Null },
            "variant": if approx {
                Value::from(match cfg.variant {
                    TsVariant::PosteriorSample => "posterior_sample",
                    TsVariant::SampleMean => "sample_mean",
                })
            } else {
                Value::Null
            },
            "horizon": cfg.horizon,
            "replications": cfg.replications,
            "epsilon": b.epsilon,
        },
        "final_regret": { "mean": num(fr.mean), "std_error": num(fr.std_error), "n": fr.n },
        "mean_cum_regret": nums(&summary.mean_cum_regret),
        "std_error": nums(&summary.std_error),
        "theorem2_bound": bound.map_or(Value::Null, num),
        "bound_holds": bound.map_or(Value::Null, |v| Value::from(fr.mean <= v + 5.0 * fr.std_error)),
        "contradictions": summary.contradictions,
        "mean_first_pull": nums(&summary.mean_first_pull),
        "never_pulled": summary.never_pulled,
    });
    let mut written = Vec::new();
    if b.write_trace {
        written.push(write_text(dir, "trace.csv", &trace_csv(&traces))?);
    }
    written.push(write_text(dir, "regret_curve.csv", &regret_curve_csv(&summary))?);
    written.push(write_json(dir, "summary.json", &value)?);
    let headline = format!(
        "final regret {:.4} ± {:.4} (bound {})",
        fr.mean,
        fr.std_error,
        bound.map_or("n/a".to_string(), |v| format!("{v:.4}"))
    );
    Ok(Report {
        files: written,
        headline: vec![headline],
    })
}

fn metrics(m: &MetricsExperiment, seed: u64, dir: &Path, progress: &dyn Fn(String)) -> Result<Report, CliError> {
    let exact_ok = m.train_arms.len() + m.test_arms.len() <= ENUMERATION_CUTOFF_BITS;
    if !exact_ok && m.mc_samples == 0 {
        return Err(CliError::Runtime(format!(
            "exact enumeration needs {} binary outcomes, cutoff is {ENUMERATION_CUTOFF_BITS}; set metrics.mc_samples",
            m.train_arms.len() + m.test_arms.len()
        )));
    }
    progress(format!("metrics: {} agents, tau={}", m.agents.len(), m.test_arms.len()));
    let records = m
        .agents
        .par_iter()
        .map(|a| -> Result<Value, CliError> {
            let scenario = PredictiveScenario {
                env_prior: m.env.clone(),
                agent_prior: a.prior.clone(),
                agent_kind: a.kind,
                ensemble: a.ensemble,
                train_arms: m.train_arms.clone(),
                test_arms: m.test_arms.clone(),
            };
            let exact = if exact_ok {
                let e = exact_predictive_metrics(&scenario, seed)?;
                json!({ "d_ce": num(e.d_ce), "d_kl": num(e.d_kl), "posterior_entropy": num(e.posterior_entropy) })
            } else {
                Value::Null
            };
            let mc = if m.mc_samples > 0 {
                let e = mc_cross_entropy(&scenario, m.mc_samples, seed)?;
                json!({
                    "d_ce": num(e.mean),
                    "std_error": num(e.std_error),
                    "n": e.n,
                    "infinite_count": e.infinite_count,
                })
            } else {
                Value::Null
            };
            Ok(json!({ "name": a.name, "kind": a.kind.name(), "exact": exact, "monte_carlo": mc }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let value = json!({
        "experiment": "metrics",
        "seed": seed,
        "tau": m.test_arms.len(),
        "train_arms": m.train_arms.iter().map(|a| a + 1).collect::<Vec<_>>(),
        "test_arms": m.test_arms.iter().map(|a| a + 1).collect::<Vec<_>>(),
        "agents": records,
    });
    let headline = value["agents"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| format!("{}: d_kl {}", r["name"].as_str().unwrap_or("?"), r["exact"]["d_kl"]))
        .collect();
    Ok(Report {
        files: vec![write_json(dir, "metrics.json", &value)?],
        headline,
    })
}

fn recommender(r: &RecommenderInstance, seed: u64, dir: &Path) -> Result<Report, CliError> {
    let sel = r.marginal_vs_joint();
    let n = r.movies().len();
    let table: Vec<Value> = (0..r.user_types().len())
        .map(|u| nums(&(0..n).map(|i| r.enjoy_prob(u, i)).collect::<Vec<_>>()))
        .collect();
    let marginal: Vec<f64> = (0..n).map(|i| r.marginal_enjoy_prob(i)).collect();
    let p_marginal = r.success_prob(&sel.marginal)?;
    let p_joint = r.success_prob(&sel.joint)?;
    let gap = if n <= 20 {
        let g = universality_gap(&r.decision_problem()?, &r.outcome_joint()?, &r.marginal_product_joint()?)?;
        json!({ "gap": num(g.gap), "bound": num(g.bound), "d_kl": num(g.d_kl), "holds": g.holds })
    } else {
        Value::Null
    };
    let one = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let value = json!({
        "experiment": "recommender",
        "seed": seed,
        "k_select": r.k_select(),
        "enjoy_prob": table,
        "marginal_enjoy_prob": nums(&marginal),
        "marginal_pair": one(&sel.marginal),
        "joint_pair": one(&sel.joint),
        "marginal_pair_success": num(p_marginal),
        "joint_pair_success": num(p_joint),
        "marginal_pair_miss": num(1.0 - p_marginal),
        "joint_pair_miss": num(1.0 - p_joint),
        "universality_gap": gap,
    });
    let headline = format!(
        "marginal pair {:?} misses w.p. {:.4}; joint pair {:?} misses w.p. {:.4}",
        one(&sel.marginal),
        1.0 - p_marginal,
        one(&sel.joint),
        1.0 - p_joint
    );
    Ok(Report {
        files: vec![write_json(dir, "summary.json", &value)?],
        headline: vec![headline],
    })
}

fn agent_states(spec: SeqpredAgentSpec, problem: &SeqPredProblem) -> usize {
    match spec {
        SeqpredAgentSpec::PerfectMemory => {
            let mut total = 0usize;
            let mut level = 1usize;
            for _ in 0..=problem.horizon() {
                total = total.saturating_add(level);
                level = level.saturating_mul(problem.n_labels());
            }
            total
        }
        SeqpredAgentSpec::Amnesiac => 1,
        SeqpredAgentSpec::Random { states } => states,
    }
}

/// Entries of one per-time joint `(env, y_1..y_T, θ_t)`; errors past the cutoff.
pub fn seqpred_table_size(s: &SeqpredExperiment) -> Result<u128, CliError> {
    let p = &s.problem;
    let size = (p.n_envs() as u128)
        .saturating_mul((p.n_labels() as u128).saturating_pow(p.horizon() as u32))
        .saturating_mul(agent_states(s.agent, p) as u128);
    if size > s.cutoff {
        return Err(CliError::Runtime(format!(
            "seqpred tables need {size} entries, cutoff is {}",
            s.cutoff
        )));
    }
    Ok(size)
}

fn retention_records(problem: &SeqPredProblem, agent: &IncrementalAgent, times: &[usize]) -> Result<Vec<Value>, CliError> {
    times
        .par_iter()
        .map(|&t| -> Result<Value, CliError> {
            let c = verify_theorem1(problem, agent, t)?;
            let ch = chain_rule_check(problem, agent, t)?;
            Ok(json!({
                "t": t,
                "epsilon": num(c.epsilon),
                "i_theta": num(c.i_theta),
                "i_data": num(c.i_data),
                "i_data_given_theta": num(c.i_data_given_theta),
                "holds": c.holds,
                "data_processing_holds": c.data_processing_holds,
                "chain_rule": {
                    "via_theta": num(ch.via_theta),
                    "via_data": num(ch.via_data),
                    "theta_given_data": num(ch.theta_given_data),
                    "joint_kl": num(ch.joint_kl),
                    "telescoped_kl": num(ch.telescoped_kl),
                },
            }))
        })
        .collect()
}

fn all_hold(records: &[Value], key: &str) -> bool {
    records.iter().all(|r| r[key].as_bool() == Some(true))
}

fn seqpred(s: &SeqpredExperiment, seed: u64, dir: &Path, progress: &dyn Fn(String)) -> Result<Report, CliError> {
    seqpred_table_size(s)?;
    let problem = &s.problem;
    let base = RngStream::new(seed, 0);
    let (agent, agent_states) = match s.agent {
        SeqpredAgentSpec::PerfectMemory => (IncrementalAgent::perfect_memory(problem)?, Value::Null),
        SeqpredAgentSpec::Amnesiac => (IncrementalAgent::amnesiac(problem)?, Value::Null),
        SeqpredAgentSpec::Random { states } => (
            IncrementalAgent::random(problem, states, &mut base.substream(0))?,
            Value::from(states),
        ),
    };
    progress(format!(
        "seqpred: T={}, {} agent states, {} random instances",
        problem.horizon(),
        agent.n_states(),
        s.random_instances
    ));
    let ckl = cumulative_kl(problem, &agent)?;
    let t1 = retention_records(problem, &agent, &s.times)?;

    let mut cand_rng = base.substream(1);
    let candidates: Vec<Vec<Vec<f64>>> = (0..s.lemma3_candidates)
        .map(|_| random_predictor(agent.n_states(), problem.n_labels(), &mut cand_rng))
        .collect();
    let l3 = s
        .times
        .par_iter()
        .map(|&t| -> Result<Value, CliError> {
            let c = verify_lemma3(problem, &agent, t, &candidates)?;
            Ok(json!({
                "t": t,
                "baseline": num(c.baseline),
                "min_candidate": c.candidates.iter().copied().reduce(f64::min).map_or(Value::Null, num),
                "holds": c.holds,
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let random = if s.random_instances > 0 {
        let limits = s.random_limits;
        let results = (0..s.random_instances as u64)
            .into_par_iter()
            .map(|i| -> Result<(bool, bool, bool), CliError> {
                let (p, a) = random_instance(limits, seed, i + 1)?;
                let mut rng = RngStream::new(seed, i + 1).substream(1);
                let cands: Vec<_> = (0..4).map(|_| random_predictor(a.n_states(), p.n_labels(), &mut rng)).collect();
                let (mut t1_ok, mut dp_ok, mut l3_ok) = (true, true, true);
                for t in 0..p.horizon() {
                    let c = verify_theorem1(&p, &a, t)?;
                    t1_ok &= c.holds;
                    dp_ok &= c.data_processing_holds;
                    l3_ok &= verify_lemma3(&p, &a, t, &cands)?.holds;
                }
                Ok((t1_ok, dp_ok, l3_ok))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let failures = |f: fn(&(bool, bool, bool)) -> bool| {
            results.iter().enumerate().filter(|(_, r)| !f(r)).map(|(i, _)| i + 1).collect::<Vec<_>>()
        };
        json!({
            "count": s.random_instances,
            "theorem1_failures": failures(|r| r.0),
            "data_processing_failures": failures(|r| r.1),
            "lemma3_failures": failures(|r| r.2),
        })
    } else {
        Value::Null
    };

    let t1_holds = all_hold(&t1, "holds");
    let value = json!({
        "experiment": "seqpred",
        "seed": seed,
        "problem": {
            "horizon": problem.horizon(),
            "n_envs": problem.n_envs(),
            "n_inputs": problem.n_inputs(),
            "n_labels": problem.n_labels(),
        },
        "agent": {
            "kind": match s.agent {
                SeqpredAgentSpec::PerfectMemory => "perfect_memory",
                SeqpredAgentSpec::Amnesiac => "amnesiac",
                SeqpredAgentSpec::Random { .. } => "random",
            },
            "states": agent_states,
            "n_states": agent.n_states(),
        },
        "cumulative_kl": num(ckl.total),
        "per_step_kl": nums(&ckl.per_step),
        "infinite_steps": ckl.infinite_steps,
        "theorem1": {
            "holds": t1_holds,
            "data_processing_holds": all_hold(&t1, "data_processing_holds"),
            "checks": t1,
        },
        "lemma3": {
            "holds": all_hold(&l3, "holds"),
            "candidates": s.lemma3_candidates,
            "checks": l3,
        },
        "random_instances": random,
    });
    let headline = format!("cumulative KL {}; retention check holds: {t1_holds}", crate::output::fmt_float(ckl.total));
    Ok(Report {
        files: vec![write_json(dir, "seqpred.json", &value)?],
        headline: vec![headline],
    })
}
