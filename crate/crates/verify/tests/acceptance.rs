//! The ten acceptance criteria, each at its stated tolerance and time budget.
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fail.
//!
//! Expected values come from closed forms written out here, not from the
//! library's own helpers.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use jointpred::agents::{AgentKind, AgentState, EnsembleConfig};
use jointpred::bandit::{run_replication, target_suboptimality, theorem2_bound, BanditConfig, Policy, RegretTrace};
use jointpred::envs::coin::{agent1_prior, agent2_prior, coin_agents};
use jointpred::envs::recommender::RecommenderInstance;
use jointpred::envs::EnvModel;
use jointpred::math::{linear_fit, Estimate};
use jointpred::metrics::{random_decision_instance, universality_gap};
use jointpred::seqpred::{
    random_instance, random_predictor, verify_lemma3, verify_theorem1, IncrementalAgent, RandomInstanceLimits,
    SeqPredProblem,
};
use jointpred::RngStream;
use jointpred_cli::RunOptions;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Outcome;

fn run_all(checks: &[(u32, &str, Duration, Check)]) -> bool {
    let mut all = true;
    for &(id, name, budget, f) in checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = result.pass && in_time;
        all &= pass;
        let time_note = if in_time { String::new() } else { format!(" over budget {budget:?}") };
        println!(
            "criterion {id:>2} {}: {name} [{:.2}s{time_note}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            result.detail
        );
    }
    all
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * b.abs().max(1.0)
}

fn coin_joints() -> Outcome {
    let third: f64 = 1.0 / 3.0;
    let closed = coin_agents();
    let mut bad = Vec::new();
    for tau in 1..=6usize {
        let agent = |prior: EnvModel| {
            AgentState::new(AgentKind::ExactPosterior, &prior, EnsembleConfig::default(), RngStream::new(0, 0))
                .unwrap()
                .joint_pmf(tau)
                .unwrap()
        };
        let pairs = [
            (closed.agent1_joint(tau).unwrap(), agent(agent1_prior()), third.powi(tau as i32)),
            (closed.agent2_joint(tau).unwrap(), agent(agent2_prior()), third),
        ];
        for (i, (a, b, all_tails)) in pairs.iter().enumerate() {
            for j in [a, b] {
                // Bit 0 holds the first toss; 0 is tails.
                let first_tails: f64 = j.iter().filter(|(c, _)| *c & 1 == 0).map(|(_, p)| p).sum();
                if !close(first_tails, third) {
                    bad.push(format!("agent{} tau={tau} first toss {first_tails}", i + 1));
                }
                if !close(j.prob_of(&0), *all_tails) {
                    bad.push(format!("agent{} tau={tau} all tails {}", i + 1, j.prob_of(&0)));
                }
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "tau 1..6, both agents".into() } else { bad.join("; ") })
}

fn recommender_table() -> Outcome {
    let r = RecommenderInstance::two_user_types();
    // Rounded enjoyment probabilities per user type and movie.
    let table = [[1.00, 0.00, 0.73, 0.50], [0.00, 1.00, 0.50, 0.73]];
    let mut bad = Vec::new();
    for (u, row) in table.iter().enumerate() {
        for (i, &want) in row.iter().enumerate() {
            let got = r.enjoy_prob(u, i);
            if ((got * 100.0).round() / 100.0 - want).abs() > 1e-9 {
                bad.push(format!("type {} movie {}: {got}", u + 1, i + 1));
            }
        }
    }
    let sel = r.marginal_vs_joint();
    if sel.marginal != [2, 3] || sel.joint != [0, 1] {
        bad.push(format!("pairs {:?} {:?}", sel.marginal, sel.joint));
    }
    // Each type enjoys its off-type movie w.p. 1/2 and its own w.p. σ(1).
    let sigma1 = 1.0 / (1.0 + (-1.0f64).exp());
    let oracle_miss = (1.0 - sigma1) * 0.5;
    let miss = 1.0 - r.success_prob(&sel.marginal).unwrap();
    if (miss - 0.1345).abs() > 5e-4 || (miss - oracle_miss).abs() > 1e-12 || miss <= 0.10 {
        bad.push(format!("miss {miss}"));
    }
    let detail = format!("marginal pair (3,4) misses w.p. {miss:.6}");
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { bad.join("; ") })
}

fn universality_certificate() -> Outcome {
    let mut rng = RngStream::new(2024, 3);
    let mut failures = 0;
    let mut infinite = 0;
    for i in 0..500 {
        let n_actions = 2 + i % 4;
        let tau = 1 + (i / 4) % 4;
        let (dp, post, agent) = random_decision_instance(n_actions, tau, &mut rng).unwrap();
        let g = universality_gap(&dp, &post, &agent).unwrap();
        failures += usize::from(!g.holds);
        infinite += usize::from(g.d_kl.is_infinite());
    }
    outcome(failures == 0, format!("500 problems, {failures} failures, {infinite} with infinite KL"))
}

fn coin_amnesiac() -> (SeqPredProblem, IncrementalAgent) {
    let p = SeqPredProblem::coin(4).unwrap();
    let a = IncrementalAgent::amnesiac(&p).unwrap();
    (p, a)
}

fn information_retention() -> Outcome {
    let limits = RandomInstanceLimits::default();
    let results: Vec<(bool, bool, usize)> = (0..=200u64)
        .into_par_iter()
        .map(|i| {
            let (p, a) = if i == 0 { coin_amnesiac() } else { random_instance(limits, 41, i).unwrap() };
            let mut ok = (true, true, 0);
            for t in 0..p.horizon() {
                let c = verify_theorem1(&p, &a, t).unwrap();
                ok.0 &= c.holds;
                ok.1 &= c.data_processing_holds;
                ok.2 += 1;
            }
            ok
        })
        .collect();
    let t1 = results.iter().filter(|r| !r.0).count();
    let dp = results.iter().filter(|r| !r.1).count();
    let checks: usize = results.iter().map(|r| r.2).sum();
    outcome(
        t1 == 0 && dp == 0,
        format!("201 instances, {checks} time steps; failures: retention {t1}, data processing {dp}"),
    )
}

fn predictor_optimality() -> Outcome {
    let limits = RandomInstanceLimits::default();
    let results: Vec<(bool, usize)> = (1..=100u64)
        .into_par_iter()
        .map(|i| {
            let (p, a) = random_instance(limits, 43, i).unwrap();
            let mut rng = RngStream::new(43, i).substream(7);
            let cands: Vec<_> = (0..25).map(|_| random_predictor(a.n_states(), p.n_labels(), &mut rng)).collect();
            let mut ok = true;
            for t in 0..p.horizon() {
                ok &= verify_lemma3(&p, &a, t, &cands).unwrap().holds;
            }
            (ok, p.horizon() * cands.len())
        })
        .collect();
    let fails = results.iter().filter(|r| !r.0).count();
    let n: usize = results.iter().map(|r| r.1).sum();
    outcome(fails == 0, format!("100 instances, {n} candidate comparisons, {fails} failing instances"))
}

fn replicate(cfg: &BanditConfig) -> Vec<RegretTrace> {
    (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(cfg, r).unwrap())
        .collect()
}

fn final_estimate(traces: &[RegretTrace]) -> Estimate {
    Estimate::from_samples(&traces.iter().map(RegretTrace::final_regret).collect::<Vec<_>>())
}

fn regret_bound() -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [2usize, 5, 10] {
        for horizon in [200usize, 1000] {
            for tau in [16usize, 128] {
                let env = EnvModel::uniform_beta(k).unwrap();
                let cfg = BanditConfig::new(env, Policy::ApproxTs, horizon, tau, 10_000, 600 + k as u64);
                let e = final_estimate(&replicate(&cfg));
                // sqrt(K T ln K / 2) + K T / sqrt(2τ), written out.
                let bound = ((k * horizon) as f64 * (k as f64).ln() / 2.0).sqrt()
                    + k as f64 * horizon as f64 / (2.0 * tau as f64).sqrt();
                assert!((bound - theorem2_bound(k, horizon, tau as f64, 0.0)).abs() < 1e-9 * bound);
                worst = worst.max(e.mean / bound);
                if e.mean > bound + 5.0 * e.std_error {
                    bad.push(format!("K={k} T={horizon} tau={tau}: {:.3} > {bound:.3}", e.mean));
                }
            }
        }
    }
    let detail = format!("12 cells, largest regret/bound ratio {worst:.3}");
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { bad.join("; ") })
}

fn informative_arm_separation() -> Outcome {
    let ks = [4usize, 8, 16];
    let mut greedy = Vec::new();
    let mut ts = Vec::new();
    let mut censored = 0;
    for &k in &ks {
        let env = EnvModel::informative_arm(k, 1e-6).unwrap();
        let horizon = 20 * k;
        let mut g = BanditConfig::new(env.clone(), Policy::GreedyMarginal, horizon, 1, 10_000, 700 + k as u64);
        g.agent = AgentKind::MarginalProduct;
        let first = |traces: &[RegretTrace]| {
            let xs: Vec<f64> = traces
                .iter()
                .map(|t| t.first_pull(k - 1).map_or((horizon + 1) as f64, |s| s as f64))
                .collect();
            (Estimate::from_samples(&xs).mean, traces.iter().filter(|t| t.first_pull(k - 1).is_none()).count())
        };
        let (gm, gc) = first(&replicate(&g));
        let e = BanditConfig::new(env, Policy::ExactTs, horizon, 1, 10_000, 800 + k as u64);
        let (tm, tc) = first(&replicate(&e));
        greedy.push(gm);
        ts.push(tm);
        censored += gc + tc;
    }
    let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
    let (slope, _, r2) = linear_fit(&xs, &greedy);
    let ts_ok = ts.iter().all(|&m| m <= 3.0);
    outcome(
        slope > 0.0 && r2 >= 0.9 && ts_ok,
        format!(
            "greedy first pull {greedy:.2?} (slope {slope:.3}, R2 {r2:.4}); exact TS {ts:.2?}; {censored} censored"
        ),
    )
}

fn target_suboptimality_check() -> Outcome {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for k in [2usize, 5, 10] {
        for tau in [4usize, 16, 64, 256] {
            let env = EnvModel::uniform_beta(k).unwrap();
            let e = target_suboptimality(&env, tau, 10_000, 900 + (k * 1000 + tau) as u64).unwrap();
            let bound = k as f64 / (2.0 * tau as f64).sqrt();
            worst = worst.max(e.mean / bound);
            if e.mean > bound + 5.0 * e.std_error {
                bad.push(format!("K={k} tau={tau}: {:.4} > {bound:.4}", e.mean));
            }
        }
    }
    let detail = format!("12 cells, largest ratio to K/sqrt(2 tau) {worst:.3}");
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { bad.join("; ") })
}

fn approx_vs_exact() -> Outcome {
    let env = EnvModel::uniform_beta(2).unwrap();
    let approx = BanditConfig::new(env.clone(), Policy::ApproxTs, 500, 128, 10_000, 909);
    let exact = BanditConfig::new(env, Policy::ExactTs, 500, 1, 10_000, 910);
    let (a, e) = (final_estimate(&replicate(&approx)), final_estimate(&replicate(&exact)));
    let diff = a.mean - e.mean;
    let se = (a.std_error.powi(2) + e.std_error.powi(2)).sqrt();
    outcome(
        diff.abs() <= 3.0 * se,
        format!(
            "approx {:.3} ± {:.3}, exact {:.3} ± {:.3}, difference {:.2} SE",
            a.mean,
            a.std_error,
            e.mean,
            e.std_error,
            diff / se
        ),
    )
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/examples");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

/// Same entry point as `jointpred run --threads N --output-dir DIR`.
fn run_cli(config: &Path, out: &Path, threads: usize) -> bool {
    let opts = RunOptions {
        threads: Some(threads),
        output_dir: Some(out.to_path_buf()),
        seed: None,
        quiet: true,
    };
    jointpred_cli::run(config, &opts).is_ok()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    let mut files = 0;
    let configs = shipped_configs();
    for cfg in &configs {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let dirs: Vec<PathBuf> = [1, 2, 8].iter().map(|t| tmp.path().join(format!("{stem}-{t}"))).collect();
        for (d, t) in dirs.iter().zip([1, 2, 8]) {
            if !run_cli(cfg, d, t) {
                bad.push(format!("{stem} failed with {t} threads"));
            }
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0]).into_iter().flatten().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        if names.is_empty() {
            bad.push(format!("{stem} wrote nothing"));
        }
        for n in names {
            files += 1;
            let base = std::fs::read(dirs[0].join(&n)).unwrap();
            for d in &dirs[1..] {
                if std::fs::read(d.join(&n)).ok().as_ref() != Some(&base) {
                    bad.push(format!("{stem}/{} differs", n.to_string_lossy()));
                }
            }
        }
    }
    let detail = format!("{} configs, {files} files compared across 1, 2 and 8 threads", configs.len());
    outcome(bad.is_empty(), if bad.is_empty() { detail } else { bad.join("; ") })
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let checks: [(u32, &str, Duration, Check); 10] = [
        (1, "coin agents' joints", s(1), coin_joints),
        (2, "recommender table and pair selection", s(1), recommender_table),
        (3, "universality gap certificate", s(10), universality_certificate),
        (4, "information retained by agent state", s(60), information_retention),
        (5, "induced predictor optimality", s(30), predictor_optimality),
        (6, "approximate TS regret bound", s(300), regret_bound),
        (7, "informative-arm separation", s(120), informative_arm_separation),
        (8, "target suboptimality", s(60), target_suboptimality_check),
        (9, "approximate vs exact TS at tau = 128", Duration::MAX, approx_vs_exact),
        (10, "determinism across thread counts", Duration::MAX, determinism),
    ];
    if run_all(&checks) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
