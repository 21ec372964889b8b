use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jointpred"));
    c.env_remove("JOINTPRED_OUTPUT_DIR");
    c
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn examples() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(crate_dir().join("examples"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    assert!(v.len() >= 8);
    v
}

fn example(name: &str) -> PathBuf {
    crate_dir().join("examples").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_into(config: &Path, dir: &Path, extra: &[&str]) -> Output {
    let o = bin()
        .arg("run")
        .arg(config)
        .arg("--output-dir")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}: {}", config.display(), stderr(&o));
    o
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let s = read_json(&crate_dir().join("schemas").join(name));
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value, what: &str) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{what}: {errors:?}");
}

const BANDIT: &str = r#"
experiment = "bandit"
seed = 1
[env]
kind = "independent_beta"
arms = 2
[bandit]
policy = "approx_ts"
tau = 4
horizon = 20
replications = 5
"#;

#[test]
fn validate_reports_tau_zero_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BANDIT.replace("tau = 4", "tau = 0"));
    let o = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bandit.tau"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (BANDIT.replace("horizon = 20", "horizon = 20\nhorizn = 3"), "horizn"),
        (BANDIT.replace("seed = 1", "seed = "), "line 3"),
        (BANDIT.replace("\"approx_ts\"", "\"softmax\""), "softmax"),
        (BANDIT.replace("arms = 2", "arms = 2\nalpha = [1.0]"), "env.alpha"),
        (format!("{BANDIT}[seqpred]\nproblem = {{ kind = \"coin\", horizon = 2 }}\nagent = {{ kind = \"amnesiac\" }}\n"), "seqpred"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), &text);
        for cmd in ["validate", "run"] {
            let o = bin().arg(cmd).arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
            assert_eq!(o.status.code(), Some(2), "{cmd} {needle}: {}", stderr(&o));
            assert!(stderr(&o).contains(needle), "{needle}: {}", stderr(&o));
        }
    }
    let o = bin().arg("validate").arg(dir.path().join("missing.toml")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn every_shipped_example_validates_and_matches_config_schema() {
    let v = schema("config.schema.json");
    for ex in examples() {
        let o = bin().arg("validate").arg(&ex).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}: {}", ex.display(), stderr(&o));
        let doc: toml::Value = toml::from_str(&fs::read_to_string(&ex).unwrap()).unwrap();
        assert_valid(&v, &serde_json::to_value(doc).unwrap(), &ex.display().to_string());
    }
}

#[test]
fn list_mentions_all_kinds() {
    let o = bin().arg("list").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for kind in ["bandit", "metrics", "recommender", "seqpred"] {
        assert!(text.contains(&format!("{kind}:")), "{kind}");
    }
}

#[test]
fn bandit_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("bandit_exact_ts.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_into(&cfg, &a, &["--threads", "1"]);
    run_into(&cfg, &b, &["--threads", "3"]);
    for f in ["trace.csv", "regret_curve.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn trace_csv_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BANDIT);
    run_into(&cfg, dir.path(), &[]);
    let text = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("replication,t,action,reward,step_regret,cum_regret"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5 * 20);
    let mut cum = 0.0;
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.len(), 6);
        assert_eq!(r[0].parse::<usize>().unwrap(), i / 20);
        assert_eq!(r[1].parse::<usize>().unwrap(), i % 20 + 1);
        assert!(["1", "2"].contains(&r[2]));
        assert!(["0", "1"].contains(&r[3]));
        if i % 20 == 0 {
            cum = 0.0;
        }
        let step: f64 = r[4].parse().unwrap();
        cum += step;
        assert_eq!(r[5].parse::<f64>().unwrap(), cum);
        // 17 significant digits: one leading digit plus 16 after the point.
        let mantissa = r[4].split('e').next().unwrap();
        assert_eq!(mantissa.split('.').nth(1).unwrap().len(), 16, "{}", r[4]);
    }
    let curve = fs::read_to_string(dir.path().join("regret_curve.csv")).unwrap();
    assert!(curve.starts_with("t,mean_cum_regret,std_error\n"));
    assert_eq!(curve.lines().count(), 21);
}

#[test]
fn summary_reports_bound_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BANDIT);
    run_into(&cfg, dir.path(), &["--seed", "99"]);
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["seed"], 99);
    assert_eq!(s["mean_cum_regret"].as_array().unwrap().len(), 20);
    assert_eq!(s["std_error"].as_array().unwrap().len(), 20);
    let expected = (0.5f64 * 2.0 * 20.0 * 2f64.ln()).sqrt() + 2.0 / 8f64.sqrt() * 20.0;
    assert!((s["theorem2_bound"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(s["bound_holds"], true);
}

#[test]
fn recommender_example_reports_pairs() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&example("recommender_two_types.toml"), dir.path(), &[]);
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["marginal_pair"], serde_json::json!([3, 4]));
    assert_eq!(s["joint_pair"], serde_json::json!([1, 2]));
    assert!((s["marginal_pair_miss"].as_f64().unwrap() - 0.1345).abs() < 5e-4);
    assert_eq!(s["universality_gap"]["holds"], true);
}

#[test]
fn seqpred_perfect_memory_example() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&example("seqpred_perfect_memory.toml"), dir.path(), &[]);
    let s = read_json(&dir.path().join("seqpred.json"));
    assert_eq!(s["cumulative_kl"].as_f64(), Some(0.0));
    assert_eq!(s["theorem1"]["holds"], true);
    assert_eq!(s["lemma3"]["holds"], true);
}

#[test]
fn coin_metrics_example() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&example("coin_metrics.toml"), dir.path(), &[]);
    let s = read_json(&dir.path().join("metrics.json"));
    let agents = s["agents"].as_array().unwrap();
    let kl = agents[0]["exact"]["d_kl"].as_f64().unwrap();
    // ln 3 - (2/3) ln 2, computed separately from the library.
    assert!((kl - (3f64.ln() - 2.0 / 3.0 * 2f64.ln())).abs() < 1e-12, "{kl}");
    assert_eq!(agents[1]["exact"]["d_kl"].as_f64(), Some(0.0));
}

#[test]
fn infinite_kl_is_encoded_as_string() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
experiment = "metrics"
seed = 0
[env]
kind = "finite_hypothesis"
hypotheses = [{ weight = 0.5, p = [1.0] }, { weight = 0.5, p = [0.0] }]
[metrics]
tau = 2
[[metrics.agents]]
name = "sure_heads"
kind = "exact_posterior"
prior = { kind = "finite_hypothesis", hypotheses = [{ weight = 1.0, p = [1.0] }] }
"#,
    );
    run_into(&cfg, dir.path(), &[]);
    let s = read_json(&dir.path().join("metrics.json"));
    assert_eq!(s["agents"][0]["exact"]["d_kl"], "inf");
    assert_valid(&schema("metrics.schema.json"), &s, "metrics.json");
}

#[test]
fn seqpred_cutoff_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
experiment = "seqpred"
seed = 0
[seqpred]
problem = { kind = "coin", horizon = 12 }
agent = { kind = "perfect_memory" }
cutoff = 1000
"#,
    );
    for cmd in ["validate", "run"] {
        let o = bin().arg(cmd).arg(&cfg).arg("--output-dir").arg(dir.path()).output().unwrap();
        assert_eq!(o.status.code(), Some(3), "{cmd}: {}", stderr(&o));
        assert!(stderr(&o).contains("cutoff"));
    }
}

#[test]
fn output_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let from_config = dir.path().join("from_config");
    let text = format!("{BANDIT}[output]\ndir = \"{}\"\n", from_config.display());
    let cfg = write_config(dir.path(), &text);
    let run = |env: Option<&Path>, flag: Option<&Path>| {
        let mut c = bin();
        c.arg("run").arg(&cfg);
        if let Some(e) = env {
            c.env("JOINTPRED_OUTPUT_DIR", e);
        }
        if let Some(f) = flag {
            c.arg("--output-dir").arg(f);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(None, None);
    assert!(from_config.join("summary.json").exists());
    let from_env = dir.path().join("from_env");
    run(Some(&from_env), None);
    assert!(from_env.join("summary.json").exists());
    let from_flag = dir.path().join("from_flag");
    run(Some(&from_env), Some(&from_flag));
    assert!(from_flag.join("summary.json").exists());
}

#[test]
fn outputs_match_shipped_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let schemas = [
        ("bandit", schema("bandit_summary.schema.json")),
        ("metrics", schema("metrics.schema.json")),
        ("recommender", schema("recommender_summary.schema.json")),
        ("seqpred", schema("seqpred.schema.json")),
    ];
    for ex in examples() {
        let out = dir.path().join(ex.file_stem().unwrap());
        run_into(&ex, &out, &[]);
        let mut seen = 0;
        for f in ["summary.json", "metrics.json", "seqpred.json"] {
            let p = out.join(f);
            if !p.exists() {
                continue;
            }
            let doc = read_json(&p);
            let kind = doc["experiment"].as_str().unwrap();
            let (_, v) = schemas.iter().find(|(k, _)| *k == kind).unwrap();
            assert_valid(v, &doc, &p.display().to_string());
            seen += 1;
        }
        assert_eq!(seen, 1, "{}", ex.display());
    }
}
