//! Experiment runner for the `jointpred` library: TOML configs in, CSV and
//! JSON result files out.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::{Config, Experiment, ExperimentKind};
pub use run::Report;

/// Environment variable that overrides the output directory. `--output-dir`
/// still wins over it.
pub const OUTPUT_DIR_ENV: &str = "JOINTPRED_OUTPUT_DIR";

/// Used when neither the flag, the environment nor the config names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "results";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<jointpred::Error> for CliError {
    fn from(e: jointpred::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Suppresses progress messages on stderr.
    pub quiet: bool,
}

/// Loads a config and applies the seed override.
pub fn load_config(path: &Path, opts: &RunOptions) -> Result<Config, CliError> {
    let mut cfg = config::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
        if let Experiment::Bandit(b) = &mut cfg.experiment {
            b.config.master_seed = seed;
        }
    }
    Ok(cfg)
}

/// Flag, then environment variable, then config, then `results/<config stem>`.
pub fn resolve_output_dir(config_path: &Path, cfg: &Config, opts: &RunOptions) -> PathBuf {
    if let Some(dir) = &opts.output_dir {
        return dir.clone();
    }
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = &cfg.output_dir {
        return PathBuf::from(dir);
    }
    let stem = config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    Path::new(DEFAULT_OUTPUT_ROOT).join(stem)
}

/// Parses and checks a config without running it.
pub fn validate(path: &Path) -> Result<String, CliError> {
    let cfg = config::load(path)?;
    if let Experiment::Seqpred(s) = &cfg.experiment {
        // Table sizes are known up front, so the cutoff is a config-time check.
        run::seqpred_table_size(s)?;
    }
    Ok(format!("{}: ok ({} experiment)", path.display(), cfg.experiment.kind().name()))
}

/// Runs a config and reports the paths written.
pub fn run(path: &Path, opts: &RunOptions) -> Result<Report, CliError> {
    let cfg = load_config(path, opts)?;
    let dir = resolve_output_dir(path, &cfg, opts);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
    pool.install(|| run::execute(&cfg, &dir, opts.quiet))
}

/// Text printed by `list`.
pub fn list_text() -> String {
    let mut s = String::from("experiment kinds:\n");
    for kind in ExperimentKind::ALL {
        s.push('\n');
        s.push_str(config::schema_help(kind));
        s.push('\n');
    }
    s.push_str(
        "\ncommon keys: experiment = <kind>, seed = <u64>, [output] dir = <path>\n\
         arms are numbered from 1 in configs and outputs\n",
    );
    s
}
