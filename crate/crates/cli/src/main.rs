use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jointpred_cli::{list_text, run, validate, RunOptions, OUTPUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "jointpred", version, about = "Joint predictive distribution experiments")]
struct Cli {
    /// Worker threads for replications (default: all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Directory for result files.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// No progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run { config: PathBuf },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List experiment kinds and their config keys.
    List,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions {
        threads: cli.threads.map(|n| n as usize),
        output_dir: cli.output_dir,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::List => {
            print!("{}", list_text());
            Ok(())
        }
        Command::Validate { config } => validate(config).map(|msg| println!("{msg}")),
        Command::Run { config } => run(config, &opts).map(|report| {
            for line in report.headline {
                println!("{line}");
            }
            for p in report.files {
                println!("wrote {}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jointpred: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
