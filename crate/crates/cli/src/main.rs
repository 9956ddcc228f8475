use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mia_cli::{commands, CliError, Config};

#[derive(Parser, Debug)]
#[command(name = "mia", version, about = "Membership inference auditing experiments")]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate the population graph and challenger membership.
    Gen,
    /// Train target and shadow models and score every configured attack.
    Audit,
    /// Check the MCMC sampler against exact enumeration on a small graph.
    McmcCheck,
    /// Estimate decision thresholds on simulated targets.
    Threshold,
    /// Run signal attacks on an external signal CSV.
    AttackSignals,
}

fn run(args: Args) -> Result<String, CliError> {
    let path = args
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = Config::load(&path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match args.command {
        Command::Gen => commands::gen(&cfg),
        Command::Audit => commands::audit(&cfg),
        Command::McmcCheck => commands::mcmc_check(&cfg),
        Command::Threshold => commands::threshold(&cfg),
        Command::AttackSignals => commands::attack_signals(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(report) => {
            println!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
