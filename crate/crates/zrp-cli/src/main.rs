use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use zrp_cli::{exit_code, run_to_dir, Command, ExperimentConfig};

/// Exact, sampled, and variational studies of a condensing zero-range
/// process on a finite site graph.
#[derive(Parser, Debug)]
#[command(name = "zrp", version, about)]
struct Cli {
    /// Experiment config (JSON).  Env: ZRP_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.  Env: ZRP_OUT.  Default: ./out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the config seed.  Env: ZRP_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap worker threads.  Env: ZRP_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cap exact state-space sizes.  Env: ZRP_CAP_STATES.
    #[arg(long, global = true)]
    cap_states: Option<u64>,
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Site-walk potentials, capacities, and limit rates.
    Walk,
    /// Partition normalization and well masses over the size sweep.
    Measure,
    /// Poisson-equation closeness sweep.
    Poisson,
    /// Exact well capacities vs the variational upper bound.
    Capacity,
    /// Spectral gap of the well-restricted chain vs well width.
    Gap,
    /// Kinetic Monte Carlo order paths.
    Simulate,
    /// Sampled order process against the limit chain.
    Compare,
    /// Super-harmonic certificate scan.
    Superharmonic,
    /// Every subcommand in sequence.
    All,
}

fn env_parse<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.cmd {
        Sub::Walk => Command::Walk,
        Sub::Measure => Command::Measure,
        Sub::Poisson => Command::Poisson,
        Sub::Capacity => Command::Capacity,
        Sub::Gap => Command::Gap,
        Sub::Simulate => Command::Simulate,
        Sub::Compare => Command::Compare,
        Sub::Superharmonic => Command::Superharmonic,
        Sub::All => Command::All,
    };

    // Precedence: flag, then environment, then config file contents.
    let config_path = cli
        .config
        .or_else(|| env_parse::<PathBuf>("ZRP_CONFIG"))
        .unwrap_or_else(|| PathBuf::from("zrp.json"));
    let mut cfg = match ExperimentConfig::from_path(&config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("zrp: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    if let Some(seed) = cli.seed.or_else(|| env_parse("ZRP_SEED")) {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads.or_else(|| env_parse("ZRP_THREADS")) {
        cfg.threads = Some(threads);
    }
    if let Some(cap) = cli.cap_states.or_else(|| env_parse("ZRP_CAP_STATES")) {
        cfg.cap_states = Some(cap);
    }
    let out_dir = cli
        .out
        .or_else(|| env_parse::<PathBuf>("ZRP_OUT"))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    match run_to_dir(cmd, &cfg, &out_dir) {
        Ok(arts) => {
            for art in &arts {
                println!(
                    "{}: {} rows -> {}",
                    art.subcommand,
                    art.rows.len(),
                    out_dir.join(format!("{}.csv", art.subcommand)).display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("zrp: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
