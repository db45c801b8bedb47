//! Experiment harness around `zrp-core`: JSON configs in, provenance-
//! stamped CSV and JSON artifacts out, one subcommand per module.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;
use zrp_core::{CoreError, Result};

pub use config::ExperimentConfig;
pub use output::{csv_body, Artifacts};

/// Subcommands the harness exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Walk,
    Measure,
    Poisson,
    Capacity,
    Gap,
    Simulate,
    Compare,
    Superharmonic,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Walk => "walk",
            Command::Measure => "measure",
            Command::Poisson => "poisson",
            Command::Capacity => "capacity",
            Command::Gap => "gap",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Superharmonic => "superharmonic",
            Command::All => "all",
        }
    }
}

/// Run one subcommand against a resolved config.
pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<Artifacts>> {
    if let Some(k) = cfg.threads {
        if k > 0 {
            // The global pool can only be sized once; later calls in the
            // same process keep the first size.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global();
        }
    }
    match cmd {
        Command::Walk => Ok(vec![commands::walk(cfg)?]),
        Command::Measure => Ok(vec![commands::measure(cfg)?]),
        Command::Poisson => Ok(vec![commands::poisson(cfg)?]),
        Command::Capacity => Ok(vec![commands::capacity(cfg)?]),
        Command::Gap => Ok(vec![commands::gap(cfg)?]),
        Command::Simulate => Ok(vec![commands::simulate(cfg)?]),
        Command::Compare => Ok(vec![commands::compare_cmd(cfg)?]),
        Command::Superharmonic => Ok(vec![commands::superharmonic(cfg)?]),
        Command::All => commands::all(cfg),
    }
}

/// Run and persist artifacts under `dir`.
pub fn run_to_dir(cmd: Command, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<Artifacts>> {
    let arts = run(cmd, cfg)?;
    for art in &arts {
        art.write(cfg, dir)?;
    }
    Ok(arts)
}

/// Process exit code for an error, per the documented taxonomy.
pub fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::Argument(_) | CoreError::Model(_) => 2,
        CoreError::Resource(_) => 3,
        CoreError::Numeric(_) => 4,
    }
}
