use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use soen_cli::artifacts::RunSummary;
use soen_cli::config::{ExperimentConfig, ExperimentId};
use soen_cli::run::{cmd_experiment, cmd_sim, read_input};
use soen_cli::sweep::{cmd_sweep, SweepConfig};
use soen_cli::{exit, exit_code, ConfigError};
use soen_core::netlist::parse_value;

#[derive(Parser)]
#[command(name = "soen", version, about = "Superconducting optoelectronic synapse simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a netlist file.
    Sim {
        netlist: PathBuf,
        /// Stop time, overriding .tran (SPICE suffixes allowed, e.g. 10n).
        #[arg(long, value_parser = spice_value)]
        tstop: Option<f64>,
        /// Largest time step, overriding .tran.
        #[arg(long, value_parser = spice_value)]
        dtmax: Option<f64>,
        #[arg(long, default_value = "out/sim")]
        out: PathBuf,
    },
    /// Run one of the figure experiments.
    Experiment {
        /// fig3, fig5a, fig5bc, fig6b, fig7, fig8, retention or custom.
        id: Option<String>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a parameter sweep described by a config file.
    Sweep {
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Shorthand for `experiment retention`.
    Retention {
        #[command(flatten)]
        flags: RunFlags,
    },
}

fn spice_value(s: &str) -> Result<f64, String> {
    parse_value(s)
}

fn experiment(id: Option<&str>, flags: &RunFlags) -> Result<RunSummary> {
    let id: Option<ExperimentId> = id.map(str::parse).transpose().map_err(ConfigError)?;
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = read_input(path)?;
            ExperimentConfig::parse(&text, id)
                .map_err(|e| ConfigError(e.context(path.display().to_string())))?
        }
        None => ExperimentConfig::new(
            id.ok_or_else(|| ConfigError(anyhow!("give an experiment id or --config")))?,
        ),
    };
    if let Some(o) = &flags.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(j) = flags.jobs {
        cfg.jobs = j;
    }
    cmd_experiment(&cfg)
}

fn sweep(flags: &RunFlags) -> Result<RunSummary> {
    let path = flags
        .config
        .as_deref()
        .ok_or_else(|| ConfigError(anyhow!("sweep needs --config")))?;
    let text = read_input(path)?;
    let mut cfg = SweepConfig::parse(&text)
        .map_err(|e| ConfigError(e.context(path.display().to_string())))?;
    if let Some(o) = &flags.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(j) = flags.jobs {
        cfg.jobs = j;
    }
    cmd_sweep(&cfg)
}

fn report(summary: &RunSummary) -> i32 {
    for a in &summary.assertions {
        let mark = if a.passed { "PASS" } else { "FAIL" };
        println!("{mark} {}: {}", a.name, a.detail);
    }
    println!("artifacts in {}", summary.dir.display());
    if summary.passed {
        exit::OK
    } else {
        exit::ASSERTION_FAILED
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim {
            netlist,
            tstop,
            dtmax,
            out,
        } => cmd_sim(netlist, *tstop, *dtmax, out),
        Command::Experiment { id, flags } => experiment(id.as_deref(), flags),
        Command::Sweep { flags } => sweep(flags),
        Command::Retention { flags } => experiment(Some("retention"), flags),
    };
    let code = match result {
        Ok(summary) => report(&summary),
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
