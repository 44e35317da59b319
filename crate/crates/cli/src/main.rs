use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dam_core::experiment::{default_paper_config, emit_csv, render, run_experiment, ExperimentConfig, SweepKind};

/// DAM link-level experiments.
#[derive(Parser)]
#[command(name = "dam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iteration traces of the ZF, MRT and MMSE designs.
    Convergence(Common),
    /// Spectral efficiency versus the number of BS antennas.
    SweepAntennas(Common),
    /// Spectral efficiency versus the number of elements per IRS.
    SweepElements(Common),
    /// Spectral efficiency and BER versus transmit power.
    Ber(Common),
    /// PAPR CCDF of the DAM and OFDM waveforms.
    Papr(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults to the built-in reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; the table goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides monte_carlo_runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Log iterations to stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn load(kind: SweepKind, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let mut cfg = default_paper_config();
            match kind {
                SweepKind::Convergence => {
                    cfg.sweep_values.clear();
                    cfg.monte_carlo_runs = 1;
                }
                SweepKind::Power => {
                    cfg.sweep_values = vec![30.0, 35.0, 40.0, 45.0];
                    cfg.n_tx = 128;
                    cfg.irs_horizontal = 16;
                    cfg.irs_vertical = 16;
                }
                SweepKind::Elements => {
                    cfg.sweep_values = vec![40.0, 80.0, 120.0, 160.0, 200.0];
                    cfg.irs_horizontal = 10;
                    cfg.power_dbm = 40.0;
                }
                SweepKind::Papr => {
                    cfg.sweep_values = (0..=26).map(|k| k as f64 * 0.5).collect();
                    cfg.schemes.retain(|s| s.name() == "zf" || s.name() == "ofdm");
                    cfg.qam_order = 128;
                    cfg.power_dbm = 40.0;
                    cfg.n_tx = 128;
                    cfg.irs_horizontal = 16;
                    cfg.irs_vertical = 16;
                    cfg.monte_carlo_runs = 1;
                }
                SweepKind::Antennas => {
                    cfg.irs_horizontal = 16;
                    cfg.irs_vertical = 16;
                    cfg.power_dbm = 40.0;
                }
            }
            cfg
        }
    };
    cfg.sweep = kind;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(runs) = common.runs {
        cfg.monte_carlo_runs = runs;
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate().context("invalid configuration")?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (kind, common) = match &cli.command {
        Command::Convergence(c) => (SweepKind::Convergence, c),
        Command::SweepAntennas(c) => (SweepKind::Antennas, c),
        Command::SweepElements(c) => (SweepKind::Elements, c),
        Command::Ber(c) => (SweepKind::Power, c),
        Command::Papr(c) => (SweepKind::Papr, c),
    };
    let level = if common.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let cfg = load(kind, common)?;
    let table = run_experiment(&cfg)?;
    match &cfg.output {
        Some(path) => emit_csv(&table, path).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", render(&table)),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
