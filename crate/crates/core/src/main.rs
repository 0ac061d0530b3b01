use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use qmagnet::cli::{parse_config, run_command, CliError, RunConfig, Subcommand};

/// Adiabatic quantum-magnet simulator for two trapped-ion spins.
#[derive(Parser)]
#[command(name = "qmagnet", version)]
enum Cli {
    /// Sweep the final J/Bx and write ramp.csv.
    Ramp(Common),
    /// Parity scan of the final state, contrast and fidelity bound.
    Parity(Common),
    /// Walking-wave closed loop and effective coupling.
    Phonon(Common),
    /// Simulated fluorescence histogram and population fit.
    Detect(Common),
    /// Tunnelling gap versus chain length.
    Gap(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (`section.key = value`); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides run.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides run.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(sub: Subcommand, args: Common) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    let summary = run_command(sub, &cfg)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for path in &summary.written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let (sub, args) = match Cli::parse() {
        Cli::Ramp(a) => (Subcommand::Ramp, a),
        Cli::Parity(a) => (Subcommand::Parity, a),
        Cli::Phonon(a) => (Subcommand::Phonon, a),
        Cli::Detect(a) => (Subcommand::Detect, a),
        Cli::Gap(a) => (Subcommand::Gap, a),
    };
    match run(sub, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmagnet {sub}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
