use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ergostat::runner::{run_file, Subcommand};

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Density,
    Pressure,
    Sigma2,
    Asclt,
    Maxima,
    ErdosRenyi,
    RateCurve,
    LdCheck,
    EntropySmb,
    EntropyOw,
}

impl From<Cmd> for Subcommand {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Density => Subcommand::Density,
            Cmd::Pressure => Subcommand::Pressure,
            Cmd::Sigma2 => Subcommand::Sigma2,
            Cmd::Asclt => Subcommand::Asclt,
            Cmd::Maxima => Subcommand::Maxima,
            Cmd::ErdosRenyi => Subcommand::ErdosRenyi,
            Cmd::RateCurve => Subcommand::RateCurve,
            Cmd::LdCheck => Subcommand::LdCheck,
            Cmd::EntropySmb => Subcommand::EntropySmb,
            Cmd::EntropyOw => Subcommand::EntropyOw,
        }
    }
}

/// Limit-theorem diagnostics for piecewise expanding interval maps.
///
/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 budget exceeded, 1 i/o error. ERGOSTAT_THREADS overrides the worker count.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Cmd,
    #[arg(long)]
    config: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run_file(args.subcommand.into(), &args.config, args.seed_offset) {
        Ok(report) => {
            for (k, v) in &report.summary {
                println!("{k} = {v}");
            }
            for p in &report.outputs {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", report.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
