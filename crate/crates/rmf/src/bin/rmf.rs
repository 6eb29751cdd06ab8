//! Command-line front end: parses a TOML config, dispatches to the run
//! orchestrator, prints a short human summary, and exits with a stable
//! code (0 ok, 2 schema error, 3 regime refusal, 4 SCF non-convergence,
//! 5 post-hoc assertion failure, 1 other).
//!
//! The environment variable `RMF_THREADS` sets the worker count for the
//! independent solves of the subadditivity probe (default 1).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rmf::config::parse_config;
use rmf::report::{fmt_human, summary_text};
use rmf::run::{exit_code, run, Command, RunOptions};

#[derive(Parser)]
#[command(
    name = "rmf",
    about = "Static relativistic mean-field solver on a periodic lattice",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration (strict schema)
    #[arg(long, global = true, value_name = "path")]
    config: Option<PathBuf>,

    /// Output directory (overrides output.directory in the config)
    #[arg(long, global = true, value_name = "dir")]
    out: Option<PathBuf>,

    /// Proceed despite regime-condition violations (recorded in the report)
    #[arg(long, global = true)]
    override_regime: bool,

    /// Also write field and density snapshots (fields.tsv)
    #[arg(long, global = true)]
    dump_fields: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground-state SCF solve with post-hoc checks and configured probes
    Solve,
    /// Parse the config and check the regime conditions, nothing else
    Validate,
    /// Three-solve subadditivity probe over the configured lambda pairs
    ProbeSubadditivity,
    /// Commutator descent step over the configured epsilon sweep
    ProbeDescent,
    /// Operator-bound battery on random in-constraint orbital sets
    CheckBounds,
    /// Solve and emit the full mean-field spectrum per species
    Spectrum,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config_path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let config = match parse_config(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Validate => Command::Validate,
        Cmd::ProbeSubadditivity => Command::ProbeSubadditivity,
        Cmd::ProbeDescent => Command::ProbeDescent,
        Cmd::CheckBounds => Command::CheckBounds,
        Cmd::Spectrum => Command::Spectrum,
    };
    let opts = RunOptions {
        override_regime: cli.override_regime,
        dump_fields: cli.dump_fields,
        out_dir: cli.out,
    };
    match run(command, &config, &opts) {
        Ok(bundle) => {
            match command {
                Command::Validate => {
                    let regime = bundle.results.regime.expect("validate fills the report");
                    println!("regime: {}", regime.failure_summary());
                    println!(
                        "d_p = {}  d_n = {}  threshold = {}",
                        fmt_human(regime.d_p),
                        fmt_human(regime.d_n),
                        fmt_human(regime.threshold)
                    );
                }
                _ => print!("{}", summary_text(&bundle.results)),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
