//! Command-line front end: `stifflimit <pme|hs|sweep|verify|geometry>`.
//!
//! Every run writes `report.json` and `manifest.json` into `--out`. Exit
//! codes: 0 success, 2 configuration or input error, 3 solver or i/o
//! failure, 4 a diagnostic check failed.

pub mod app;
pub mod config;
pub mod plotdata;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use app::{Mode, EXIT_CHECK, EXIT_CONFIG};
use config::load_config;

#[derive(Debug, Parser)]
#[command(name = "stifflimit", version, about = "Porous-medium tumor growth and its Hele-Shaw limit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Replaces one configuration value; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Porous-medium run at `solver.gamma`.
    Pme,
    /// Hele-Shaw limit run.
    Hs,
    /// Hele-Shaw limit plus the whole γ ladder, with the convergence check.
    Sweep,
    /// Re-run the diagnostics on snapshot files.
    Verify {
        /// Run directory or snapshot directory; overrides `verify.input`.
        input: Option<PathBuf>,
    },
    /// Shape measurements of the congested set at one snapshot.
    Geometry {
        /// Run directory or snapshot directory; overrides `geometry.input`.
        input: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { 0 };
        }
    };
    let mut overrides = cli.overrides.clone();
    let (mode, input_key, input) = match &cli.command {
        Command::Pme => (Mode::Pme, "", None),
        Command::Hs => (Mode::Hs, "", None),
        Command::Sweep => (Mode::Sweep, "", None),
        Command::Verify { input } => (Mode::Verify, "verify.input", input.as_ref()),
        Command::Geometry { input } => (Mode::Geometry, "geometry.input", input.as_ref()),
    };
    if let Some(p) = input {
        // absolute, so it does not resolve against the config directory
        let abs = std::path::absolute(p).unwrap_or_else(|_| p.clone());
        overrides.push(format!("{input_key}={}", abs.display()));
    }
    let cfg = match load_config(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };
    match app::run(mode, &cfg, &cli.out) {
        Ok(outcome) => {
            for c in outcome.report.failures() {
                eprintln!("FAILED {}: measured {} bound {} ({})", c.name, c.measured, c.bound, c.context);
            }
            let code = outcome.exit_code();
            if code == EXIT_CHECK {
                eprintln!("{} check(s) failed", outcome.report.failures().count());
            }
            code
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
