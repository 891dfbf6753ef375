// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Batch runner for dissipative quantum dynamics scenarios.
//!
//! Subcommands: `run <config>`, `sweep <config> --axis key=v1,v2,...`,
//! `oracle <name>`, and `compare <csvA> <csvB>`. Exit codes: 0 on
//! success, 2 for configuration errors, 3 for numerical failures,
//! 4 for I/O errors.

mod config;
mod output;
mod run;
mod sweep;

use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::parse_config;
use crate::run::{oracle_table, run_scenario};
use crate::sweep::{compare_csv, run_sweep};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "madelung",
    about = "Dissipative quantum dynamics scenario runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config and write its outputs.
    Run {
        /// Path to a `key = value` scenario config.
        config: PathBuf,
    },
    /// Run a scenario once per axis value and report errors against a
    /// reference curve.
    Sweep {
        config: PathBuf,
        /// Axis as key=v1,v2,... (e.g. n=128,256,512).
        #[arg(long)]
        axis: String,
        /// Reference curve: einstein | free_quantum |
        /// harmonic_dispersion | implicit_dispersion | sigma_ode |
        /// equipartition.
        #[arg(long)]
        compare: Option<String>,
        /// Directory for the per-value runs and the report.
        #[arg(long, default_value = "sweep")]
        output: String,
    },
    /// Print a reference table as CSV on stdout.
    Oracle(OracleArgs),
    /// Compare two series CSVs column by column.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// l1 (mean absolute) or linf (max absolute) difference.
        #[arg(long, default_value = "linf")]
        metric: String,
    },
}

#[derive(Args)]
struct OracleArgs {
    /// commutator | free_quantum | einstein | harmonic_dispersion |
    /// implicit_dispersion | ground_sigma2 | classical_sigma2
    name: String,
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    #[arg(long, default_value_t = 1.0)]
    friction: f64,
    #[arg(long, default_value_t = 0.0)]
    kt: f64,
    #[arg(long, default_value_t = 1.0)]
    hbar: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long, default_value_t = 4.0)]
    t_max: f64,
    #[arg(long, default_value_t = 41)]
    points: usize,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let text = read_config(&config)?;
            let scenario = parse_config(&text)?;
            let artifacts = run_scenario(&scenario)?;
            println!(
                "wrote {} rows to {}",
                artifacts.rows.len(),
                artifacts.output_dir.display()
            );
            Ok(())
        }
        Command::Sweep { config, axis, compare, output } => {
            let text = read_config(&config)?;
            let (key, values) = axis.split_once('=').ok_or_else(|| {
                CliError::Config("axis must look like key=v1,v2,...".into())
            })?;
            let values: Vec<String> =
                values.split(',').map(|v| v.trim().to_string()).collect();
            let report = run_sweep(&text, key.trim(), &values, compare.as_deref(), &output)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
            println!("{json}");
            Ok(())
        }
        Command::Oracle(args) => {
            let params =
                madelung::PhysicalParams::new(args.mass, args.friction, args.kt, args.hbar)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            let (columns, rows) =
                oracle_table(&args.name, &params, args.omega0, args.t_max, args.points)?;
            let column_refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
            output::write_stdout_csv(&column_refs, &rows);
            Ok(())
        }
        Command::Compare { a, b, metric } => {
            let report = compare_csv(&a, &b, &metric)?;
            let json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
            println!("{json}");
            Ok(())
        }
    }
}
