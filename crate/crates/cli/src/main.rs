//! `ocvu`: OCV-SOC estimation with propagated uncertainty.
//!
//! Subcommands cover the full workflow: generating synthetic
//! characterization data, fitting curve models, SOC and capacity lookup
//! with error bars, tabulating noise amplification and error budgets, and
//! running the Monte-Carlo validation suite.

use std::process::ExitCode;

use clap::Parser;

mod commands;

fn main() -> ExitCode {
    commands::run(commands::Cli::parse())
}
