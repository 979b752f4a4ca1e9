//! `ltqm`: analysis and simulation of tree-encoded photonic quantum memory.

mod args;
mod commands;
mod output;
mod selftest;

use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use args::{Cli, Command};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("self-test failed: {0} check(s)")]
    SelftestFailed(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::SelftestFailed(_) => 1,
            CliError::Invalid(_) | CliError::Io(_) => 2,
            CliError::Infeasible(_) => 3,
        }
    }
}

impl From<ltqm::analytics::AnalyticsError> for CliError {
    fn from(e: ltqm::analytics::AnalyticsError) -> Self {
        match e {
            ltqm::analytics::AnalyticsError::Infeasible(m) => CliError::Infeasible(m),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ltqm::montecarlo::SimError> for CliError {
    fn from(e: ltqm::montecarlo::SimError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<ltqm::treeproto::TreeError> for CliError {
    fn from(e: ltqm::treeproto::TreeError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Optimize(a) => commands::optimize(&a),
        Command::Memory(a) => commands::memory(&a),
        Command::Schedule(a) => commands::schedule(&a),
        Command::TreeTrials(a) => commands::tree_trials(&a),
        Command::BuildSim(a) => commands::build_sim(&a),
        Command::Tree(a) => commands::tree(&a),
        Command::Selftest(a) => selftest::run(&a),
    }
}

fn main() -> ExitCode {
    let argv = match args::expand_config(std::env::args_os().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
