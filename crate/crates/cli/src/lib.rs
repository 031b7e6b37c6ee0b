//! Command-line front end: loss tables, fitting, figure data and the identity suite.
//!
//! Every command reads a [`config::RunConfig`] and writes its artifacts into
//! the configured output directory, nowhere else.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod setup;

use config::RunConfig;
use error::CliResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    LossShow,
    Fit,
    Eval,
    Fig1,
    Fig2,
    Fig3,
    Check,
}

pub fn run(cmd: Command, cfg: &RunConfig) -> CliResult<()> {
    match cmd {
        Command::LossShow => commands::loss_show::run(cfg),
        Command::Fit => commands::fit::run(cfg),
        Command::Eval => commands::eval::run(cfg),
        Command::Fig1 => commands::fig1::run(cfg),
        Command::Fig2 => commands::fig2::run(cfg),
        Command::Fig3 => commands::fig3::run(cfg),
        Command::Check => commands::check::run(cfg),
    }
}
