//! Command-line front end: configuration, the four subcommands, and
//! tab-separated output with a JSON manifest per run.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;

use std::path::PathBuf;

use config::{Command, Resolved, RunConfig};
use error::CliResult;

/// Resolves the configuration, runs the command and writes its files.
/// Returns the paths written.
pub fn run(cfg: RunConfig, env_out_dir: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let resolved = Resolved::from_config(cfg, env_out_dir)?;
    let out = match resolved.command {
        Command::Analyze => commands::analyze(&resolved)?,
        Command::Simulate => commands::simulate(&resolved)?,
        Command::Optimize => commands::optimize(&resolved)?,
        Command::Figure => {
            let name = resolved.figure_name.expect("checked during resolution");
            figures::figure(&resolved, name)?
        }
    };
    output::emit(&resolved, &out.name, &out.table, &out.results)
}
