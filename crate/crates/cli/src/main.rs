use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use seqcrypt::config::{RunConfig, OUT_DIR_ENV};

fn main() -> ExitCode {
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match RunConfig::parse()
        .load()
        .and_then(|cfg| seqcrypt::run(cfg, env_out))
    {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("seqcrypt: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
