mod args;
mod artifacts;
mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::RunConfig;
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::Report(a) = &cli.command {
        return report::report(a);
    }
    let mut cfg = RunConfig::load(cli.global.config.as_deref(), &cli.global)?;
    let (name, art) = match &cli.command {
        Command::Synth(a) => ("synth", commands::synth(&mut cfg, a)?),
        Command::Ingest(a) => ("ingest", commands::ingest(&mut cfg, a)?),
        Command::Detect(a) => ("detect", commands::detect(&mut cfg, a)?),
        Command::Merge(a) => ("merge", commands::merge(&mut cfg, a)?),
        Command::Report(_) => unreachable!(),
    };
    for path in art.commit(&cfg.out, name, &cfg)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
