mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{Failure, Paths};
use config::RunConfig;

fn run(cli: Cli) -> commands::Outcome {
    let paths = Paths::new(cli.data_root.clone());
    let cfg = RunConfig::load(cli.config.as_ref().map(|p| paths.resolve(p)).as_deref()).map_err(Failure::Usage)?;
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a, cfg, &paths),
        Command::Synth(a) => commands::synth(a, cfg, &paths),
        Command::Train(a) => commands::train(a, cfg, &paths),
        Command::Eval(a) => commands::eval(a, cfg, &paths),
        Command::Gradcheck(a) => commands::gradcheck(a, cfg),
        Command::Report(a) => commands::report(a, &paths),
    }
}

/// The error chain, skipping causes whose text the outer message already carries.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !text.contains(&c) {
            text = format!("{text}: {c}");
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", describe(f.error()));
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
