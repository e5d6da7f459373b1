use std::process::ExitCode;

use clap::Parser;
use stirsim_cli::{exit_code, run, Cli, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with status 2 on malformed arguments.
    let cli = Cli::parse();
    let result = run(cli);
    match &result {
        Err(CliError::Usage(msg)) => eprintln!("usage error: {msg}"),
        Err(CliError::Failure(msg)) => eprintln!("error: {msg}"),
        Ok(_) => {}
    }
    ExitCode::from(exit_code(&result) as u8)
}
