use std::process::ExitCode;

use clap::Parser;
use crn_cli::{config_echo, execute, Cli, CliError};

fn run(cli: &Cli) -> Result<(), CliError> {
    let (config, hash) = config_echo(cli)?;
    eprintln!("{config}");
    println!("config-hash {hash}");
    let out = execute(cli)?;
    for line in &out.lines[1..] {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::try_parse() {
        Ok(cli) => run(&cli),
        // --help and --version arrive as "errors" that belong on stdout.
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => Err(CliError::usage(&e)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
