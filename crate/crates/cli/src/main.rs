use std::process::ExitCode;

use deepkm_cli::{execute, parse_cli, CliError};

fn main() -> ExitCode {
    let invocation = match parse_cli(std::env::args_os()) {
        Ok(inv) => inv,
        Err(CliError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&invocation) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for path in &outcome.written {
                eprintln!("wrote {}", path.display());
            }
            if outcome.failed_runs > 0 {
                eprintln!("{} run(s) failed", outcome.failed_runs);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
