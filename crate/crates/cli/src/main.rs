use std::process::ExitCode;

use entsdp_cli::{execute, parse_config, CliError};

fn main() -> ExitCode {
    let result = parse_config(std::env::args()).and_then(|cfg| execute(&cfg));
    match result {
        Ok(summary) => {
            println!("{}", summary.message);
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(e)) => {
            let code = e.exit_code();
            let _ = e.print();
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
