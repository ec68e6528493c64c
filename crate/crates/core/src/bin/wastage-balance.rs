use std::io::{self, Write};
use std::process::ExitCode;

use wastage_balance::cli;

fn main() -> ExitCode {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli::run(std::env::args_os(), &mut out) {
        Ok(()) => {
            let _ = out.flush();
            ExitCode::from(cli::EXIT_OK)
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
