use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use robust_tangle_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let output = match run(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let written = match cli.command.out_path() {
        Some(path) => std::fs::write(path, &output.body).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(output.body.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(robust_tangle_cli::EXIT_OTHER as u8);
    }
    if let Some(summary) = output.summary {
        eprint!("{summary}");
    }
    ExitCode::SUCCESS
}
