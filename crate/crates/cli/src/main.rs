use std::process::ExitCode;

use clap::Parser;

use opinf_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command, &cli.options) {
        Ok((dir, report)) => {
            for failure in &report.failures {
                eprintln!("warning: {failure}");
            }
            println!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
