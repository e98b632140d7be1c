use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = casemix_cli::Cli::parse();
    match casemix_cli::run(cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
