use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TEXWEAVE_LOG", "warn")).init();
    let cli = texweave_cli::Cli::parse();
    match texweave_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("texweave: {e}");
            e.exit_code()
        }
    }
}
