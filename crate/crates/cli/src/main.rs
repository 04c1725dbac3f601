use clap::Parser;
use trajeval_cli::{exit_code, execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
