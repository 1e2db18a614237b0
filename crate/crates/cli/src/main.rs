use clap::Parser;
use pipeforge_cli::{commands, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(commands::run(&cli));
}
