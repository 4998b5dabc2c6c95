use adversynth_cli::{finish, run, Command};
use clap::Parser;

/// Strategy synthesis for reachability games against learned adversaries.
#[derive(Parser)]
#[command(name = "adversynth", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() {
    finish(run(Cli::parse().command))
}
