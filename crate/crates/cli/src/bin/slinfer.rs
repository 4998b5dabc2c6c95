use adversynth_cli::{finish, run_sl, SlCommand};
use clap::Parser;

/// Strictly local grammar inference.
#[derive(Parser)]
#[command(name = "slinfer", version)]
struct Cli {
    #[command(subcommand)]
    command: SlCommand,
}

fn main() {
    finish(run_sl(Cli::parse().command))
}
