//! Sample harmonic explorer paths and extract their driving functions.

use clap::{Parser, Subcommand};
use hexplore_cli::{cmd_drive, cmd_sample, finish, DriveArgs, GlobalArgs, SampleArgs};

#[derive(Parser)]
#[command(name = "explorer", version, about = "Harmonic explorer paths on triangular lattices")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one path from v0 to ve and write it as CSV.
    Sample(SampleArgs),
    /// Map a sampled path to the upper half-plane and write its driving function as CSV.
    Drive(DriveArgs),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    finish(match &cli.command {
        Command::Sample(a) => cmd_sample(a, &cli.global),
        Command::Drive(a) => cmd_drive(a, &cli.global),
    })
}
