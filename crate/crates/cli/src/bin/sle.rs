//! Chordal SLE traces from sampled Brownian driving functions.

use clap::{Parser, Subcommand};
use hexplore_cli::{cmd_trace, finish, GlobalArgs, TraceArgs};

#[derive(Parser)]
#[command(name = "sle", version, about = "Chordal SLE traces by the vertical-slit zipper")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample W = sqrt(kappa)·B on [0, T] and write the trace as CSV `t,x,y`.
    Trace(TraceArgs),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    finish(match &cli.command {
        Command::Trace(a) => cmd_trace(a, &cli.global),
    })
}
