//! Convergence experiments, exponent table and structure modulus.

use clap::{Parser, Subcommand};
use hexplore_cli::{cmd_convergence, cmd_exponents, cmd_modulus, finish, ConvergenceArgs, GlobalArgs, ModulusArgs};

#[derive(Parser)]
#[command(name = "analyze", version, about = "Convergence diagnostics for the harmonic explorer")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-mesh experiment; writes report.json, CSV tables and SVG plots.
    ///
    /// Exits 4 when any criterion fails; the report is still written.
    Convergence(ConvergenceArgs),
    /// Print the optimal exponents as text and JSON.
    Exponents,
    /// Structure modulus of one sampled path, as JSON.
    Modulus(ModulusArgs),
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    finish(match &cli.command {
        Command::Convergence(a) => cmd_convergence(a, &cli.global),
        Command::Exponents => cmd_exponents(&cli.global),
        Command::Modulus(a) => cmd_modulus(a, &cli.global),
    })
}
