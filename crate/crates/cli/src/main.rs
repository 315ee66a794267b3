// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use wavelab::{run, Command, Options};

#[derive(Parser)]
#[command(name = "wavelab", version, about = "Pseudospectral solver and estimate suite for a shallow-water wave model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the model and write monitors, snapshots and run.json.
    Solve(Common),
    /// Run every estimate check and write lemmas.jsonl.
    VerifyLemmas(Common),
    /// Temporal order and spatial refinement study.
    Convergence(Common),
    /// Compare split and direct right-hand sides on a field battery.
    Equivalence(Common),
    /// Sweep initial amplitudes and record breaking times.
    BreakingSearch(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (TOML with dotted sections).
    config: PathBuf,
    /// Output directory; overrides WAVELAB_OUT and outputs.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() {
    let cli = Cli::parse();
    let (cmd, c) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::VerifyLemmas(c) => (Command::VerifyLemmas, c),
        Cmd::Convergence(c) => (Command::Convergence, c),
        Cmd::Equivalence(c) => (Command::Equivalence, c),
        Cmd::BreakingSearch(c) => (Command::BreakingSearch, c),
    };
    let opts = Options { config: c.config, out: c.out, seed: c.seed, quiet: c.quiet };
    std::process::exit(run(cmd, &opts));
}
