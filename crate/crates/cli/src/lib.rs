//! Configuration-driven driver for the wavelab solver: time integration,
//! convergence and equivalence studies, breaking searches, and the
//! estimate-verification suite.
//!
//! Exit codes: 0 success, 2 configuration error, 3 breaking detected,
//! 4 numerical or output failure, 5 verification failure.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::commands::Outcome;
use crate::config::RunConfig;
use crate::output::RunRecord;

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const BREAKING: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const VERIFICATION: i32 = 5;
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable overriding `outputs.out_dir`.
pub const OUT_ENV: &str = "WAVELAB_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    VerifyLemmas,
    Convergence,
    Equivalence,
    BreakingSearch,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::VerifyLemmas => "verify-lemmas",
            Command::Convergence => "convergence",
            Command::Equivalence => "equivalence",
            Command::BreakingSearch => "breaking-search",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

/// `--out`, then `$WAVELAB_OUT`, then `outputs.out_dir`.
pub fn resolve_out_dir(cli: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match env {
        Some(e) if !e.is_empty() => PathBuf::from(e),
        _ => cfg.outputs.out_dir.clone(),
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs one command end to end and returns its exit code.
pub fn run(cmd: Command, opts: &Options) -> i32 {
    let mut cfg = match RunConfig::load(&opts.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("wavelab {}: configuration error: {e}", cmd.name());
            return exit::CONFIG;
        }
    };
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_out_dir(opts.out.as_deref(), env.as_deref(), &cfg);
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("wavelab {}: cannot create {}: {e}", cmd.name(), out.display());
        return exit::NUMERICAL;
    }

    let started_unix = unix_now();
    let clock = Instant::now();
    let outcome = match cmd {
        Command::Solve => commands::solve(&cfg, &out),
        Command::VerifyLemmas => commands::verify_lemmas(&cfg, &out),
        Command::Convergence => commands::convergence(&cfg, &out),
        Command::Equivalence => commands::equivalence(&cfg, &out),
        Command::BreakingSearch => commands::breaking_search(&cfg, &out),
    };
    let record = RunRecord {
        version: VERSION.to_string(),
        command: cmd.name().to_string(),
        config_digest: cfg.digest(),
        status: outcome.status.clone(),
        exit_code: outcome.exit_code,
        termination: outcome.termination.map(|t| t.label().to_string()),
        breaking_time: outcome.breaking_time,
        warnings: outcome.warnings.clone(),
        final_norms: outcome.final_norms.clone(),
        started_unix,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
    };
    report(cmd, &outcome, opts.quiet);
    if let Err(e) = record.write(&out) {
        eprintln!("wavelab {}: cannot write run.json: {e}", cmd.name());
        return exit::NUMERICAL;
    }
    outcome.exit_code
}

fn report(cmd: Command, outcome: &Outcome, quiet: bool) {
    for w in &outcome.warnings {
        eprintln!("wavelab {}: warning: {w}", cmd.name());
    }
    if outcome.exit_code != exit::OK && outcome.exit_code != exit::BREAKING {
        eprintln!("wavelab {}: {}", cmd.name(), outcome.status);
    }
    if !quiet {
        for m in &outcome.messages {
            println!("{m}");
        }
    }
}
