//! Batch front end for the bps-vortex solvers.
//!
//! Exit codes: 0 ok, 1 gate check negative, 2 gate refusal, 3 no convergence,
//! 4 converged but a diagnostic check failed, 64 malformed input, 70 internal
//! error, 74 I/O error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bps_vortex::VortexError;
use clap::{Parser, Subcommand};

use commands::SweepParam;
use config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INADMISSIBLE: u8 = 1;
pub const EXIT_GATE: u8 = 2;
pub const EXIT_NONCONVERGENCE: u8 = 3;
pub const EXIT_CHECKS: u8 = 4;
pub const EXIT_PARSE: u8 = 64;
pub const EXIT_INTERNAL: u8 = 70;
pub const EXIT_IO: u8 = 74;

/// A terminating error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(EXIT_PARSE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, message)
    }
}

impl From<VortexError> for Failure {
    fn from(e: VortexError) -> Self {
        let code = match &e {
            VortexError::GateRefused(_) => EXIT_GATE,
            VortexError::NonConvergence { .. } | VortexError::LineSearch { .. } | VortexError::Diverging { .. } => {
                EXIT_NONCONVERGENCE
            }
            VortexError::Domain(_) | VortexError::Shape { .. } | VortexError::WrongDomain(_) | VortexError::Underflow { .. } => {
                EXIT_PARSE
            }
            VortexError::Io(_) => EXIT_IO,
            _ => EXIT_INTERNAL,
        };
        Self::new(code, e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "bps-vortex", version, about = "Multi-vortex solutions of coupled BPS vortex equations")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial fields (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run the torus solver even when the existence condition fails.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for field operations and concurrent solves.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the existence condition of a torus configuration.
    Check,
    /// Solve and write field dumps, the iteration table and diagnostics.
    Solve,
    /// One solve per value of a parameter; writes `sweep_<param>.csv`.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Parameter values; an empty list writes the header only.
        values: Vec<f64>,
    },
}

fn run(cli: Cli) -> Result<u8, Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?;
    }
    let path = cli.config.ok_or_else(|| Failure::parse("missing --config <path>"))?;
    let cfg = RunConfig::load(&path)?;
    let out = cli
        .out
        .or_else(|| cfg.out.as_ref().map(|o| cfg.base.join(o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = cli.seed.unwrap_or(cfg.seed);
    match cli.command {
        Command::Check => commands::check(&cfg),
        Command::Solve => commands::solve(&cfg, &out, seed, cli.force),
        Command::Sweep { param, values } => commands::sweep(&cfg, param, &values, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
