//! relaxlab command-line entry point.
//!
//! Exit codes: 0 = success (all thresholds met), 1 = operational error
//! (bad config, I/O), 2 = a verification threshold was violated.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use commands::{Ctx, Outcome};

#[derive(Parser)]
#[command(
    name = "relaxlab",
    version,
    about = "Spectral verification suites and solvers for damped Euler flows and their porous-medium limit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config for this subcommand
    #[arg(long)]
    config: PathBuf,
    /// Output directory (or RELAXLAB_OUT)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's random seed (or RELAXLAB_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Rayon worker threads (or RELAXLAB_THREADS)
    #[arg(long)]
    threads: Option<usize>,
    /// -v for progress, -vv for chatter
    #[arg(short, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Check the dyadic partition of unity and reconstruction
    LpVerify(CommonArgs),
    /// Evaluate a Besov or spectral Sobolev norm of a field
    Norm(CommonArgs),
    /// Verify the paraproduct identity and the commutator decomposition
    BonyVerify(CommonArgs),
    /// Random-pair sweep of the block commutator estimate
    CommutatorSuite(CommonArgs),
    /// Compensating-matrix identities over random directions
    SkVerify(CommonArgs),
    /// Integrate the damped Euler system in slow time
    SolveEuler(CommonArgs),
    /// Integrate the porous medium equation
    SolvePme(CommonArgs),
    /// Relaxation ladder vs the porous-medium reference, with order fits
    TauSweep(CommonArgs),
    /// Tau-uniform energy-inequality audit on a sweep
    AuditEnergy(CommonArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &CommonArgs, fn(&Ctx) -> anyhow::Result<Outcome>) {
        match self {
            Command::LpVerify(a) => ("lp-verify", a, commands::lp_verify),
            Command::Norm(a) => ("norm", a, commands::norm),
            Command::BonyVerify(a) => ("bony-verify", a, commands::bony_verify),
            Command::CommutatorSuite(a) => ("commutator-suite", a, commands::commutator_suite),
            Command::SkVerify(a) => ("sk-verify", a, commands::sk_verify),
            Command::SolveEuler(a) => ("solve-euler", a, commands::solve_euler),
            Command::SolvePme(a) => ("solve-pme", a, commands::solve_pme),
            Command::TauSweep(a) => ("tau-sweep", a, commands::tau_sweep),
            Command::AuditEnergy(a) => ("audit-energy", a, commands::audit_energy),
        }
    }
}

fn env_parse<T: std::str::FromStr>(name: &str) -> Option<T> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let (name, args, handler) = cli.command.split();
    let out_dir = args
        .out
        .clone()
        .or_else(|| env_parse::<PathBuf>("RELAXLAB_OUT"))
        .ok_or_else(|| anyhow::anyhow!("no output directory: pass --out or set RELAXLAB_OUT"))?;
    let seed = args.seed.or_else(|| env_parse("RELAXLAB_SEED"));
    let threads = args.threads.or_else(|| env_parse("RELAXLAB_THREADS"));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let ctx = Ctx {
        config_path: args.config.clone(),
        out_dir,
        seed,
        verbosity: args.verbose,
    };
    if ctx.verbosity > 1 {
        eprintln!("[relaxlab] subcommand {name}, config {}", ctx.config_path.display());
    }
    handler(&ctx)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // keep exit 2 reserved for threshold violations: clap errors
            // (unknown subcommand, bad flags) are operational errors
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Violation(msg)) => {
            eprintln!("threshold violation: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
