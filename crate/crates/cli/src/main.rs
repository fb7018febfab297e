use std::path::PathBuf;

use clap::{Parser, Subcommand};
use fracpm_cli::{run, Command, Options, EXIT_CONFIG};

/// Numerical experiments for the fractional porous-medium equation and its
/// particle approximation.
#[derive(Parser, Debug)]
#[command(name = "fracpm", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML configuration file; the default scenario when absent.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Exit with status 4 when an acceptance property fails.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Operator exactness, quadrature cross-checks and inequality probes.
    VerifyOperators,
    /// Macro or intermediate equation with diagnostics and snapshots.
    SolvePde,
    /// Dyadic β and ζ sweeps of the intermediate-to-macro gap with rate fits.
    ConvergeBetaZeta,
    /// Pathwise error functionals along the (β, ζ, N) schedule.
    ConvergeN,
    /// Distances of the particle system to the limit density along the schedule.
    ChaosTest,
    /// Vanishing-viscosity continuation.
    SigmaLimit,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let command = match cli.command {
        Sub::VerifyOperators => Command::VerifyOperators,
        Sub::SolvePde => Command::SolvePde,
        Sub::ConvergeBetaZeta => Command::ConvergeBetaZeta,
        Sub::ConvergeN => Command::ConvergeN,
        Sub::ChaosTest => Command::ChaosTest,
        Sub::SigmaLimit => Command::SigmaLimit,
    };
    let opts = Options {
        command,
        config: cli.config,
        out: cli.out,
        threads: cli.threads,
        seed: cli.seed,
        strict: cli.strict,
    };
    std::process::exit(run(&opts));
}
