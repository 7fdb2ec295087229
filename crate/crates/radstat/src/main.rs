use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radstat::commands::workers_from_env;
use radstat::{cmd_compare, cmd_solve, cmd_sweep, cmd_verify, parse_config, CliError, Exit, Options};

/// Stationary radially symmetric flows of a viscous heat-conducting gas
/// outside the unit sphere.
///
/// Exit status: 0 success, 1 input error, 2 iteration did not converge,
/// 3 a hard verification check failed. RADSTAT_WORKERS caps sweep threads.
#[derive(Parser, Debug)]
#[command(name = "radstat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory for artifacts and the manifest.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Suppress progress messages.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve by successive approximation (closed form when u_minus = 0).
    Solve(Common),
    /// Check a profile: residuals, decay fits, bounds, oracle agreement.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Profile to check [default: profile.txt in --out].
        #[arg(long, value_name = "PATH")]
        profile: Option<PathBuf>,
    },
    /// Solve along the axis of the [sweep] table.
    Sweep(Common),
    /// Compare the fixed-point and boundary-value solvers.
    Compare(Common),
}

fn run(cli: Cli) -> Result<Exit, CliError> {
    let (common, profile) = match &cli.command {
        Command::Solve(c) | Command::Sweep(c) | Command::Compare(c) => (c, None),
        Command::Verify { common, profile } => (common, profile.clone()),
    };
    let spec = parse_config(&common.config)?;
    let workers = match cli.command {
        Command::Sweep(_) => workers_from_env()?,
        _ => 1,
    };
    let opts = Options { out: common.out.clone(), quiet: common.quiet, profile, workers };
    match cli.command {
        Command::Solve(_) => cmd_solve(&spec, &opts),
        Command::Verify { .. } => cmd_verify(&spec, &opts),
        Command::Sweep(_) => cmd_sweep(&spec, &opts),
        Command::Compare(_) => cmd_compare(&spec, &opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Exit::InputError.code() as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit.code() as u8),
        Err(e) => {
            eprintln!("radstat: error: {e}");
            ExitCode::from(Exit::InputError.code() as u8)
        }
    }
}
