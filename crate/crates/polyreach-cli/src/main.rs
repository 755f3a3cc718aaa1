//! Command-line front end: reachability runs, subset extraction,
//! falsification, safe-set partitioning, optimization, and containment
//! checks over stored results.

mod commands;
mod io;

use clap::{Args, Parser, Subcommand};
use commands::CommonOpts;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_COMPUTATION: u8 = 2;
const EXIT_CHECK_FAILURE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "polyreach",
    about = "Reachability analysis with sparse polynomial zonotopes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for every random choice; identical inputs and seed give
    /// byte-identical JSON and CSV outputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Progress notes on stderr.
    #[arg(long)]
    verbose: bool,
}

impl Common {
    fn opts(&self) -> CommonOpts {
        CommonOpts {
            out: self.out.clone(),
            seed: self.seed,
            verbose: self.verbose,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute the reachable set of a polynomial system.
    Reach {
        /// System description (JSON: n, m, vars, inputs, f).
        system: PathBuf,
        /// Initial set (polynomial zonotope, zonotope, or interval JSON).
        x0: PathBuf,
        /// Engine settings (JSON mirroring the settings fields).
        settings: PathBuf,
        /// Input set for systems with inputs (zonotope or interval JSON).
        #[arg(long)]
        input_set: Option<PathBuf>,
        /// Additionally write a point cloud of the exact sets.
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Extract the reachable subset for fixed initial-set factors.
    Extract {
        /// A result.json produced by `reach`.
        result: PathBuf,
        /// Factor values, e.g. "0.5,0.4".
        #[arg(long)]
        alpha: Option<String>,
        /// Initial state to parameterize, e.g. "-0.9,1.08".
        #[arg(long)]
        point: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Search for a verified falsifying trajectory against a halfspace spec.
    Falsify {
        result: PathBuf,
        /// Specification, e.g. "a=1,2;b=6.4" for a^T x <= b.
        #[arg(long)]
        spec: String,
        /// System description; defaults to system.json next to the result.
        #[arg(long)]
        system: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Partition the initial factor box into certified-safe and unknown parts.
    Partition {
        result: PathBuf,
        #[arg(long)]
        spec: String,
        /// Bisection depth.
        #[arg(long, default_value_t = 6)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Maximize the volume of a certified-safe initial factor box.
    Optimize {
        result: PathBuf,
        #[arg(long)]
        spec: String,
        /// Bisection tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Verify stored sets against simulated trajectories.
    Check {
        system: PathBuf,
        result: PathBuf,
        /// Number of sampled initial states.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Computation errors (divergence, failed fixed points) exit with 2;
/// everything else that goes wrong is a validation failure and exits with 1.
fn classify(err: &anyhow::Error) -> u8 {
    use polyreach::Error as E;
    if let Some(lib) = err.downcast_ref::<E>() {
        match lib {
            E::TruncationDiverged { .. } | E::AbstractionDiverged { .. } | E::NonFinite(_) => {
                return EXIT_COMPUTATION
            }
            _ => return EXIT_VALIDATION,
        }
    }
    EXIT_VALIDATION
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Reach {
            system,
            x0,
            settings,
            input_set,
            samples,
            common,
        } => commands::cmd_reach(
            system,
            x0,
            settings,
            input_set.as_deref(),
            *samples,
            &common.opts(),
        )
        .map(|()| true),
        Command::Extract {
            result,
            alpha,
            point,
            common,
        } => commands::cmd_extract(result, alpha.as_deref(), point.as_deref(), &common.opts())
            .map(|()| true),
        Command::Falsify {
            result,
            spec,
            system,
            common,
        } => commands::cmd_falsify(result, spec, system.as_deref(), &common.opts()).map(|()| true),
        Command::Partition {
            result,
            spec,
            depth,
            common,
        } => commands::cmd_partition(result, spec, *depth, &common.opts()).map(|()| true),
        Command::Optimize {
            result,
            spec,
            tol,
            common,
        } => commands::cmd_optimize(result, spec, *tol, &common.opts()).map(|()| true),
        Command::Check {
            system,
            result,
            samples,
            common,
        } => commands::cmd_check(system, result, *samples, &common.opts())
            .map(|outcome| outcome.all_pass),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILURE),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
