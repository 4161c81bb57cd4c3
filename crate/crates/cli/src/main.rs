//! `polysep`: generate planted data, train polyhedral classifiers, predict,
//! evaluate, plan sample sizes and run the planar separability oracle.
//!
//! Every command prints a JSON report on stdout. Exit codes: 0 success,
//! 1 infeasible (no separating polyhedron / infeasible generator config),
//! 2 input error, 3 internal fault.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polysep_core::{Error, KernelSpec};

#[derive(Parser)]
#[command(name = "polysep", version, about = "Large-margin polyhedral classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a planted t-polyhedron instance
    Gen(GenArgs),
    /// Learn a classifier from a labelled CSV
    Train(TrainArgs),
    /// Write predicted labels for a CSV of queries
    Predict(PredictArgs),
    /// Error rate and confusion counts on a labelled CSV
    Eval(EvalArgs),
    /// VC-dimension and sample-size planning values
    PacPlan(PacArgs),
    /// Brute-force margin check for 2-D data under the linear kernel
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long)]
    gamma: f64,
    /// Minimum distance between opposite labels [default: 2 * gamma]
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV
    #[arg(long)]
    out: PathBuf,
    /// Also write the planted halfspaces as JSON
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Lp,
    Proper,
    Improper,
    LpDisc,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "linear")]
    kernel: KernelSpec,
    #[arg(long)]
    gamma: f64,
    /// Halfspace budget (proper) or level-cap hint (improper)
    #[arg(long, default_value_t = 1)]
    t: usize,
    #[arg(long, value_enum, default_value = "proper")]
    mode: Mode,
    /// Accepted for interface uniformity; training is deterministic
    #[arg(long)]
    seed: Option<u64>,
    /// Output model JSON
    #[arg(long)]
    out: PathBuf,
    /// Divide linear-kernel data by its maximum norm when that exceeds 1
    #[arg(long)]
    autoscale: bool,
    /// Feature-map Lipschitz bound for lp-disc [default: derived from the kernel]
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Include a summary of the final search level in the report
    #[arg(long)]
    record_nodes: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV with one label per row
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct PacArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    t: usize,
    /// Euclidean dimension
    #[arg(long, conflicts_with_all = ["s", "lipschitz", "kernel"])]
    d: Option<usize>,
    /// Encoding dimension of an RKHS query
    #[arg(long, requires = "rkhs")]
    s: Option<usize>,
    #[arg(long, group = "rkhs")]
    lipschitz: Option<f64>,
    /// Derive the Lipschitz bound from this kernel
    #[arg(long, group = "rkhs")]
    kernel: Option<KernelSpec>,
    #[arg(long)]
    improper: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    gamma: f64,
}

/// Non-error terminal states that still map to a nonzero exit code.
pub enum Outcome {
    Done,
    Infeasible,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigInfeasible(_) => 1,
        Error::Internal(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Eval(a) => commands::eval(a),
        Command::PacPlan(a) => commands::pac_plan(a),
        Command::Oracle(a) => commands::oracle(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(1),
        Err(err) => {
            let report = serde_json::json!({ "error": err.to_string(), "exit_code": exit_code(&err) });
            eprintln!("{report}");
            ExitCode::from(exit_code(&err))
        }
    }
}
