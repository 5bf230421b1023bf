//! `grasp`: plan precision grasps, export traces, validate input files.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status when a run finishes without an accepted grasp.
const EXIT_NO_GRASP: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "grasp", version, about = "Precision-grasp planning on object point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan grasps on an object and write results, manifest and traces.
    Plan(PlanArgs),
    /// Print per-iteration objective values from a results file as CSV.
    Trace(TraceArgs),
    /// Check a hand model and/or object file and print point counts.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Object mesh (.obj, .ply) or point cloud (.ply).
    #[arg(long)]
    object: PathBuf,
    /// Hand model file; the built-in three-finger hand when omitted.
    #[arg(long)]
    hand: Option<PathBuf>,
    /// Planner configuration (JSON); flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Last iteration index of each run.
    #[arg(long)]
    tmax: Option<usize>,
    /// Weight of the approach-alignment term.
    #[arg(long)]
    beta: Option<f64>,
    /// Initial penalty weight.
    #[arg(long)]
    w0: Option<f64>,
    /// Per-iteration penalty growth factor.
    #[arg(long = "w-growth")]
    w_growth: Option<f64>,
    #[arg(long = "k-clusters")]
    k_clusters: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Surface samples drawn from a mesh object.
    #[arg(long, default_value_t = grasp_core::io::DEFAULT_OBJECT_SAMPLES)]
    points: usize,
    /// Output directory.
    #[arg(long, default_value = "grasp_out")]
    out: PathBuf,
    /// Also write the object cloud and every posed hand as PLY.
    #[arg(long)]
    export_clouds: bool,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Results file written by `plan`.
    results: PathBuf,
    /// Only the grasp drawn as this sample.
    #[arg(long, conflicts_with = "bands")]
    sample: Option<usize>,
    /// Per-iteration mean and standard deviation over all grasps.
    #[arg(long)]
    bands: bool,
    /// Write here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Hand model file; the built-in hand when neither file is given.
    #[arg(long)]
    hand: Option<PathBuf>,
    #[arg(long)]
    object: Option<PathBuf>,
    /// Surface samples drawn from a mesh object.
    #[arg(long, default_value_t = grasp_core::io::DEFAULT_OBJECT_SAMPLES)]
    points: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRASP_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Plan(a) => commands::plan(&a),
        Command::Trace(a) => commands::trace(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
