//! Batch verification CLI. Exit codes: 0 all within tolerance, 1 tolerance
//! violations or per-row numeric failures, 2 configuration errors.
//!
//! Worker count follows `RAYON_NUM_THREADS` (default: available
//! parallelism); reports are byte-identical for identical config and seed
//! regardless of the worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geofourier_cli::{
    run_breakdown_demo, run_convergence, run_property_suite, run_verify, write_csv,
    write_summary, CliError, ExperimentConfig, RunOutcome,
};

#[derive(Parser)]
#[command(name = "geofourier", about = "Fourier inversion experiments on manifold charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV reports and summaries
    #[arg(long)]
    out: PathBuf,
    /// Override the config tolerance
    #[arg(long)]
    tolerance: Option<f64>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Include wall-clock timing in the CSV (breaks byte-reproducibility)
    #[arg(long, default_value_t = false)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the inversion and the direct application at every base point
    Verify(CommonArgs),
    /// Sweep grid sizes and integrator steps, reporting convergence orders
    Converge(CommonArgs),
    /// Order-3 breakdown demo: curved discrepancy vs flat control
    Breakdown(CommonArgs),
    /// Seeded randomized property suite over the zoo
    Props(CommonArgs),
}

fn load(args: &CommonArgs) -> Result<(ExperimentConfig, f64), CliError> {
    let mut config = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let tolerance = args.tolerance.unwrap_or(config.tolerance);
    std::fs::create_dir_all(&args.out)?;
    Ok((config, tolerance))
}

fn emit(args: &CommonArgs, config: &ExperimentConfig, outcome: &RunOutcome, kind: &str) -> Result<(), CliError> {
    let csv_path = args.out.join(format!("{}_{kind}.csv", config.id));
    write_csv(&csv_path, &outcome.rows, args.timing)?;
    let summary_path = args.out.join(format!("{}_{kind}_summary.txt", config.id));
    write_summary(&summary_path, &outcome.summary)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!("report: {}", csv_path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<usize, CliError> {
    match cli.command {
        Command::Verify(args) => {
            let (config, tolerance) = load(&args)?;
            let outcome = run_verify(&config, tolerance)?;
            emit(&args, &config, &outcome, "verify")?;
            Ok(outcome.violations)
        }
        Command::Converge(args) => {
            let (config, tolerance) = load(&args)?;
            let outcome = run_convergence(&config, tolerance)?;
            emit(&args, &config, &outcome, "converge")?;
            Ok(outcome.violations)
        }
        Command::Breakdown(args) => {
            let (config, tolerance) = load(&args)?;
            let outcome = run_breakdown_demo(&config, tolerance)?;
            emit(&args, &config, &outcome, "breakdown")?;
            Ok(outcome.violations)
        }
        Command::Props(args) => {
            let (config, tolerance) = load(&args)?;
            let (results, summary) = run_property_suite(&config, tolerance)?;
            let summary_path = args.out.join(format!("{}_props_summary.txt", config.id));
            write_summary(&summary_path, &summary)?;
            for line in &summary {
                println!("{line}");
            }
            Ok(results.iter().filter(|r| !r.passed()).count())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(violations) => {
            eprintln!("{violations} violation(s)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
