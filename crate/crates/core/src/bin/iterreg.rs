use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iterreg::experiments::{self, Experiment, ExperimentReport, RunConfig};
use iterreg::{Error, Result};

/// Iterative regularization experiments.
#[derive(Parser)]
#[command(name = "iterreg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error bounds of DGD and ADGD on source-condition problems.
    #[command(name = "oracle_bounds")]
    OracleBounds(RunArgs),
    /// Stopped error against the noise level.
    #[command(name = "rate_sweep")]
    RateSweep(RunArgs),
    /// Sparse regression against the Tikhonov path.
    #[command(name = "variable_selection")]
    VariableSelection(RunArgs),
    /// Low-rank completion against the Tikhonov path.
    #[command(name = "matrix_completion")]
    MatrixCompletion(RunArgs),
    /// Total-variation deblurring.
    #[command(name = "deblurring")]
    Deblurring(RunArgs),
    /// Side-by-side table of two reports.
    Compare {
        /// Report directory or report.json.
        a: PathBuf,
        b: PathBuf,
        /// Output CSV (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_experiment(exp: Experiment, args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cfg.experiment {
        Some(e) if e != exp => {
            return Err(Error::Config(format!(
                "config is for {} but {} was requested",
                e.name(),
                exp.name()
            )))
        }
        _ => cfg.experiment = Some(exp),
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(o) = args.out {
        cfg.output_dir = Some(o);
    }
    let out = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("iterreg-{}", exp.name())));

    let report = experiments::run(&cfg)?;
    report.write(&out)?;
    for (name, a) in &report.aggregates {
        println!("{name:<36} {:>14.6e} ({:.3e})", a.mean, a.std);
    }
    for (name, v) in &report.summary {
        println!("{name:<36} {v:>14.6e}");
    }
    if report.failed_rows() > 0 {
        eprintln!("iterreg: {} trial(s) failed; see {}", report.failed_rows(), out.join("metrics.csv").display());
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::OracleBounds(a) => run_experiment(Experiment::OracleBounds, a),
        Command::RateSweep(a) => run_experiment(Experiment::RateSweep, a),
        Command::VariableSelection(a) => run_experiment(Experiment::VariableSelection, a),
        Command::MatrixCompletion(a) => run_experiment(Experiment::MatrixCompletion, a),
        Command::Deblurring(a) => run_experiment(Experiment::Deblurring, a),
        Command::Compare { a, b, out } => (|| {
            let table = experiments::compare(&ExperimentReport::load(a)?, &ExperimentReport::load(b)?)?;
            match out {
                Some(p) => std::fs::write(&p, table).map_err(|e| Error::Io { path: p, source: e }),
                None => {
                    print!("{table}");
                    Ok(())
                }
            }
        })(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iterreg: error: {e}");
            ExitCode::FAILURE
        }
    }
}
