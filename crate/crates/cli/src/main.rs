use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hapdyad_core::harness;
use hapdyad_core::Error;

/// Simulated haptic dyads: session simulation, curve fits, leadership
/// analysis and figure data.
#[derive(Parser)]
#[command(name = "hapdyad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every dyad in a session config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core); overrides the config.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Fit member and dyad psychometric curves.
    Fit {
        /// `records.csv` or the simulation directory holding it.
        #[arg(long)]
        records: PathBuf,
        /// Also fit each block separately.
        #[arg(long)]
        per_block: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leadership predictors, force, work, velocity and timing statistics.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        /// First-crossing thresholds; defaults to the run's config.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        thresholds: Option<Vec<f64>>,
        /// Config to check against the manifest instead of the stored copy.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Theoretical and simulated collective benefit over sensitivity ratios.
    Sweep {
        #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
        ratios: Vec<f64>,
        /// Trials per contrast level for each simulated dyad.
        #[arg(long)]
        trials_per_point: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        repetitions: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Figure data for a simulated cohort.
    Report {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> hapdyad_core::Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate { config, out, workers } => {
            let m = harness::cmd_simulate(&config, out.as_deref(), workers)?;
            eprintln!(
                "{} dyads, {} records, {} trajectories",
                m.n_dyads, m.n_records, m.n_trajectories
            );
            Ok(vec![])
        }
        Command::Fit { records, per_block, out } => {
            Ok(vec![harness::cmd_fit(&records, per_block, out.as_deref())?])
        }
        Command::Analyze {
            records,
            thresholds,
            config,
            out,
        } => harness::cmd_analyze(&records, thresholds.as_deref(), config.as_deref(), out.as_deref()),
        Command::Sweep {
            ratios,
            trials_per_point,
            seed,
            repetitions,
            out,
        } => Ok(vec![harness::cmd_sweep(&ratios, trials_per_point, seed, repetitions, &out)?]),
        Command::Report { cohort, out } => harness::cmd_report(&cohort, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}
