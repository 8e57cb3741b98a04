//! Command-line front end for the link-level simulator: runs experiment
//! files, validates them, and prints fully populated default
//! configurations. See the crate README for the file formats.

use clap::{Parser, Subcommand};
use hetsim::harness::{
    ExperimentSpec, HarnessError, Overrides, ScenarioKind, default_config_toml, run_experiment,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hetsim",
    version,
    about = "Monte Carlo link-level simulator for massive-MIMO beamforming, \
             vehicle relays, and dual-band cell association"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment file and write its result table as CSV.
    ///
    /// The output path comes from --out, then the file's output_path key,
    /// then `<scenario>.csv`. Set HETSIM_WORKERS to cap parallelism
    /// (values never change with worker count).
    Run {
        /// Experiment file (TOML).
        config: PathBuf,
        /// Master seed, overriding the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo repetitions, overriding the file (UEs per grid
        /// point for the association sweep).
        #[arg(long)]
        trials: Option<usize>,
        /// Output CSV path, overriding the file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate an experiment file without running it.
    Validate {
        /// Experiment file (TOML).
        config: PathBuf,
    },
    /// Print a fully populated default experiment for a scenario.
    Defaults {
        /// Scenario tag: hybrid_vs_digital, mobile_relay, or dual_band_sweep.
        scenario: String,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out,
        } => {
            let mut spec = ExperimentSpec::from_toml_file(&config)?;
            spec.apply(&Overrides {
                seed,
                trials,
                output_path: out,
            });
            let output_path = spec
                .output_path
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.config.kind().tag())));
            let summary = run_experiment(&spec)?;
            summary.table.write_csv(&output_path)?;
            println!("scenario: {}", summary.scenario);
            println!("seed: {}", summary.seed);
            println!("trials: {}", summary.trials);
            println!("wall time: {:?}", summary.wall_time);
            println!("wrote: {}", output_path.display());
            for note in &summary.notes {
                println!("note: {note}");
            }
            Ok(())
        }
        Command::Validate { config } => {
            let spec = ExperimentSpec::from_toml_file(&config)?;
            spec.validate()?;
            println!(
                "ok: {} experiment (seed {}, trials {})",
                spec.config.kind(),
                spec.seed,
                spec.config.trials()
            );
            Ok(())
        }
        Command::Defaults { scenario } => {
            let kind: ScenarioKind = scenario.parse()?;
            print!("{}", default_config_toml(kind));
            Ok(())
        }
    }
}
