use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crowdquake_cli::{cmd_detect, cmd_ensemble, cmd_quality, cmd_run, cmd_simulate, exit_code, print_line};

/// Smartphone-network earthquake early warning: scenario simulation and
/// trigger-stream detection.
#[derive(Parser)]
#[command(name = "crowdquake", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the trigger stream and truth sidecar for a scenario.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Trigger JSONL output path (truth sidecar goes next to it).
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Detect earthquakes in a trigger file (simulated or replayed).
    Detect {
        #[arg(long)]
        scenario: PathBuf,
        /// Sorted trigger JSONL input.
        #[arg(long)]
        triggers: PathBuf,
        /// Detection JSONL output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate, detect, score and snapshot one run into a directory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run many seeds of one scenario and aggregate the metrics.
    Ensemble {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of runs; seeds are seed, seed+1, ...
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute waveform quality metrics for one record.
    Quality {
        /// Waveform CSV with header t,x,y,z.
        #[arg(long)]
        waveform: PathBuf,
        /// Epoch seconds of the trigger; defaults to first sample + 60 s.
        #[arg(long)]
        trigger_time: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Simulate { scenario, out, seed } => cmd_simulate(&scenario, &out, seed),
        Command::Detect { scenario, triggers, out } => cmd_detect(&scenario, &triggers, &out),
        Command::Run { scenario, out, seed } => cmd_run(&scenario, &out, seed),
        Command::Ensemble { scenario, out, runs, seed } => {
            cmd_ensemble(&scenario, &out, runs, seed).map(|summary| print_line(&summary))
        }
        Command::Quality { waveform, trigger_time } => {
            cmd_quality(&waveform, trigger_time).map(|report| print_line(&report))
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
