use std::path::PathBuf;
use std::process::ExitCode;

use aphi_cli::config::parse_controller;
use aphi_cli::{compare_command, resolve_out_dir, run_command, validate_command, CliError, RunRequest};
use aphi_core::controller::ControllerVariant;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aphi", version, about = "Simulate a tilted-hexarotor aerial manipulator under a thrust-limit safety filter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write CSV logs and metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// none, clamp or filter (long names also accepted).
        #[arg(long, value_parser = parse_controller)]
        controller: Option<ControllerVariant>,
        /// First seed; repetition i uses seed + i.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Override the scenario duration (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Output directory [default: $APHI_OUT_DIR or ./aphi-out].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run all three controllers on a scenario and tabulate their metrics.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file and print the resolved configuration.
    Validate { path: PathBuf },
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { scenario, controller, seed, reps, duration, out } => {
            let req = RunRequest {
                scenario_path: scenario,
                controller,
                duration,
                seed,
                out_dir: resolve_out_dir(out),
                repetitions: reps,
            };
            for o in run_command(&req)? {
                eprintln!("{}", o.csv_path.display());
                for w in &o.log.warnings {
                    eprintln!("warning: {w}");
                }
            }
            Ok(())
        }
        Command::Compare { scenario, seed, duration, out } => {
            let cmp = compare_command(&scenario, seed, duration, &resolve_out_dir(out))?;
            print!("{}", cmp.table);
            eprintln!("{}", cmp.table_path.display());
            Ok(())
        }
        Command::Validate { path } => {
            let s = validate_command(&path)?;
            println!("{}: ok", path.display());
            print!("{}", aphi_cli::serialize_scenario(&s)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
