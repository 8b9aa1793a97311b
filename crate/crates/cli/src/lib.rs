//! Scenario loading and run orchestration behind the `aphi` binary.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use aphi_core::controller::ControllerVariant;
use aphi_core::sim::{metrics, run, MetricsReport, Scenario, SimLog};
use rayon::prelude::*;

pub use config::{load_scenario, parse_scenario, serialize_scenario};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "APHI_OUT_DIR";
/// Output directory when neither `--out` nor the environment sets one.
pub const DEFAULT_OUT_DIR: &str = "aphi-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: parse error: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}: {source}")]
    Validation { origin: String, source: aphi_core::Error },
    #[error("could not serialize scenario: {0}")]
    Serialize(String),
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("{failed} of {total} runs failed: {first}")]
    RunFailed { failed: usize, total: usize, first: String },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: 1 for failed simulations, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::RunFailed { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRequest {
    pub scenario_path: PathBuf,
    pub controller: Option<ControllerVariant>,
    pub duration: Option<f64>,
    /// First seed; repetition `i` uses `seed + i`. Defaults to the scenario's seed.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub repetitions: usize,
}

impl RunRequest {
    pub fn new(scenario_path: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            controller: None,
            duration: None,
            seed: None,
            out_dir: out_dir.into(),
            repetitions: 1,
        }
    }
}

/// One finished simulation and the files written for it.
#[derive(Debug)]
pub struct RunOutput {
    pub log: SimLog,
    pub metrics: MetricsReport,
    pub csv_path: PathBuf,
    pub metrics_path: PathBuf,
}

/// `--out`, then the environment variable, then [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn file_stem(s: &Scenario) -> String {
    format!("{}_{}_seed{}", s.name, s.controller.as_str(), s.wind.seed)
}

/// Simulates `s` and writes its CSV and metrics file into `out_dir`.
pub fn simulate_to(s: &Scenario, out_dir: &Path) -> Result<RunOutput, CliError> {
    let log = run(s).map_err(|e| CliError::Validation { origin: s.name.clone(), source: e })?;
    let report = metrics(&log);
    let stem = file_stem(s);
    let csv_path = out_dir.join(format!("{stem}.csv"));
    let metrics_path = out_dir.join(format!("{stem}.metrics.txt"));
    output::write_csv_file(&log, &csv_path)?;
    std::fs::write(&metrics_path, output::metrics_text(&log, &report)).map_err(|e| CliError::io(&metrics_path, e))?;
    Ok(RunOutput { log, metrics: report, csv_path, metrics_path })
}

fn prepare(path: &Path, controller: Option<ControllerVariant>, duration: Option<f64>) -> Result<Scenario, CliError> {
    let mut s = load_scenario(path)?;
    if let Some(c) = controller {
        s.controller = c;
    }
    if let Some(d) = duration {
        s.duration = d;
    }
    let origin = path.display().to_string();
    s.validate().map_err(|e| CliError::Validation { origin, source: e })?;
    Ok(s)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn check_failures(outputs: &[RunOutput]) -> Result<(), CliError> {
    let failed: Vec<&RunOutput> = outputs.iter().filter(|o| !o.log.completed()).collect();
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(CliError::RunFailed {
            failed: failed.len(),
            total: outputs.len(),
            first: format!(
                "{} seed {}: {}",
                first.log.controller.as_str(),
                first.log.seed,
                first.log.error.as_ref().map_or_else(String::new, |e| e.to_string())
            ),
        }),
    }
}

/// Runs every repetition in parallel. Logs of failed runs are still written; the
/// error reports how many failed.
pub fn run_command(req: &RunRequest) -> Result<Vec<RunOutput>, CliError> {
    if req.repetitions == 0 {
        return Err(CliError::NoRepetitions);
    }
    let base = prepare(&req.scenario_path, req.controller, req.duration)?;
    create_dir(&req.out_dir)?;
    let first_seed = req.seed.unwrap_or(base.wind.seed);
    let outputs = (0..req.repetitions as u64)
        .into_par_iter()
        .map(|i| simulate_to(&base.clone().with_seed(first_seed + i), &req.out_dir))
        .collect::<Result<Vec<_>, _>>()?;
    check_failures(&outputs)?;
    Ok(outputs)
}

/// Result of running every controller variant on one scenario.
#[derive(Debug)]
pub struct Comparison {
    pub runs: Vec<RunOutput>,
    pub table: String,
    pub table_path: PathBuf,
}

/// Runs all three variants, writes their logs and a combined table. A baseline
/// that diverges is part of the comparison, not a failure.
pub fn compare_command(
    path: &Path,
    seed: Option<u64>,
    duration: Option<f64>,
    out_dir: &Path,
) -> Result<Comparison, CliError> {
    let mut base = prepare(path, None, duration)?;
    if let Some(seed) = seed {
        base = base.with_seed(seed);
    }
    create_dir(out_dir)?;
    let runs = ControllerVariant::ALL
        .par_iter()
        .map(|&v| simulate_to(&Scenario { controller: v, ..base.clone() }, out_dir))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(&SimLog, &MetricsReport)> = runs.iter().map(|r| (&r.log, &r.metrics)).collect();
    let table = output::comparison_table(&pairs);
    let table_path = out_dir.join(format!("{}_seed{}_compare.txt", base.name, base.wind.seed));
    std::fs::write(&table_path, &table).map_err(|e| CliError::io(&table_path, e))?;
    Ok(Comparison { runs, table, table_path })
}

/// Loads and validates a scenario file, returning the resolved scenario.
pub fn validate_command(path: &Path) -> Result<Scenario, CliError> {
    load_scenario(path)
}
