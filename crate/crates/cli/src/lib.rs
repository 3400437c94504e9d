//! Batch front end: each subcommand reads one JSON file, runs its checks
//! and exits 0 (all pass), 1 (a check failed) or 2 (bad input).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use algebroid::io::{check_version, InputError};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

mod commands;
mod report;

pub use report::{Check, Report};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Invalid(String),
}

impl From<algebroid::gauge::GaugeError> for CliError {
    fn from(e: algebroid::gauge::GaugeError) -> Self {
        CliError::Input(e.into())
    }
}

impl From<algebroid::morphism::MorphismError> for CliError {
    fn from(e: algebroid::morphism::MorphismError) -> Self {
        CliError::Input(e.into())
    }
}

impl From<algebroid::fieldcalc::FieldError> for CliError {
    fn from(e: algebroid::fieldcalc::FieldError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<algebroid::flow::FlowError> for CliError {
    fn from(e: algebroid::flow::FlowError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "algebroid", version, about = "Checks for Lie algebroids, their morphisms and gauge symmetries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input definition (JSON, "version": 1)
    pub file: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub trials: usize,
    #[arg(long, default_value_t = 2)]
    pub degree: u32,
    /// Write the full report as JSON ("-" for stdout)
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Include wall-clock timing in the JSON report
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    /// Write the trajectory as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the final fields as JSON arrays
    #[arg(long)]
    pub state: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Algebroid axioms for each listed algebroid
    CheckAlgebroid(Common),
    /// Jacobi identity of a bivector
    CheckPoisson(Common),
    /// Field strengths, chain-map and graph verdicts for bundle maps
    CheckMorphism(Common),
    /// Closure of gauge transformations on random fields
    GaugeClosure(Common),
    /// Frame-change identities for field strengths and gauge defects
    FrameCovariance(Common),
    /// Sigma-model action, its gauge variation and torsion criterion
    PsmVariation(Common),
    /// Numeric gauge flow on a periodic grid
    Flow(FlowArgs),
}

pub(crate) fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(InputError::from)?;
    check_version(&value)?;
    Ok(serde_json::from_value(value).map_err(InputError::from)?)
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.as_os_str() == "-" {
        std::io::stdout().write_all(text.as_bytes()).map_err(io)
    } else {
        fs::write(path, text).map_err(io)
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let start = Instant::now();
    let (common, result) = match &cli.command {
        Command::CheckAlgebroid(c) => (c, commands::check_algebroid(c)),
        Command::CheckPoisson(c) => (c, commands::check_poisson(c)),
        Command::CheckMorphism(c) => (c, commands::check_morphism(c)),
        Command::GaugeClosure(c) => (c, commands::gauge_closure(c)),
        Command::FrameCovariance(c) => (c, commands::frame_covariance(c)),
        Command::PsmVariation(c) => (c, commands::psm_variation(c)),
        Command::Flow(f) => (&f.common, commands::flow(f)),
    };
    let mut report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if common.timing {
        report.timing_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    eprint!("{}", report.summary());
    if let Some(path) = &common.json {
        let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
        text.push('\n');
        if let Err(e) = write_file(path, &text) {
            eprintln!("error: {e}");
            return 2;
        }
    }
    if report.pass {
        0
    } else {
        1
    }
}
