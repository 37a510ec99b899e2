//! Command-line front end: configuration, scenario orchestration and report
//! emission.
//!
//! Subcommands `curvature`, `loop`, `paths`, `kernel`, `closure` and
//! `full-suite` each run one verification suite (all of them for
//! `full-suite`) and write `report.json` plus one CSV per scan into the
//! output directory. Every numeric check in the report carries its value,
//! tolerance, comparison and pass flag.
//!
//! Configuration comes from an optional `--config` file (sectioned
//! `key = value` TOML, or JSON) and is then overridden by flags. Extra flat
//! hierarchies can be declared as gauges of the free hierarchy with the
//! expression grammar documented in [`gauge`], e.g.
//!
//! ```toml
//! [hierarchy]
//! gauges = ["q: t1 - 0.5*t2; p: 0.3*t1*t2"]
//! ```
//!
//! `ONEFORM_LAB_THREADS` caps the worker pool. Exit codes: 0 all assertions
//! pass, 1 an assertion failed, 2 configuration error, 3 compute or I/O
//! error.

pub mod config;
pub mod gauge;
pub mod report;
pub mod scenarios;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::error::Error as ComputeError;

pub use config::{BuiltinName, Overrides, ScenarioConfig, ScenarioKind};
pub use report::{Assertion, Comparison, CsvTable, Report, Section};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

pub const THREADS_ENV: &str = "ONEFORM_LAB_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("compute error in {scenario}: {source}")]
    Compute {
        scenario: String,
        source: ComputeError,
    },
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Compute { .. } | CliError::Io(_) => EXIT_COMPUTE,
        }
    }

    /// The message without the category prefix.
    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) | CliError::Io(m) => m.clone(),
            CliError::Compute { source, .. } => source.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "oneform-lab",
    version,
    about = "Multi-time quantum integrability laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: GlobalArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zero-curvature residuals of flat and non-flat hierarchies.
    Curvature,
    /// Loop residuals, their convergence and area scaling.
    Loop,
    /// Staircase path enumeration and redundancy analysis.
    Paths,
    /// Gaussian multi-time kernels, the operator oracle and the path gap.
    Kernel,
    /// Classical closure relation and path independence of the action.
    Closure,
    /// Every suite.
    FullSuite,
}

impl Command {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Command::Curvature => ScenarioKind::Curvature,
            Command::Loop => ScenarioKind::Loop,
            Command::Paths => ScenarioKind::Paths,
            Command::Kernel => ScenarioKind::Kernel,
            Command::Closure => ScenarioKind::Closure,
            Command::FullSuite => ScenarioKind::FullSuite,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Configuration file (TOML sections, or JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Hilbert-space dimension of the hierarchy suites.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Lattice steps per time axis.
    #[arg(long = "N", global = true)]
    pub steps: Option<u32>,
    /// Number of time directions (2 or 3).
    #[arg(long, global = true)]
    pub ntimes: Option<usize>,
    /// Frequency of the first time direction.
    #[arg(long, global = true)]
    pub w1: Option<f64>,
    /// Frequency of the second time direction.
    #[arg(long, global = true)]
    pub w2: Option<f64>,
    /// Total duration along the first time direction.
    #[arg(long = "T1", global = true)]
    pub t1: Option<f64>,
    /// Total duration along the second time direction.
    #[arg(long = "T2", global = true)]
    pub t2: Option<f64>,
    /// Integrator steps per unit time.
    #[arg(long, global = true)]
    pub steps_per_unit: Option<usize>,
    /// Alias of --steps-per-unit.
    #[arg(long = "steps", global = true, conflicts_with = "steps_per_unit")]
    pub steps_alias: Option<usize>,
    /// Overrides the scenario's primary tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Seed of the random parameter draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Hierarchies to include.
    #[arg(long, value_enum, global = true)]
    pub builtin: Option<BuiltinName>,
    /// Reproduce the fluctuation-mode lists and equal-frequency kernels.
    #[arg(long, global = true)]
    pub appendix_e: bool,
    /// Planck constant for both the hierarchies and the kernels.
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            dim: self.dim,
            steps: self.steps,
            n_times: self.ntimes,
            w1: self.w1,
            w2: self.w2,
            t1: self.t1,
            t2: self.t2,
            steps_per_unit: self.steps_per_unit.or(self.steps_alias),
            tol: self.tol,
            seed: self.seed,
            out: self.out.clone(),
            builtin: self.builtin,
            appendix_e: self.appendix_e,
            hbar: self.hbar,
        }
    }
}

/// Loads, overrides and validates the configuration for a subcommand.
pub fn resolve_config(kind: ScenarioKind, args: &GlobalArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    cfg.scenario = kind;
    cfg.apply(&args.overrides());
    cfg.validate()?;
    Ok(cfg)
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV}: expected a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs the configured scenario and assembles its report (nothing is
/// written).
pub fn execute(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let sections = pool.install(|| scenarios::run_scenario(cfg.scenario, cfg))?;
    let mut echo = serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(map) = echo.as_object_mut() {
        map.remove("output");
    }
    Ok(Report::new(cfg.scenario.name(), cfg.seed, echo, sections))
}

/// Runs the configured scenario, writes the report and returns the exit
/// status.
pub fn run(cfg: &ScenarioConfig) -> Result<i32, CliError> {
    let report = execute(cfg)?;
    report.write(&cfg.output.dir)?;
    Ok(if report.pass {
        EXIT_PASS
    } else {
        EXIT_ASSERTION
    })
}

/// Entry point shared by the binary: parses `argv`, runs and prints a
/// summary. Returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = resolve_config(cli.command.kind(), &cli.args).and_then(|cfg| {
        let start = std::time::Instant::now();
        let report = execute(&cfg)?;
        report.write(&cfg.output.dir)?;
        for (scenario, a) in report.failures() {
            eprintln!(
                "FAIL [{scenario}] {}: value {:e}, tolerance {:e}",
                a.name, a.value, a.tolerance
            );
        }
        eprintln!(
            "{}: {}/{} assertions passed in {:.2?}; report in {}",
            report.scenario,
            report.assertions_total - report.assertions_failed,
            report.assertions_total,
            start.elapsed(),
            cfg.output.dir.display()
        );
        Ok(if report.pass {
            EXIT_PASS
        } else {
            EXIT_ASSERTION
        })
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
