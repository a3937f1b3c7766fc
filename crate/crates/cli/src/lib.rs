//! Front end for the `sfg-core` engines.
//!
//! The binary is a thin wrapper around [`run`]; everything it prints goes
//! through the writer passed in, so commands can be driven from tests.

pub mod commands;
pub mod config;
pub mod svg;
pub mod validate;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use sfg_core::error::SimError;
use sfg_core::experiment::{Engine, SweepMode};

pub use config::{ConfigError, OutputFormat, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "sfg-sim",
    version,
    about = "Sum-frequency generation with broadband entangled photons"
)]
pub struct Cli {
    /// Scenario file (flat `section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub engine: Option<EngineArg>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form rates, crossover flux and rate ratio.
    Rates,
    /// Power sweep with fitted slope and alpha; writes CSV, JSON and SVG.
    Sweep,
    /// Fock-space rates, coherent gain and loss tables.
    Fock,
    /// Generate and count one photon stream.
    Stream,
    /// Run the engine cross-checks and print a JSON report.
    Validate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Analytic,
    Fock,
    Stream,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Pump,
    Atten,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("cannot read {path}: {source}")]
    ReadConfig {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    /// 0 success, 1 validation or runtime failure, 2 usage or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::ReadConfig { .. } => 2,
            CliError::Sim(
                SimError::InvalidConfig(_)
                | SimError::InvalidParameter { .. }
                | SimError::Unsupported(_)
                | SimError::StreamFormat { .. },
            ) => 2,
            CliError::Write { .. } | CliError::Sim(_) | CliError::ValidationFailed(_) => 1,
        }
    }
}

fn stdout_error(source: std::io::Error) -> CliError {
    CliError::Write {
        path: "<stdout>".into(),
        source,
    }
}

/// Loads the scenario and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let shown = path.display().to_string();
            let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: shown.clone(),
                source,
            })?;
            ScenarioConfig::parse(&text).map_err(|source| CliError::Config {
                path: shown,
                source,
            })?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(e) = cli.engine {
        cfg.engine = match e {
            EngineArg::Analytic => Engine::Analytic,
            EngineArg::Fock => Engine::Fock,
            EngineArg::Stream => Engine::Stream,
        };
    }
    if let Some(m) = cli.mode {
        cfg.mode = match m {
            ModeArg::Pump => SweepMode::PumpScaling,
            ModeArg::Atten => SweepMode::Attenuation,
        };
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.display().to_string());
    }
    if let Some(f) = cli.format {
        cfg.format = match f {
            FormatArg::Table => OutputFormat::Table,
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
    }
    Ok(cfg)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    match cli.command {
        Command::Rates => commands::rates(&cfg, out),
        Command::Sweep => commands::sweep(&cfg, out),
        Command::Fock => commands::fock(&cfg, out),
        Command::Stream => commands::stream(&cfg, out),
        Command::Validate => validate::run(&cfg, out),
    }
}

pub(crate) fn require_seed(cfg: &ScenarioConfig, command: &str) -> Result<u64, CliError> {
    cfg.seed.ok_or_else(|| {
        CliError::Usage(format!(
            "`{command}` is stochastic: pass --seed or set run.seed in the config"
        ))
    })
}

pub(crate) fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(stdout_error)
}

pub(crate) fn write_file(
    dir: &std::path::Path,
    name: &str,
    contents: &str,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.display().to_string(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}
