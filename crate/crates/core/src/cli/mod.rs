//! Experiment runner behind the `lab` binary.

pub mod config;
pub mod experiments;
pub mod svg;
pub mod table;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::{
    parse_config, ConfigError, ConfigErrorKind, DistanceKind, Experiment, ExperimentConfig,
};
pub use experiments::{run_experiment, Output};
pub use table::ResultTable;

use crate::error::LabError;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    Runtime(LabError),
}

impl CliError {
    /// 2 for configuration problems, 3 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } => 2,
            CliError::Write { .. } | CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Read { path, source } => {
                write!(f, "cannot read {}: {source}", path.display())
            }
            CliError::Write { path, source } => {
                write!(f, "cannot write {}: {source}", path.display())
            }
            CliError::Runtime(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub svg: bool,
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config(&text).map_err(CliError::Config)?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(o) = &overrides.out {
        cfg.out = o.clone();
    }
    cfg.svg |= overrides.svg;
    Ok(cfg)
}

/// `#` header lines: tool version and every result-affecting setting.
/// Output location and plotting are left out so they cannot change the CSV.
pub fn csv_metadata(cfg: &ExperimentConfig) -> Vec<String> {
    let mut meta = vec![format!("ganlab {}", env!("CARGO_PKG_VERSION"))];
    meta.extend(
        cfg.echo()
            .into_iter()
            .filter(|l| !l.starts_with("out =") && !l.starts_with("svg =")),
    );
    meta
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: PathBuf,
    pub svg: Option<PathBuf>,
    pub rows: usize,
}

/// Runs the experiment and writes `<name>.csv`, plus `<name>.svg` when asked.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    let out = run_experiment(cfg).map_err(CliError::Runtime)?;
    let write = |path: PathBuf, text: &str| -> Result<PathBuf, CliError> {
        fs::write(&path, text).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    };
    fs::create_dir_all(&cfg.out).map_err(|source| CliError::Write {
        path: cfg.out.clone(),
        source,
    })?;
    let name = cfg.experiment.name();
    let csv = write(
        cfg.out.join(format!("{name}.csv")),
        &out.table.to_csv(&csv_metadata(cfg)),
    )?;
    let svg = match (&out.plot, cfg.svg) {
        (Some(p), true) => Some(write(cfg.out.join(format!("{name}.svg")), &p.render())?),
        _ => None,
    };
    Ok(RunReport {
        csv,
        svg,
        rows: out.table.rows.len(),
    })
}
