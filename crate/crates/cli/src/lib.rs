//! Experiment runner: sweeps, symbol-duration optimization and the oracle
//! suite, each driven by one TOML experiment file and writing CSV.

pub mod config;
pub mod optimize;
pub mod sweep;
pub mod validate;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "MCVD_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "mcvd-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Core(#[from] mcvd_core::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => exit::CONFIG,
            CliError::Core(mcvd_core::Error::InfeasibleBudget { .. }) => exit::INFEASIBLE,
            CliError::Core(mcvd_core::Error::Domain(_)) => exit::CONFIG,
            _ => exit::FAILURE,
        }
    }
}

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const ORACLE: i32 = 4;
}

/// Command-line overrides layered over the experiment file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub mc_bits: Option<u64>,
    pub no_mc: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            config.oracles.seed = seed;
        }
        if let Some(bits) = self.mc_bits {
            config.oracles.mc = true;
            config.oracles.mc_bits = bits;
            config.validate.ber_bits = bits;
        }
        if self.no_mc {
            config.oracles.mc = false;
            config.validate.mc = false;
        }
    }

    /// `--out`, then the file's `output.dir`, then the environment, then a
    /// fixed default.
    pub fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        if let Some(out) = &self.out {
            return out.clone();
        }
        if let Some(dir) = &config.output.dir {
            return dir.clone();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(DEFAULT_OUT_DIR),
        }
    }
}

/// Scientific notation with nine significant digits.
pub(crate) fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

pub(crate) fn csv_writer(
    dir: &Path,
    name: &str,
) -> Result<(csv::Writer<std::fs::File>, PathBuf), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((csv::Writer::from_path(&path)?, path))
}

/// One warning per parameter that leaves its published range at any point.
pub fn range_warnings<'a>(points: impl IntoIterator<Item = &'a config::Point>) -> Vec<String> {
    let mut seen: Vec<(&'static str, f64, f64, usize, f64, f64)> = Vec::new();
    for p in points {
        for (name, v, lo, hi) in p.range_violations() {
            match seen.iter_mut().find(|s| s.0 == name) {
                Some(s) => {
                    s.1 = s.1.min(v);
                    s.2 = s.2.max(v);
                    s.3 += 1;
                }
                None => seen.push((name, v, v, 1, lo, hi)),
            }
        }
    }
    seen.into_iter()
        .map(|(name, min, max, n, lo, hi)| {
            format!(
                "{name} outside the usual range [{lo}, {hi}] at {n} point(s), values {min}..{max}"
            )
        })
        .collect()
}
