//! Study configuration files: flat TOML tables validated before any work starts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use nitsche::analysis::{Diagnostic, StudyOptions};
use nitsche::energy::Problem;
use nitsche::solver::NewtonOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: String,
    dim: usize,
    order: usize,
    #[serde(default = "default_levels")]
    levels: usize,
    #[serde(default = "default_coarse_cells")]
    coarse_cells: usize,
    #[serde(default)]
    diagnostics: Vec<String>,
    #[serde(default)]
    seed: u64,
    newton_tol: Option<f64>,
    linear_tol: Option<f64>,
    output_dir: Option<PathBuf>,
}

fn default_levels() -> usize {
    4
}

fn default_coarse_cells() -> usize {
    8
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub problem: Problem,
    pub dim: usize,
    pub order: usize,
    pub levels: usize,
    pub coarse_cells: usize,
    pub diagnostics: BTreeSet<Diagnostic>,
    pub seed: u64,
    pub newton_tol: f64,
    pub linear_tol: f64,
    pub output_dir: PathBuf,
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, message: message.into() }
}

fn tolerance(key: &'static str, value: Option<f64>, default: f64) -> Result<f64, ConfigError> {
    match value {
        None => Ok(default),
        Some(t) if t.is_finite() && t > 0.0 => Ok(t),
        Some(t) => Err(invalid(key, format!("{t} is not a positive number"))),
    }
}

impl StudyConfig {
    /// Parses and validates a configuration. Relative output directories
    /// are resolved against the directory holding the file.
    pub fn load(path: &Path) -> Result<StudyConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        StudyConfig::parse(&text, base).map_err(|e| match e {
            ConfigError::Syntax { message, .. } => ConfigError::Syntax { path: path.into(), message },
            other => other,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<StudyConfig, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Syntax { path: PathBuf::new(), message: e.message().to_string() })?;
        let problem = Problem::from_name(&raw.problem).ok_or_else(|| {
            let known: Vec<&str> = Problem::ALL.iter().map(|p| p.name()).collect();
            invalid("problem", format!("unknown problem {:?} (known: {})", raw.problem, known.join(", ")))
        })?;
        if !(1..=2).contains(&raw.dim) {
            return Err(invalid("dim", format!("{} is not 1 or 2", raw.dim)));
        }
        if !(1..=3).contains(&raw.order) {
            return Err(invalid("order", format!("{} is not 1, 2 or 3", raw.order)));
        }
        if raw.levels < 3 {
            return Err(invalid("levels", format!("{} is below the minimum of 3", raw.levels)));
        }
        if raw.coarse_cells == 0 {
            return Err(invalid("coarse_cells", "must be positive"));
        }
        let mut diagnostics = BTreeSet::new();
        for name in &raw.diagnostics {
            let d = Diagnostic::from_name(name).ok_or_else(|| {
                let known: Vec<&str> = Diagnostic::ALL.iter().map(|d| d.name()).collect();
                invalid("diagnostics", format!("unknown diagnostic {name:?} (known: {})", known.join(", ")))
            })?;
            diagnostics.insert(d);
        }
        let defaults = NewtonOptions::default();
        let output_dir = match raw.output_dir {
            Some(dir) if dir.is_absolute() => dir,
            Some(dir) => base.join(dir),
            None => base.to_path_buf(),
        };
        Ok(StudyConfig {
            problem,
            dim: raw.dim,
            order: raw.order,
            levels: raw.levels,
            coarse_cells: raw.coarse_cells,
            diagnostics,
            seed: raw.seed,
            newton_tol: tolerance("newton_tol", raw.newton_tol, defaults.residual_tol)?,
            linear_tol: tolerance("linear_tol", raw.linear_tol, defaults.linear_tol)?,
            output_dir,
        })
    }

    pub fn study_options(&self) -> StudyOptions {
        let newton = NewtonOptions { residual_tol: self.newton_tol, linear_tol: self.linear_tol, ..Default::default() };
        StudyOptions {
            coarse_cells: self.coarse_cells,
            levels: self.levels,
            newton,
            diagnostics: self.diagnostics.clone(),
            seed: self.seed,
            ..Default::default()
        }
    }
}
