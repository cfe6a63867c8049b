//! Sweep configuration: parsing, validation and grid materialization.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::SamplingSpec;
use crate::metrics::DEFAULT_PENALTY_M;

pub const DEFAULT_CAP_M: f64 = 1500.0;
pub const WORKERS_ENV: &str = "ACCESS_SIM_WORKERS";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Inclusive arithmetic grid `start, start + step, …, stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn single(value: f64) -> Self {
        Self {
            start: value,
            stop: value,
            step: 1.0,
        }
    }

    /// Values `start + i·step`; `stop` is included when it lies within half
    /// a step of the last value. Values are rounded to 12 decimals so that
    /// e.g. `0.7 + 30 · 0.01` comes out as exactly `1`.
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 0.5).floor() as usize + 1;
        (0..n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }

    fn validate(&self, key: &str, unit_interval: bool) -> Result<(), ConfigError> {
        if ![self.start, self.stop, self.step].iter().all(|v| v.is_finite()) {
            return Err(invalid(key, "non-finite grid value"));
        }
        if self.step <= 0.0 {
            return Err(invalid(key, "non-positive grid step"));
        }
        if self.stop < self.start {
            return Err(invalid(key, "non-monotone grid (stop < start)"));
        }
        if self.start < 0.0 {
            return Err(invalid(key, "negative grid value"));
        }
        if unit_interval && self.values().last().is_some_and(|&v| v > 1.0) {
            return Err(invalid(key, "grid leaves [0, 1]"));
        }
        Ok(())
    }
}

/// Inline journey sampling; `seed` defaults to the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
    pub min_crow_m: f64,
    pub max_crow_m: f64,
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SamplingConfig {
    pub fn spec(&self) -> SamplingSpec {
        SamplingSpec {
            count: self.count,
            min_crow_m: self.min_crow_m,
            max_crow_m: self.max_crow_m,
            bins: self.bins,
        }
    }
}

fn default_cap() -> f64 {
    DEFAULT_CAP_M
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub map_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journeys_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    /// Pre-built route lists (JSON lines); enumerated on the fly when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_lists_path: Option<PathBuf>,
    pub rate_grid: GridSpec,
    pub tpr_grid: GridSpec,
    pub tnr_grid: GridSpec,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    #[serde(default = "default_cap")]
    pub cap_m: f64,
    #[serde(default = "default_penalty")]
    pub penalty_m: f64,
    pub output_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worker_count: Option<usize>,
    /// Reuse one ground-truth draw per (journey, rate, trial) across all
    /// tool profiles instead of drawing it per cell.
    #[serde(default)]
    pub shared_truth: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.journeys_path, &self.sampling) {
            (None, None) => return Err(invalid("journeys_path", "missing (or give sampling)")),
            (Some(_), Some(_)) => {
                return Err(invalid("sampling", "give either journeys_path or sampling, not both"))
            }
            _ => {}
        }
        if let Some(s) = &self.sampling {
            if !(s.min_crow_m >= 0.0 && s.min_crow_m < s.max_crow_m) {
                return Err(invalid("sampling", "need 0 <= min_crow_m < max_crow_m"));
            }
            if s.bins == 0 || s.count < s.bins {
                return Err(invalid("sampling", "need count >= bins >= 1"));
            }
        }
        self.rate_grid.validate("rate_grid", true)?;
        self.tpr_grid.validate("tpr_grid", true)?;
        self.tnr_grid.validate("tnr_grid", true)?;
        if self.trials_per_cell == 0 {
            return Err(invalid("trials_per_cell", "must be at least 1"));
        }
        if !(self.cap_m > 0.0 && self.cap_m.is_finite()) {
            return Err(invalid("cap_m", "must be positive"));
        }
        if !(self.penalty_m >= 0.0 && self.penalty_m.is_finite()) {
            return Err(invalid("penalty_m", "negative value"));
        }
        if self.worker_count == Some(0) {
            return Err(invalid("worker_count", "must be at least 1"));
        }
        Ok(())
    }

    /// Worker threads: `ACCESS_SIM_WORKERS`, else `worker_count`, else the
    /// available parallelism.
    pub fn effective_workers(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .or(self.worker_count)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Resolve relative paths against `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.map_path);
        fix(&mut self.output_path);
        if let Some(p) = self.journeys_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.route_lists_path.as_mut() {
            fix(p);
        }
    }

    /// Manifest path next to the CSV: `out.csv` → `out.manifest.json`.
    pub fn manifest_path(&self) -> PathBuf {
        self.output_path.with_extension("manifest.json")
    }
}

pub fn parse_config(document: &str) -> Result<SweepConfig, ConfigError> {
    let config: SweepConfig =
        serde_json::from_str(document).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Read, parse and validate a config file; relative paths inside it are
/// taken relative to the file's directory.
pub fn load_config(path: &Path) -> Result<SweepConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == std::io::ErrorKind::NotFound {
            ConfigError::NotFound(path.to_path_buf())
        } else {
            ConfigError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    })?;
    let mut config = parse_config(&text)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER_GRIDS: &str = r#"{
        "map_path": "m.json", "journeys_path": "j.json",
        "rate_grid": {"start": 0, "stop": 0.3, "step": 0.02},
        "tpr_grid": {"start": 0.7, "stop": 1, "step": 0.01},
        "tnr_grid": {"start": 0.7, "stop": 1, "step": 0.01},
        "trials_per_cell": 500, "master_seed": 1, "output_path": "out.csv"
    }"#;

    #[test]
    fn paper_grid_sizes_and_defaults() {
        let c = parse_config(PAPER_GRIDS).unwrap();
        let rates = c.rate_grid.values();
        let tprs = c.tpr_grid.values();
        assert_eq!((rates.len(), tprs.len(), c.tnr_grid.values().len()), (16, 31, 31));
        assert_eq!(rates[0], 0.0);
        assert_eq!(*rates.last().unwrap(), 0.3);
        assert_eq!(rates[1], 0.02);
        assert_eq!(tprs[0], 0.7);
        assert_eq!(*tprs.last().unwrap(), 1.0);
        assert_eq!(tprs[15], 0.85);
        assert_eq!(c.cap_m, 1500.0);
        assert_eq!(c.penalty_m, 500.0);
        assert!(!c.shared_truth);
    }

    #[test]
    fn endpoint_inside_half_step() {
        let g = GridSpec { start: 0.0, stop: 0.29, step: 0.02 };
        assert_eq!(g.values().len(), 15);
        let g = GridSpec { start: 0.0, stop: 0.291, step: 0.02 };
        assert_eq!(g.values().len(), 16);
        assert_eq!(GridSpec::single(0.25).values(), vec![0.25]);
    }

    fn with(key: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(PAPER_GRIDS).unwrap();
        v[key] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    fn err(doc: &str) -> String {
        parse_config(doc).unwrap_err().to_string()
    }

    #[test]
    fn zero_step_rejected() {
        let e = err(&with("rate_grid", r#"{"start": 0, "stop": 0.3, "step": 0}"#));
        assert!(e.contains("non-positive grid step") && e.contains("rate_grid"), "{e}");
    }

    #[test]
    fn other_rejections_are_named() {
        let e = err(&with("tpr_grid", r#"{"start": 0.9, "stop": 0.7, "step": 0.01}"#));
        assert!(e.contains("non-monotone") && e.contains("tpr_grid"), "{e}");
        let e = err(&with("tnr_grid", r#"{"start": -0.1, "stop": 0.7, "step": 0.1}"#));
        assert!(e.contains("negative") && e.contains("tnr_grid"), "{e}");
        let e = err(&with("tnr_grid", r#"{"start": 0.9, "stop": 1.2, "step": 0.1}"#));
        assert!(e.contains("[0, 1]"), "{e}");
        let e = err(&with("penalty_m", "-5"));
        assert!(e.contains("penalty_m"), "{e}");
        let e = err(&with("cap_m", "0"));
        assert!(e.contains("cap_m"), "{e}");
        let e = err(&with("trials_per_cell", "0"));
        assert!(e.contains("trials_per_cell"), "{e}");
        let e = err(&with("bogus_key", "1"));
        assert!(e.contains("bogus_key"), "{e}");
    }

    #[test]
    fn missing_key_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(PAPER_GRIDS).unwrap();
        v.as_object_mut().unwrap().remove("master_seed");
        let e = err(&v.to_string());
        assert!(e.contains("master_seed"), "{e}");
        v["master_seed"] = 1.into();
        v.as_object_mut().unwrap().remove("journeys_path");
        let e = err(&v.to_string());
        assert!(e.contains("journeys_path"), "{e}");
    }

    #[test]
    fn inline_sampling_accepted() {
        let mut v: serde_json::Value = serde_json::from_str(PAPER_GRIDS).unwrap();
        v.as_object_mut().unwrap().remove("journeys_path");
        v["sampling"] = serde_json::json!({"count": 6, "min_crow_m": 300, "max_crow_m": 1200, "bins": 3});
        let c = parse_config(&v.to_string()).unwrap();
        assert_eq!(c.sampling.unwrap().spec().count, 6);
    }

    #[test]
    fn missing_file_reports_not_found() {
        let e = load_config(Path::new("/nonexistent/missing.json")).unwrap_err();
        assert!(e.to_string().starts_with("config not found"), "{e}");
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.json");
        std::fs::write(&path, PAPER_GRIDS).unwrap();
        let c = load_config(&path).unwrap();
        assert_eq!(c.map_path, dir.path().join("m.json"));
        assert_eq!(c.manifest_path(), dir.path().join("out.manifest.json"));
    }
}
