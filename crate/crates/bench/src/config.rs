//! Benchmark configuration, read from a JSON document.
//!
//! Every field is optional; see [`BenchConfig::default`]. A minimal file:
//!
//! ```json
//! { "instances": ["data/j10/*.sch"], "epsilons": [1], "samples_per_instance": 10 }
//! ```
//!
//! Relative instance patterns and `output_dir` resolve against the directory
//! holding the config file. The parent directory of each instance file names
//! its instance set.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use srcpsp_core::methods::{Method, MethodConfig};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Instance files or glob patterns.
    pub instances: Vec<String>,
    /// First files (by name) kept per instance set.
    pub instances_per_set: usize,
    pub epsilons: Vec<f64>,
    pub samples_per_instance: usize,
    pub methods: Vec<Method>,
    pub method_config: MethodConfig,
    pub alpha: f64,
    /// Worker threads. Unset means the `SRCPSP_THREADS` variable, then the
    /// number of cores.
    pub parallelism: Option<usize>,
    pub output_dir: PathBuf,
    /// Master seed; every sample seed derives from it.
    pub seed: u64,
    /// Budget of the perfect-information solve deciding whether a sample
    /// enters the evaluation, in seconds.
    pub filter_time_limit: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: Vec::new(),
            instances_per_set: 50,
            epsilons: vec![1.0, 2.0],
            samples_per_instance: 10,
            methods: Method::ALL.to_vec(),
            method_config: MethodConfig::default(),
            alpha: 0.05,
            parallelism: None,
            output_dir: PathBuf::from("results"),
            seed: 0,
            filter_time_limit: 60.0,
        }
    }
}

/// One instance file picked by the configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct InstanceFile {
    pub set: String,
    pub name: String,
    pub path: PathBuf,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.instances.is_empty() {
            return bad("no instances given".into());
        }
        if self.instances_per_set == 0 || self.samples_per_instance == 0 {
            return bad("instances_per_set and samples_per_instance must be at least 1".into());
        }
        if self.epsilons.is_empty() {
            return bad("no epsilons given".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return bad(format!("epsilon {e} must be finite and non-negative"));
        }
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be at least 1".into());
        }
        if !(self.filter_time_limit.is_finite() && self.filter_time_limit > 0.0) {
            return bad("filter_time_limit must be positive".into());
        }
        self.method_config.validate().map_err(BenchError::Config)
    }

    /// Reads and validates a config file, resolving relative paths against
    /// its directory.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let mut cfg: BenchConfig = serde_json::from_str(&text).map_err(|e| BenchError::data(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.instances = cfg
            .instances
            .iter()
            .map(|p| resolve(base, Path::new(p)).to_string_lossy().into_owned())
            .collect();
        cfg.output_dir = resolve(base, &cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn filter_limit(&self) -> Duration {
        Duration::from_secs_f64(self.filter_time_limit)
    }

    pub fn threads(&self) -> Option<usize> {
        self.parallelism.or_else(|| {
            std::env::var(crate::THREADS_ENV)
                .ok()
                .and_then(|v| v.parse().ok())
                .filter(|&n| n > 0)
        })
    }

    /// Expands the patterns and keeps the first `instances_per_set` files of
    /// each set, sorted by set then name.
    pub fn instance_files(&self) -> Result<Vec<InstanceFile>, BenchError> {
        let mut files = Vec::new();
        for pattern in &self.instances {
            let paths = glob::glob(pattern).map_err(|e| BenchError::Config(format!("{pattern}: {e}")))?;
            let before = files.len();
            for entry in paths {
                let path = entry.map_err(|e| BenchError::io(e.path().to_path_buf(), e.into()))?;
                if path.is_file() {
                    files.push(instance_file(path));
                }
            }
            if files.len() == before {
                return Err(BenchError::Config(format!("`{pattern}` matches no files")));
            }
        }
        files.sort();
        files.dedup();
        let mut kept: Vec<InstanceFile> = Vec::new();
        for f in files {
            if kept.iter().filter(|k| k.set == f.set).count() < self.instances_per_set {
                kept.push(f);
            }
        }
        Ok(kept)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn instance_file(path: PathBuf) -> InstanceFile {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let set = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    InstanceFile { set, name, path }
}
