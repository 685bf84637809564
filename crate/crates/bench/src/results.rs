//! Results CSV: one row per (method, instance, epsilon, sample).

use std::fs::OpenOptions;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use srcpsp_core::methods::{FailureReason, Method, MethodRun};

use crate::BenchError;

pub const HEADER: [&str; 11] = [
    "instance_set",
    "instance",
    "epsilon",
    "sample",
    "method",
    "feasible",
    "makespan",
    "time_offline_ms",
    "time_online_ms",
    "failure_reason",
    "seed",
];

/// Column positions of the wall-time fields, the only ones allowed to differ
/// between two runs of the same configuration.
pub const TIME_COLUMNS: [usize; 2] = [7, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance_set: String,
    pub instance: String,
    pub epsilon: f64,
    pub sample: usize,
    pub method: Method,
    pub feasible: bool,
    pub makespan: Option<i64>,
    pub time_offline_ms: f64,
    pub time_online_ms: f64,
    pub failure_reason: Option<FailureReason>,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_run(instance_set: &str, epsilon: f64, sample: usize, run: &MethodRun) -> Self {
        Self {
            instance_set: instance_set.to_string(),
            instance: run.instance.clone(),
            epsilon,
            sample,
            method: run.method,
            feasible: run.feasible,
            makespan: run.makespan,
            time_offline_ms: run.time_offline.as_secs_f64() * 1e3,
            time_online_ms: run.time_online.as_secs_f64() * 1e3,
            failure_reason: run.failure_reason,
            seed: run.seed,
        }
    }

    /// The run as seen by the statistics (no start times).
    pub fn to_run(&self) -> MethodRun {
        MethodRun {
            method: self.method,
            instance: self.instance.clone(),
            seed: self.seed,
            feasible: self.feasible,
            makespan: self.makespan,
            time_offline: Duration::from_secs_f64(self.time_offline_ms.max(0.0) / 1e3),
            time_online: Duration::from_secs_f64(self.time_online_ms.max(0.0) / 1e3),
            failure_reason: self.failure_reason,
            starts: None,
            resolves: 0,
            offline_objective: None,
        }
    }

    /// Sort and uniqueness key.
    pub fn key(&self) -> (&str, &str, u64, usize, Method) {
        (&self.instance_set, &self.instance, self.epsilon.to_bits(), self.sample, self.method)
    }
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.instance_set, &a.instance)
            .cmp(&(&b.instance_set, &b.instance))
            .then(a.epsilon.total_cmp(&b.epsilon))
            .then(a.sample.cmp(&b.sample))
            .then(a.method.cmp(&b.method))
    });
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::data(path, e))?;
    if rows.is_empty() {
        w.write_record(HEADER).map_err(|e| BenchError::data(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::data(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Appends rows, writing the header first when the file is new or empty.
pub fn append_results(path: &Path, rows: &[ResultRow]) -> Result<(), BenchError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    if fresh && rows.is_empty() {
        w.write_record(HEADER).map_err(|e| BenchError::data(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::data(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::data(path, e))?;
    let header = r.headers().map_err(|e| BenchError::data(path, e))?;
    if header.iter().ne(HEADER) {
        return Err(BenchError::data(path, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| BenchError::data(path, e)))
        .collect()
}
