//! The run matrix: instances x epsilons x samples x methods.
//!
//! Samples whose realized durations admit no schedule at all are dropped
//! before any method runs. Offline plans are computed once per (instance,
//! epsilon, method) and executed against every kept sample. All randomness
//! comes from [`sample_seed`], so thread count and scheduling order do not
//! change the rows.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use srcpsp_core::instance::{make_stochastic, mix_seed, parse_psplib_named, sample_durations};
use srcpsp_core::instance::{DurationSample, ProjectInstance, StochasticInstance};
use srcpsp_core::methods::{perfect_information_feasible, Method, OfflinePlan};
use srcpsp_core::solver::{check_schedule, Schedule};

use crate::config::{BenchConfig, InstanceFile};
use crate::results::{sort_rows, ResultRow};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub file: InstanceFile,
    pub instance: ProjectInstance,
}

pub fn load_instance(file: &InstanceFile) -> Result<LoadedInstance, BenchError> {
    let text = std::fs::read_to_string(&file.path).map_err(|e| BenchError::io(&file.path, e))?;
    let instance = parse_psplib_named(&text, &file.name).map_err(|e| BenchError::data(&file.path, e))?;
    Ok(LoadedInstance {
        file: file.clone(),
        instance,
    })
}

/// A sample left out because even perfect information gives no schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    pub instance_set: String,
    pub instance: String,
    pub epsilon: f64,
    pub sample: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchOutput {
    /// Sorted by (set, instance, epsilon, sample, method).
    pub rows: Vec<ResultRow>,
    pub excluded: Vec<Exclusion>,
    /// Feasible runs whose executed starts fail the replay check.
    pub audit_failures: Vec<String>,
}

fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| mix_seed(h, u64::from(b)))
}

/// Seed of one duration sample. Depends only on the master seed and the
/// sample's coordinates.
pub fn sample_seed(master: u64, set: &str, instance: &str, epsilon: f64, sample: usize) -> u64 {
    let s = mix_seed(master, hash_str(set));
    let s = mix_seed(s, hash_str(instance));
    let s = mix_seed(s, epsilon.to_bits());
    mix_seed(s, sample as u64)
}

struct Cell<'a> {
    loaded: &'a LoadedInstance,
    epsilon: f64,
    stoch: StochasticInstance,
}

struct Draw {
    cell: usize,
    sample: usize,
    durations: DurationSample,
}

pub fn run_bench(cfg: &BenchConfig, instances: &[LoadedInstance]) -> Result<BenchOutput, BenchError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads() {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| BenchError::Other(e.to_string()))?;
    Ok(pool.install(|| run_matrix(cfg, instances)))
}

fn run_matrix(cfg: &BenchConfig, instances: &[LoadedInstance]) -> BenchOutput {
    let cells: Vec<Cell> = instances
        .iter()
        .flat_map(|loaded| {
            cfg.epsilons.iter().map(move |&epsilon| Cell {
                loaded,
                epsilon,
                stoch: make_stochastic(&loaded.instance, epsilon),
            })
        })
        .collect();

    let draws: Vec<Draw> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| {
            (0..cfg.samples_per_instance).map(move |k| {
                let f = &cell.loaded.file;
                let seed = sample_seed(cfg.seed, &f.set, &f.name, cell.epsilon, k);
                Draw {
                    cell: c,
                    sample: k,
                    durations: sample_durations(&cell.stoch, seed),
                }
            })
        })
        .collect();

    let kept: Vec<bool> = draws
        .par_iter()
        .map(|d| perfect_information_feasible(&cells[d.cell].stoch, &d.durations, cfg.filter_limit()))
        .collect();
    let excluded = draws
        .iter()
        .zip(&kept)
        .filter(|(_, k)| !**k)
        .map(|(d, _)| {
            let cell = &cells[d.cell];
            Exclusion {
                instance_set: cell.loaded.file.set.clone(),
                instance: cell.loaded.file.name.clone(),
                epsilon: cell.epsilon,
                sample: d.sample,
                seed: d.durations.seed,
            }
        })
        .collect();

    let needed: Vec<(usize, Method)> = (0..cells.len())
        .filter(|&c| draws.iter().zip(&kept).any(|(d, k)| *k && d.cell == c))
        .flat_map(|c| cfg.methods.iter().map(move |&m| (c, m)))
        .collect();
    let plans: BTreeMap<(usize, Method), OfflinePlan> = needed
        .par_iter()
        .map(|&(c, m)| ((c, m), m.plan(&cells[c].stoch, &cfg.method_config)))
        .collect();

    let jobs: Vec<(&Draw, Method)> = draws
        .iter()
        .zip(&kept)
        .filter(|(_, k)| **k)
        .flat_map(|(d, _)| cfg.methods.iter().map(move |&m| (d, m)))
        .collect();
    let results: Vec<(ResultRow, Option<String>)> = jobs
        .par_iter()
        .map(|&(d, m)| {
            let cell = &cells[d.cell];
            let run = plans[&(d.cell, m)].execute(&cell.stoch, &cfg.method_config, &d.durations);
            let audit = audit(&cell.stoch, &d.durations, &run);
            let row = ResultRow::from_run(&cell.loaded.file.set, cell.epsilon, d.sample, &run);
            (row, audit)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut audit_failures = Vec::new();
    for (row, failure) in results {
        if let Some(f) = failure {
            log::error!("{f}");
            audit_failures.push(f);
        }
        rows.push(row);
    }
    sort_rows(&mut rows);
    BenchOutput {
        rows,
        excluded,
        audit_failures,
    }
}

/// Replays a feasible run's executed starts under the realized durations.
fn audit(stoch: &StochasticInstance, sample: &DurationSample, run: &srcpsp_core::MethodRun) -> Option<String> {
    if !run.feasible {
        return None;
    }
    let what = format!("{} on {} (seed {})", run.method, run.instance, run.seed);
    let Some(starts) = &run.starts else {
        return Some(format!("{what}: feasible run without start times"));
    };
    let sched = Schedule::new(starts.clone());
    match check_schedule(&stoch.base, &sample.durations, &sched) {
        Ok(r) if r.feasible && run.makespan == Some(sched.makespan(&sample.durations)) => None,
        Ok(r) => Some(format!("{what}: replay disagrees ({r:?})")),
        Err(e) => Some(format!("{what}: {e}")),
    }
}

/// Writes `results.csv` and `excluded.csv` into `dir`.
pub fn write_output(dir: &Path, out: &BenchOutput) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    crate::results::write_results(&dir.join("results.csv"), &out.rows)?;
    let path = dir.join("excluded.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| BenchError::data(&path, e))?;
    w.write_record(["instance_set", "instance", "epsilon", "sample", "seed"])
        .map_err(|e| BenchError::data(&path, e))?;
    for x in &out.excluded {
        w.write_record([
            x.instance_set.clone(),
            x.instance.clone(),
            format!("{:?}", x.epsilon),
            x.sample.to_string(),
            x.seed.to_string(),
        ])
        .map_err(|e| BenchError::data(&path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(&path, e))
}
