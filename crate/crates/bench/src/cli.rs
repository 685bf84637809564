//! The `srcpsp` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use srcpsp_core::generate::{random_instance, GeneratorParams};
use srcpsp_core::instance::{make_stochastic, mix_seed, sample_durations, to_psplib, ProjectInstance};
use srcpsp_core::methods::{Method, MethodConfig};
use srcpsp_core::solver::{check_schedule, solve, Schedule, SolveOptions};
use srcpsp_core::stats::Metric;

use crate::config::{instance_file, BenchConfig};
use crate::report::{feasibility_csv, feasibility_grid, stats_report};
use crate::results::{append_results, read_results, ResultRow};
use crate::runner::{load_instance, run_bench, sample_seed, write_output, LoadedInstance};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "srcpsp", version, about = "Stochastic RCPSP/max workbench")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance with fixed durations and print the schedule.
    Solve {
        file: PathBuf,
        /// Seconds.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        /// Durations as a comma-separated list or a file holding one.
        #[arg(long)]
        durations: Option<String>,
    },
    /// Run one method on sampled durations and append the runs as CSV rows.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        method: Method,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 10)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Quantile of the method's duration estimate.
        #[arg(long)]
        gamma: Option<f64>,
        /// Scenario quantiles for proactive_saa, comma separated.
        #[arg(long, value_delimiter = ',')]
        saa_gammas: Option<Vec<f64>>,
        /// Offline limit in seconds (the SAA limit for proactive_saa).
        #[arg(long)]
        time_limit: Option<f64>,
        /// Per re-solve limit of `reactive`, seconds.
        #[arg(long)]
        reschedule_limit: Option<f64>,
        /// Results CSV to append to; rows go to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment matrix from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads, overriding the config and SRCPSP_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Pairwise tests and the partial ordering for one metric.
    Stats {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        metric: Metric,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// DOT file for the partial ordering.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only rows with this noise level.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Only rows of this instance set.
        #[arg(long)]
        set: Option<String>,
    },
    /// Check a schedule against an instance.
    Check {
        #[arg(long)]
        instance: PathBuf,
        /// Start times as a comma-separated list or a file holding one.
        #[arg(long)]
        schedule: String,
        #[arg(long)]
        durations: Option<String>,
    },
    /// Write random RCPSP/max instances.
    Generate {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        activities: usize,
        #[arg(long, default_value = "PSP")]
        prefix: String,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command, returning what it prints on success.
pub fn run(command: Command) -> Result<String, BenchError> {
    match command {
        Command::Solve {
            file,
            time_limit,
            durations,
        } => cmd_solve(&file, time_limit, durations.as_deref()),
        Command::Simulate {
            instance,
            method,
            epsilon,
            samples,
            seed,
            gamma,
            saa_gammas,
            time_limit,
            reschedule_limit,
            out,
        } => {
            let mut cfg = MethodConfig::default();
            if let Some(g) = gamma {
                match method {
                    Method::ProactiveQ => cfg.gamma = g,
                    Method::Reactive => cfg.reactive_gamma = g,
                    Method::Stnu => cfg.stnu_gamma = g,
                    Method::ProactiveSaa => return Err(usage("--gamma does not apply to proactive_saa")),
                }
            }
            if let Some(gs) = saa_gammas {
                cfg.saa_gammas = gs;
            }
            if let Some(t) = time_limit {
                let t = seconds(t, "--time-limit")?;
                cfg.time_limit_offline = t;
                cfg.time_limit_saa = t;
            }
            if let Some(t) = reschedule_limit {
                cfg.time_limit_reschedule = seconds(t, "--reschedule-limit")?;
            }
            cfg.validate().map_err(BenchError::Usage)?;
            if !(epsilon.is_finite() && epsilon >= 0.0) {
                return Err(usage("--epsilon must be finite and non-negative"));
            }
            let rows = cmd_simulate(&instance, method, epsilon, samples, seed, &cfg)?;
            match out {
                Some(path) => {
                    append_results(&path, &rows)?;
                    Ok(format!("appended {} rows to {}\n", rows.len(), path.display()))
                }
                None => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for r in &rows {
                        w.serialize(r).map_err(|e| BenchError::Other(e.to_string()))?;
                    }
                    let bytes = w.into_inner().map_err(|e| BenchError::Other(e.to_string()))?;
                    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
                }
            }
        }
        Command::Bench { config, threads } => {
            let mut cfg = BenchConfig::load(&config)?;
            if threads.is_some() {
                cfg.parallelism = threads;
                cfg.validate().map_err(|e| usage(&e.to_string()))?;
            }
            cmd_bench(&cfg)
        }
        Command::Stats {
            results,
            metric,
            alpha,
            out,
            epsilon,
            set,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(usage("--alpha must lie in (0, 1)"));
            }
            cmd_stats(&results, metric, alpha, out.as_deref(), epsilon, set.as_deref())
        }
        Command::Check {
            instance,
            schedule,
            durations,
        } => cmd_check(&instance, &schedule, durations.as_deref()),
        Command::Generate {
            out_dir,
            count,
            seed,
            activities,
            prefix,
        } => cmd_generate(&out_dir, count, seed, activities, &prefix),
    }
}

fn usage(msg: &str) -> BenchError {
    BenchError::Usage(msg.to_string())
}

fn seconds(v: f64, flag: &str) -> Result<Duration, BenchError> {
    Duration::try_from_secs_f64(v).map_err(|_| usage(&format!("{flag} must be a non-negative number of seconds")))
}

fn load(path: &Path) -> Result<LoadedInstance, BenchError> {
    load_instance(&instance_file(path.to_path_buf()))
}

/// Integers from an inline list or from a file holding one.
fn int_list(arg: &str, flag: &str) -> Result<Vec<i64>, BenchError> {
    let path = Path::new(arg);
    let (text, source) = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        (text, Some(path))
    } else {
        (arg.to_string(), None)
    };
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<i64>().map_err(|_| match source {
                Some(p) => BenchError::data(p, format!("`{t}` is not an integer")),
                None => usage(&format!("{flag}: `{t}` is not an integer (and no such file)")),
            })
        })
        .collect()
}

/// Accepts one value per activity including source and sink, or one per
/// real activity (source and sink then default to 0).
fn full_vector(inst: &ProjectInstance, mut v: Vec<i64>, what: &str) -> Result<Vec<i64>, BenchError> {
    let n = inst.activity_count();
    if v.len() == n {
        v.insert(0, 0);
        v.push(0);
    }
    if v.len() != n + 2 {
        return Err(usage(&format!("{what}: expected {n} or {} values, got {}", n + 2, v.len())));
    }
    Ok(v)
}

fn join(v: &[i64]) -> String {
    v.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
}

fn durations_arg(inst: &ProjectInstance, arg: Option<&str>) -> Result<Vec<i64>, BenchError> {
    match arg {
        Some(a) => {
            let d = full_vector(inst, int_list(a, "--durations")?, "--durations")?;
            if let Some(j) = d.iter().position(|&x| x < 0) {
                return Err(usage(&format!("--durations: negative duration for activity {j}")));
            }
            inst.with_durations(d.clone())
                .map_err(|e| usage(&format!("--durations: {e}")))?;
            Ok(d)
        }
        None => Ok(inst.durations().to_vec()),
    }
}

fn cmd_solve(file: &Path, time_limit: f64, durations: Option<&str>) -> Result<String, BenchError> {
    let limit = seconds(time_limit, "--time-limit")?;
    let inst = load(file)?.instance;
    let d = durations_arg(&inst, durations)?;
    let out = solve(&inst, &d, &SolveOptions::with_time_limit(limit));
    let mut text = format!("status: {:?}\n", out.status);
    if let Some(s) = &out.schedule {
        let _ = writeln!(text, "makespan: {}", s.makespan(&d));
        let _ = writeln!(text, "starts: {}", join(&s.starts));
    }
    let _ = writeln!(text, "nodes: {}", out.nodes_explored);
    let _ = writeln!(text, "time_ms: {:.3}", out.wall_time.as_secs_f64() * 1e3);
    Ok(text)
}

fn cmd_simulate(
    path: &Path,
    method: Method,
    epsilon: f64,
    samples: usize,
    seed: u64,
    cfg: &MethodConfig,
) -> Result<Vec<ResultRow>, BenchError> {
    let loaded = load(path)?;
    let f = &loaded.file;
    let stoch = make_stochastic(&loaded.instance, epsilon);
    let plan = method.plan(&stoch, cfg);
    Ok((0..samples)
        .map(|k| {
            let sample = sample_durations(&stoch, sample_seed(seed, &f.set, &f.name, epsilon, k));
            let run = plan.execute(&stoch, cfg, &sample);
            ResultRow::from_run(&f.set, epsilon, k, &run)
        })
        .collect())
}

fn cmd_bench(cfg: &BenchConfig) -> Result<String, BenchError> {
    let files = cfg.instance_files()?;
    let instances = files.iter().map(load_instance).collect::<Result<Vec<_>, _>>()?;
    let out = run_bench(cfg, &instances)?;
    write_output(&cfg.output_dir, &out)?;
    let path = cfg.output_dir.join("feasibility.csv");
    std::fs::write(&path, feasibility_csv(&out.rows)).map_err(|e| BenchError::io(&path, e))?;
    let path = cfg.output_dir.join("config.json");
    let json = serde_json::to_string_pretty(cfg).expect("config serializes");
    std::fs::write(&path, json + "\n").map_err(|e| BenchError::io(&path, e))?;

    if !out.audit_failures.is_empty() {
        return Err(BenchError::Other(format!(
            "{} runs failed the replay audit (results written to {})",
            out.audit_failures.len(),
            cfg.output_dir.display()
        )));
    }
    let mut text = format!(
        "{} instances, {} rows, {} samples excluded by the perfect-information filter\n",
        instances.len(),
        out.rows.len(),
        out.excluded.len()
    );
    let _ = writeln!(text, "results: {}\n", cfg.output_dir.join("results.csv").display());
    text.push_str(&feasibility_grid(&out.rows));
    Ok(text)
}

fn cmd_stats(
    results: &Path,
    metric: Metric,
    alpha: f64,
    out: Option<&Path>,
    epsilon: Option<f64>,
    set: Option<&str>,
) -> Result<String, BenchError> {
    let runs: Vec<_> = read_results(results)?
        .into_iter()
        .filter(|r| epsilon.is_none_or(|e| r.epsilon == e) && set.is_none_or(|s| r.instance_set == s))
        .map(|r| r.to_run())
        .collect();
    let (text, ordering) = stats_report(&runs, metric, alpha).map_err(|e| BenchError::data(results, e))?;
    if !ordering.is_acyclic() {
        return Err(BenchError::data(results, "partial ordering has a cycle"));
    }
    if let Some(path) = out {
        std::fs::write(path, ordering.to_dot()).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(text)
}

fn cmd_check(instance: &Path, schedule: &str, durations: Option<&str>) -> Result<String, BenchError> {
    let inst = load(instance)?.instance;
    let d = durations_arg(&inst, durations)?;
    let mut starts = int_list(schedule, "--schedule")?;
    let n = inst.activity_count();
    if starts.len() == n {
        // place the sink as early as its incoming lags allow
        starts.insert(0, 0);
        starts.push(0);
        let sink = inst.sink();
        starts[sink] = inst
            .constraints()
            .iter()
            .filter(|c| c.to == sink)
            .map(|c| starts[c.from] + c.weight)
            .fold(0, i64::max);
    }
    let starts = full_vector(&inst, starts, "--schedule")?;
    let sched = Schedule::new(starts);
    let report = check_schedule(&inst, &d, &sched).map_err(|e| usage(&e.to_string()))?;
    let mut text = format!("feasible: {}\n", report.feasible);
    let _ = writeln!(text, "makespan: {}", sched.makespan(&d));
    for (c, slack) in &report.precedence_violations {
        let _ = writeln!(
            text,
            "precedence: s_{} - s_{} >= {} violated by {}",
            c.to, c.from, c.weight, -slack
        );
    }
    for v in &report.resource_violations {
        let _ = writeln!(
            text,
            "resource {}: usage {} > capacity {} at t = {}",
            v.resource, v.usage, v.capacity, v.time
        );
    }
    Ok(text)
}

fn cmd_generate(dir: &Path, count: usize, seed: u64, activities: usize, prefix: &str) -> Result<String, BenchError> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let params = GeneratorParams {
        activities,
        ..GeneratorParams::j10()
    };
    for i in 0..count {
        let name = format!("{prefix}{}", i + 1);
        let inst = random_instance(&name, &params, mix_seed(seed, i as u64));
        let path = dir.join(format!("{name}.sch"));
        std::fs::write(&path, to_psplib(&inst)).map_err(|e| BenchError::io(&path, e))?;
    }
    Ok(format!("wrote {count} instances to {}\n", dir.display()))
}
