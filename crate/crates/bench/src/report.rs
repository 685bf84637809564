//! Feasibility ratios and pairwise test tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use srcpsp_core::methods::{Method, MethodRun};
use srcpsp_core::stats::{build_partial_ordering, Metric, PartialOrdering, StatsError, TestExtras, TestResult};

use crate::results::ResultRow;

/// Feasible runs over included runs of one (method, set, epsilon) cell;
/// `None` for an empty cell.
pub fn feasibility_ratio(rows: &[ResultRow], method: Method, set: &str, epsilon: f64) -> Option<f64> {
    let cell: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.method == method && r.instance_set == set && r.epsilon == epsilon)
        .collect();
    if cell.is_empty() {
        return None;
    }
    Some(cell.iter().filter(|r| r.feasible).count() as f64 / cell.len() as f64)
}

fn epsilons(rows: &[ResultRow]) -> Vec<f64> {
    let mut eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    eps
}

/// One methods x sets table per epsilon.
pub fn feasibility_grid(rows: &[ResultRow]) -> String {
    let sets: BTreeSet<&str> = rows.iter().map(|r| r.instance_set.as_str()).collect();
    let methods: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
    let mut out = String::new();
    for eps in epsilons(rows) {
        let _ = writeln!(out, "feasibility ratio, epsilon = {eps}");
        let _ = write!(out, "{:<16}", "method");
        for s in &sets {
            let _ = write!(out, "{s:>10}");
        }
        out.push('\n');
        for &m in &methods {
            let _ = write!(out, "{:<16}", m.as_str());
            for s in &sets {
                match feasibility_ratio(rows, m, s, eps) {
                    Some(r) => {
                        let _ = write!(out, "{r:>10.3}");
                    }
                    None => {
                        let _ = write!(out, "{:>10}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// `epsilon,instance_set,method,feasible,total,ratio` for every non-empty cell.
pub fn feasibility_csv(rows: &[ResultRow]) -> String {
    let sets: BTreeSet<&str> = rows.iter().map(|r| r.instance_set.as_str()).collect();
    let methods: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
    let mut out = String::from("epsilon,instance_set,method,feasible,total,ratio\n");
    for eps in epsilons(rows) {
        for s in &sets {
            for &m in &methods {
                let cell = rows
                    .iter()
                    .filter(|r| r.method == m && r.instance_set == *s && r.epsilon == eps);
                let (ok, total) = cell.fold((0, 0), |(ok, t), r| (ok + usize::from(r.feasible), t + 1));
                if total > 0 {
                    let _ = writeln!(out, "{eps:?},{s},{m},{ok},{total},{:.6}", ok as f64 / total as f64);
                }
            }
        }
    }
    out
}

fn fmt_test(res: &Result<TestResult, StatsError>) -> String {
    match res {
        Ok(t) => format!(
            "[{}] {:.3} ({:.4}){}",
            t.n_pairs,
            t.statistic,
            t.p_value,
            if t.significant { " *" } else { "" }
        ),
        Err(e) => format!("n/a ({e})"),
    }
}

/// Pairwise test table plus the partial ordering it induces.
pub fn stats_report(runs: &[MethodRun], metric: Metric, alpha: f64) -> Result<(String, PartialOrdering), StatsError> {
    let ordering = build_partial_ordering(runs, metric, alpha)?;
    let mut out = format!("metric {metric}, alpha {alpha}\n");
    for c in &ordering.comparisons {
        let _ = writeln!(out, "{} vs {}", c.a, c.b);
        let _ = writeln!(out, "  wilcoxon    z {}", fmt_test(&c.wilcoxon));
        let proportion = match &c.proportion {
            Ok(TestResult {
                extras: TestExtras::Proportion { proportion_a, .. },
                ..
            }) => format!(" share {proportion_a:.3}"),
            _ => String::new(),
        };
        let _ = writeln!(out, "  proportion  Z {}{proportion}", fmt_test(&c.proportion));
        let means = match &c.magnitude {
            Ok(TestResult {
                extras: TestExtras::Magnitude { mean_a, mean_b },
                ..
            }) => format!(" means {mean_a:.3} / {mean_b:.3}"),
            _ => String::new(),
        };
        let _ = writeln!(out, "  magnitude   t {}{means}", fmt_test(&c.magnitude));
    }
    out.push_str("edges:");
    if ordering.edges.is_empty() {
        out.push_str(" none");
    }
    out.push('\n');
    for e in &ordering.edges {
        let _ = writeln!(out, "  {} -> {} ({:?})", e.better, e.worse, e.strength);
    }
    Ok((out, ordering))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(method: Method, set: &str, feasible: usize, total: usize) -> Vec<ResultRow> {
        (0..total)
            .map(|k| ResultRow {
                instance_set: set.into(),
                instance: format!("i{k}"),
                epsilon: 1.0,
                sample: 0,
                method,
                feasible: k < feasible,
                makespan: (k < feasible).then_some(10),
                time_offline_ms: 1.0,
                time_online_ms: 0.0,
                failure_reason: None,
                seed: k as u64,
            })
            .collect()
    }

    #[test]
    fn ratios() {
        let mut all = rows(Method::Stnu, "j10", 7, 10);
        all.extend(rows(Method::Reactive, "j10", 10, 10));
        assert_eq!(feasibility_ratio(&all, Method::Stnu, "j10", 1.0), Some(0.7));
        assert_eq!(feasibility_ratio(&all, Method::Reactive, "j10", 1.0), Some(1.0));
        assert_eq!(feasibility_ratio(&all, Method::Stnu, "j20", 1.0), None);
        assert_eq!(feasibility_ratio(&all, Method::Stnu, "j10", 2.0), None);
    }

    #[test]
    fn grid_has_one_table_per_epsilon() {
        let mut all = rows(Method::Stnu, "j10", 7, 10);
        all.extend(rows(Method::Reactive, "ubo50", 3, 4));
        let mut eps2 = rows(Method::Stnu, "j10", 1, 2);
        eps2.iter_mut().for_each(|r| r.epsilon = 2.0);
        all.extend(eps2);
        let grid = feasibility_grid(&all);
        assert!(grid.contains("epsilon = 1\n") && grid.contains("epsilon = 2\n"));
        let table1: Vec<&str> = grid.split("\n\n").next().unwrap().lines().collect();
        assert_eq!(table1.len(), 4);
        assert!(table1[1].split_whitespace().eq(["method", "j10", "ubo50"]));
        assert!(table1[2].split_whitespace().eq(["reactive", "-", "0.750"]));
        assert!(table1[3].split_whitespace().eq(["stnu", "0.700", "-"]));
        let csv = feasibility_csv(&all);
        assert!(csv.contains("1.0,j10,stnu,7,10,0.700000\n"));
        assert!(csv.contains("2.0,j10,stnu,1,2,0.500000\n"));
    }

    #[test]
    fn report_lists_every_pair() {
        let mut all = rows(Method::Stnu, "j10", 10, 10);
        all.extend(rows(Method::ProactiveQ, "j10", 0, 10));
        let runs: Vec<MethodRun> = all.iter().map(ResultRow::to_run).collect();
        let (text, ordering) = stats_report(&runs, Metric::Quality, 0.05).unwrap();
        assert!(text.contains("proactive_q vs stnu"));
        assert!(text.contains("stnu -> proactive_q (Strong)"));
        assert_eq!(ordering.edges.len(), 1);
    }
}
