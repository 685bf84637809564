//! Deterministic RCPSP/max: schedule checking and a conflict-branching
//! branch-and-bound.
//!
//! The search works on the all-pairs longest-path matrix of the temporal
//! graph. A node's earliest-start schedule is its first matrix row; if that
//! schedule overloads a resource, the smallest overloading set at the earliest
//! overload time is split by ordering one pair of its activities end-to-start.
//! The same search handles several duration scenarios sharing one start
//! vector (objective: mean scenario makespan).

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{ProjectInstance, TemporalConstraint};
use crate::stn::{DistanceGraph, NO_PATH};

/// Start time per activity, source and sink included.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schedule {
    pub starts: Vec<i64>,
}

impl Schedule {
    pub fn new(starts: Vec<i64>) -> Self {
        Self { starts }
    }

    /// Latest finish over the real activities (`0` for an empty project).
    /// Source and sink are excluded: the sink's lags come from the nominal
    /// durations and would otherwise leak into stochastic makespans.
    pub fn makespan(&self, durations: &[i64]) -> i64 {
        makespan_of(&self.starts, durations)
    }
}

pub(crate) fn makespan_of(starts: &[i64], durations: &[i64]) -> i64 {
    let n = starts.len();
    if n <= 2 {
        return 0;
    }
    (1..n - 1).map(|j| starts[j] + durations[j]).max().unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceViolation {
    pub resource: usize,
    pub time: i64,
    pub usage: i64,
    pub capacity: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Violated lags with their (negative) slack `s_to - s_from - weight`.
    pub precedence_violations: Vec<(TemporalConstraint, i64)>,
    pub resource_violations: Vec<ResourceViolation>,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("expected {expected} {what}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Checks start-to-start lags and per-resource usage at every start event.
pub fn check_schedule(
    inst: &ProjectInstance,
    durations: &[i64],
    sched: &Schedule,
) -> Result<FeasibilityReport, CheckError> {
    let total = inst.total_activities();
    if durations.len() != total {
        return Err(CheckError::SizeMismatch {
            what: "durations",
            expected: total,
            got: durations.len(),
        });
    }
    if sched.starts.len() != total {
        return Err(CheckError::SizeMismatch {
            what: "start times",
            expected: total,
            got: sched.starts.len(),
        });
    }
    let s = &sched.starts;
    let precedence_violations: Vec<_> = inst
        .constraints()
        .iter()
        .filter_map(|c| {
            let slack = s[c.to] - s[c.from] - c.weight;
            (slack < 0).then_some((*c, slack))
        })
        .collect();

    let mut resource_violations = Vec::new();
    let mut events: Vec<i64> = (0..total).filter(|&j| durations[j] > 0).map(|j| s[j]).collect();
    events.sort_unstable();
    events.dedup();
    for r in 0..inst.resource_count() {
        let cap = inst.capacities()[r];
        for &t in &events {
            let usage: i64 = (0..total)
                .filter(|&j| s[j] <= t && t < s[j] + durations[j])
                .map(|j| inst.demand(r, j))
                .sum();
            if usage > cap {
                resource_violations.push(ResourceViolation {
                    resource: r,
                    time: t,
                    usage,
                    capacity: cap,
                });
            }
        }
    }
    let feasible = precedence_violations.is_empty() && resource_violations.is_empty();
    Ok(FeasibilityReport {
        precedence_violations,
        resource_violations,
        feasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
    Unknown,
}

impl SolveStatus {
    pub fn has_schedule(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub time_limit: Duration,
    pub node_limit: u64,
    /// Activities whose start is pinned.
    pub fixed: BTreeMap<usize, i64>,
    /// Earliest start for every activity that is not pinned.
    pub release: Option<i64>,
    pub warm_start: Option<Schedule>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(60),
            node_limit: 10_000_000,
            fixed: BTreeMap::new(),
            release: None,
            warm_start: None,
        }
    }
}

impl SolveOptions {
    pub fn with_time_limit(time_limit: Duration) -> Self {
        Self {
            time_limit,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub schedule: Option<Schedule>,
    /// Mean makespan over the scenarios for the returned schedule.
    pub objective: Option<f64>,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

/// Solves the single-scenario problem for `durations`.
pub fn solve(inst: &ProjectInstance, durations: &[i64], opts: &SolveOptions) -> SolveOutcome {
    solve_scenarios(inst, std::slice::from_ref(&durations.to_vec()), opts)
}

/// Longest source-to-finish path of the temporal graph with duration arcs:
/// a lower bound on any feasible makespan. `None` if the lags are
/// contradictory.
pub fn critical_path_bound(inst: &ProjectInstance, durations: &[i64]) -> Option<i64> {
    let total = inst.total_activities();
    let finish = total;
    let mut g = DistanceGraph::new(total + 1);
    for c in inst.constraints() {
        g.add_edge(c.from, c.to, c.weight);
    }
    g.add_edge(0, finish, 0);
    for j in inst.real_activities() {
        g.add_edge(0, j, 0);
        g.add_edge(j, finish, durations[j]);
    }
    let d = g.all_pairs_longest()?;
    Some(d[0][finish].max(0))
}

/// Temporal graph over activities with the source pinned at time zero,
/// non-negative starts, pinned and released activities.
fn root_graph(inst: &ProjectInstance, opts: &SolveOptions) -> DistanceGraph {
    let total = inst.total_activities();
    let mut g = DistanceGraph::new(total);
    for c in inst.constraints() {
        g.add_edge(c.from, c.to, c.weight);
    }
    for j in 1..total {
        g.add_edge(0, j, 0);
    }
    for (&j, &t) in &opts.fixed {
        if j == 0 {
            // the source is the time origin; any other value is contradictory
            g.add_edge(0, 0, t.abs());
            continue;
        }
        g.add_edge(0, j, t);
        g.add_edge(j, 0, -t);
    }
    if let Some(t) = opts.release {
        for j in 1..total {
            if !opts.fixed.contains_key(&j) {
                g.add_edge(0, j, t);
            }
        }
    }
    g
}

fn satisfies_graph(g: &DistanceGraph, starts: &[i64]) -> bool {
    starts.len() == g.node_count()
        && starts[0] == 0
        && g.edges().iter().all(|e| starts[e.to] - starts[e.from] >= e.weight)
}

/// Smallest overloading set at the earliest overload across scenarios.
struct Conflict {
    scenario: usize,
    activities: Vec<usize>,
}

fn find_conflict(inst: &ProjectInstance, scenarios: &[Vec<i64>], starts: &[i64]) -> Option<Conflict> {
    let total = inst.total_activities();
    let mut best: Option<(i64, usize, Conflict)> = None;
    for (w, durations) in scenarios.iter().enumerate() {
        let mut events: Vec<i64> = (0..total)
            .filter(|&j| durations[j] > 0)
            .map(|j| starts[j])
            .collect();
        events.sort_unstable();
        events.dedup();
        for &t in &events {
            if best.as_ref().is_some_and(|(bt, _, _)| *bt <= t) {
                break;
            }
            let active: Vec<usize> = (0..total)
                .filter(|&j| starts[j] <= t && t < starts[j] + durations[j])
                .collect();
            let mut found: Option<Vec<usize>> = None;
            for r in 0..inst.resource_count() {
                let cap = inst.capacities()[r];
                let mut users: Vec<usize> =
                    active.iter().copied().filter(|&j| inst.demand(r, j) > 0).collect();
                let usage: i64 = users.iter().map(|&j| inst.demand(r, j)).sum();
                if usage <= cap {
                    continue;
                }
                users.sort_by_key(|&j| (std::cmp::Reverse(inst.demand(r, j)), j));
                let mut sum = 0;
                let mut set = Vec::new();
                for j in users {
                    sum += inst.demand(r, j);
                    set.push(j);
                    if sum > cap {
                        break;
                    }
                }
                set.sort_unstable();
                if found.as_ref().map_or(true, |f| set.len() < f.len()) {
                    found = Some(set);
                }
            }
            if let Some(activities) = found {
                best = Some((t, w, Conflict { scenario: w, activities }));
                break;
            }
        }
    }
    best.map(|(_, _, c)| c)
}

fn scenario_sum(scenarios: &[Vec<i64>], starts: &[i64]) -> i64 {
    scenarios.iter().map(|d| makespan_of(starts, d)).sum()
}

const MEMO_CAP: usize = 2_000_000;

struct Search<'a> {
    inst: &'a ProjectInstance,
    scenarios: &'a [Vec<i64>],
    best_sum: i64,
    best: Option<Vec<i64>>,
    nodes: u64,
    node_limit: u64,
    deadline: Instant,
    aborted: bool,
    visited: HashSet<Vec<(u32, u32, i64)>>,
}

impl Search<'_> {
    fn out_of_budget(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if self.nodes >= self.node_limit || Instant::now() >= self.deadline {
            self.aborted = true;
        }
        self.aborted
    }

    fn explore(&mut self, dist: &[Vec<i64>], ordering: &[(u32, u32, i64)]) {
        if self.out_of_budget() {
            return;
        }
        self.nodes += 1;
        let starts = &dist[0];
        let bound = scenario_sum(self.scenarios, starts);
        if bound >= self.best_sum {
            return;
        }
        let Some(conflict) = find_conflict(self.inst, self.scenarios, starts) else {
            self.best_sum = bound;
            self.best = Some(starts.clone());
            return;
        };
        let durations = &self.scenarios[conflict.scenario];
        let total = dist.len();
        let mut children = Vec::new();
        for &a in &conflict.activities {
            for &b in &conflict.activities {
                if a == b {
                    continue;
                }
                let w = durations[a];
                let dba = dist[b][a];
                if dba != NO_PATH && dba + w > 0 {
                    continue;
                }
                let via = starts[a] + w;
                let child_starts: Vec<i64> = (0..total)
                    .map(|j| {
                        let dbj = dist[b][j];
                        if dbj == NO_PATH {
                            starts[j]
                        } else {
                            starts[j].max(via + dbj)
                        }
                    })
                    .collect();
                let lb = scenario_sum(self.scenarios, &child_starts);
                if lb < self.best_sum {
                    children.push((lb, a, b, w));
                }
            }
        }
        children.sort();
        for (lb, a, b, w) in children {
            if lb >= self.best_sum || self.out_of_budget() {
                continue;
            }
            let mut key = ordering.to_vec();
            key.push((a as u32, b as u32, w));
            key.sort_unstable();
            if self.visited.contains(&key) {
                continue;
            }
            if self.visited.len() < MEMO_CAP {
                self.visited.insert(key.clone());
            }
            let child = add_ordering(dist, a, b, w);
            self.explore(&child, &key);
        }
    }
}

/// Tightens the longest-path matrix with `s_b - s_a >= w`.
fn add_ordering(dist: &[Vec<i64>], a: usize, b: usize, w: i64) -> Vec<Vec<i64>> {
    let n = dist.len();
    let mut out = dist.to_vec();
    for i in 0..n {
        let dia = dist[i][a];
        if dia == NO_PATH {
            continue;
        }
        let head = dia + w;
        let row_b = &dist[b];
        let row = &mut out[i];
        for j in 0..n {
            let dbj = row_b[j];
            if dbj != NO_PATH && head + dbj > row[j] {
                row[j] = head + dbj;
            }
        }
    }
    out
}

/// Joint solve: one start vector that is resource-feasible under every
/// scenario, minimizing the mean scenario makespan.
pub fn solve_scenarios(
    inst: &ProjectInstance,
    scenarios: &[Vec<i64>],
    opts: &SolveOptions,
) -> SolveOutcome {
    let started = Instant::now();
    assert!(!scenarios.is_empty(), "at least one scenario is required");
    let total = inst.total_activities();
    for d in scenarios {
        assert_eq!(d.len(), total, "scenario duration vector size");
    }
    let infeasible = |nodes| SolveOutcome {
        status: SolveStatus::Infeasible,
        schedule: None,
        objective: None,
        nodes_explored: nodes,
        wall_time: started.elapsed(),
    };
    let graph = root_graph(inst, opts);
    let Some(dist) = graph.all_pairs_longest() else {
        return infeasible(0);
    };

    let mut search = Search {
        inst,
        scenarios,
        best_sum: i64::MAX,
        best: None,
        nodes: 0,
        node_limit: opts.node_limit,
        deadline: started + opts.time_limit,
        aborted: false,
        visited: HashSet::new(),
    };
    if let Some(ws) = &opts.warm_start {
        let resource_ok = scenarios.iter().all(|d| {
            check_schedule(inst, d, ws).is_ok_and(|r| r.feasible)
        });
        if resource_ok && satisfies_graph(&graph, &ws.starts) {
            search.best_sum = scenario_sum(scenarios, &ws.starts);
            search.best = Some(ws.starts.clone());
        }
    }
    search.explore(&dist, &[]);

    let status = match (search.aborted, search.best.is_some()) {
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::Infeasible,
        (true, true) => SolveStatus::Feasible,
        (true, false) => SolveStatus::Unknown,
    };
    let schedule = search.best.map(Schedule::new);
    if let Some(s) = &schedule {
        for d in scenarios {
            debug_assert!(check_schedule(inst, d, s).unwrap().feasible);
        }
    }
    SolveOutcome {
        status,
        objective: schedule
            .as_ref()
            .map(|s| scenario_sum(scenarios, &s.starts) as f64 / scenarios.len() as f64),
        schedule,
        nodes_explored: search.nodes,
        wall_time: started.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_psplib;

    pub(crate) fn example() -> ProjectInstance {
        parse_psplib(crate::instance::tests::EXAMPLE_SCH).unwrap()
    }

    fn starts(a: i64, b: i64, c: i64, d: i64, e: i64) -> Schedule {
        Schedule::new(vec![0, a, b, c, d, e, a.max(b).max(c).max(d).max(e) + 5])
    }

    #[test]
    fn corrected_example_schedule_is_feasible() {
        let inst = example();
        let s = starts(1, 3, 5, 0, 3);
        let rep = check_schedule(&inst, inst.durations(), &s).unwrap();
        assert!(rep.feasible, "{rep:?}");
        assert_eq!(s.makespan(inst.durations()), 8);
        let mut shorter = inst.durations().to_vec();
        shorter[2] = 4;
        assert!(check_schedule(&inst, &shorter, &s).unwrap().feasible);
    }

    #[test]
    fn printed_example_schedule_overloads_at_four() {
        // b [3,8), c [4,7) and e [3,5) overlap at t = 4: demand 2 + 1 + 2 > 4.
        let inst = example();
        let rep = check_schedule(&inst, inst.durations(), &starts(1, 3, 4, 0, 3)).unwrap();
        assert!(!rep.feasible);
        assert!(rep.precedence_violations.is_empty());
        assert_eq!(
            rep.resource_violations,
            vec![ResourceViolation { resource: 0, time: 4, usage: 5, capacity: 4 }]
        );
    }

    #[test]
    fn all_zero_starts_violate_both_kinds() {
        let inst = example();
        let rep = check_schedule(&inst, inst.durations(), &Schedule::new(vec![0; 7])).unwrap();
        assert!(!rep.feasible);
        assert_eq!(rep.resource_violations[0].time, 0);
        assert_eq!(rep.resource_violations[0].usage, 10);
        assert!(rep
            .precedence_violations
            .iter()
            .any(|(c, slack)| c.from == 1 && c.to == 2 && *slack == -2));
    }

    #[test]
    fn check_rejects_size_mismatch() {
        let inst = example();
        assert!(check_schedule(&inst, &[0, 1], &Schedule::new(vec![0; 7])).is_err());
        assert!(check_schedule(&inst, inst.durations(), &Schedule::new(vec![0; 3])).is_err());
    }

    #[test]
    fn solves_example_to_optimality() {
        let inst = example();
        let out = solve(&inst, inst.durations(), &SolveOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let s = out.schedule.unwrap();
        assert!(check_schedule(&inst, inst.durations(), &s).unwrap().feasible);
        assert!(s.makespan(inst.durations()) <= 8);
    }

    #[test]
    fn contradictory_lags_are_infeasible() {
        let inst = ProjectInstance::new(
            "bad",
            vec![0, 1, 1, 0],
            vec![vec![0, 1, 1, 0]],
            vec![2],
            vec![
                TemporalConstraint::new(1, 2, 2),
                TemporalConstraint::new(2, 1, -1),
            ],
        )
        .unwrap();
        let out = solve(&inst, inst.durations(), &SolveOptions::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.schedule.is_none());
    }

    #[test]
    fn single_activity() {
        let inst = ProjectInstance::new(
            "one",
            vec![0, 4, 0],
            vec![vec![0, 1, 0]],
            vec![1],
            vec![TemporalConstraint::new(0, 1, 0), TemporalConstraint::new(1, 2, 4)],
        )
        .unwrap();
        let out = solve(&inst, inst.durations(), &SolveOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let s = out.schedule.unwrap();
        assert_eq!(s.starts[1], 0);
        assert_eq!(s.makespan(inst.durations()), 4);
    }

    #[test]
    fn critical_path_examples() {
        let chain = ProjectInstance::new(
            "chain",
            vec![0, 2, 3, 0],
            vec![vec![0, 1, 1, 0]],
            vec![2],
            vec![
                TemporalConstraint::new(0, 1, 0),
                TemporalConstraint::new(1, 2, 2),
                TemporalConstraint::new(1, 3, 2),
                TemporalConstraint::new(2, 3, 3),
            ],
        )
        .unwrap();
        assert_eq!(critical_path_bound(&chain, chain.durations()), Some(5));
        let empty = ProjectInstance::new("e", vec![0, 0], vec![], vec![], vec![]).unwrap();
        assert_eq!(critical_path_bound(&empty, empty.durations()), Some(0));
        let inst = example();
        assert!(critical_path_bound(&inst, inst.durations()).unwrap() <= 8);
    }

    #[test]
    fn fixed_and_release_are_respected() {
        let inst = example();
        let mut opts = SolveOptions::default();
        opts.fixed.insert(4, 2);
        opts.release = Some(3);
        let out = solve(&inst, inst.durations(), &opts);
        let s = out.schedule.unwrap();
        assert_eq!(s.starts[4], 2);
        for j in [1, 2, 3, 5, 6] {
            assert!(s.starts[j] >= 3);
        }
        opts.fixed.insert(5, 2);
        assert_eq!(solve(&inst, inst.durations(), &opts).status, SolveStatus::Infeasible);
    }

    #[test]
    fn zero_budget_reports_unknown_or_warm_start() {
        let inst = example();
        let opts = SolveOptions {
            node_limit: 0,
            ..SolveOptions::default()
        };
        assert_eq!(solve(&inst, inst.durations(), &opts).status, SolveStatus::Unknown);
        let warm = starts(1, 3, 5, 0, 3);
        let opts = SolveOptions {
            node_limit: 0,
            warm_start: Some(warm.clone()),
            ..SolveOptions::default()
        };
        let out = solve(&inst, inst.durations(), &opts);
        assert_eq!(out.status, SolveStatus::Feasible);
        assert_eq!(out.schedule.unwrap(), warm);
    }

    #[test]
    fn scenarios_share_one_start_vector() {
        let inst = example();
        let mut long = inst.durations().to_vec();
        long[4] = 2;
        let scen = vec![inst.durations().to_vec(), long.clone()];
        let out = solve_scenarios(&inst, &scen, &SolveOptions::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        let s = out.schedule.unwrap();
        for d in &scen {
            assert!(check_schedule(&inst, d, &s).unwrap().feasible);
        }
        let mean = (s.makespan(&scen[0]) + s.makespan(&scen[1])) as f64 / 2.0;
        assert_eq!(out.objective, Some(mean));
    }
}
