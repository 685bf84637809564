//! Earliest-first real-time execution of a controllable network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dc::Estnu;
use crate::instance::DurationSample;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    /// Execution time per timepoint.
    pub times: Vec<i64>,
    pub feasible: bool,
    pub makespan: i64,
    /// `(time, timepoints executed at that time)` in execution order.
    pub decisions: Vec<(i64, Vec<usize>)>,
}

impl ExecutionTrace {
    /// Start time per activity, for networks built from a project.
    pub fn starts(&self) -> Vec<i64> {
        self.times.iter().step_by(2).copied().collect()
    }

    fn record(&mut self, time: i64, tp: usize) {
        self.times[tp] = time;
        match self.decisions.last_mut() {
            Some((t, group)) if *t == time => group.push(tp),
            _ => self.decisions.push((time, vec![tp])),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RteError {
    #[error("expected {expected} contingent durations, got {got}")]
    DurationCount { expected: usize, got: usize },
    #[error("duration {duration} of link {link} outside [{low}, {high}]")]
    OutOfBounds {
        link: usize,
        duration: i64,
        low: i64,
        high: i64,
    },
    #[error("network is not dispatchable: timepoint {timepoint} has window [{earliest}, {latest}]")]
    NotDispatchable {
        timepoint: usize,
        earliest: i64,
        latest: i64,
    },
    #[error("execution stalled at time {time} with {remaining} timepoints left")]
    Stalled { time: i64, remaining: usize },
    #[error("network was not built from a project")]
    NotAProject,
}

/// Executes a project network under realized activity durations.
pub fn rte_execute(estnu: &Estnu, sample: &DurationSample) -> Result<ExecutionTrace, RteError> {
    let links = estnu.base.contingent_links();
    let mut durations = Vec::with_capacity(links.len());
    for l in links {
        let j = l.activity.ok_or(RteError::NotAProject)?;
        let d = *sample.durations.get(j).ok_or(RteError::DurationCount {
            expected: estnu.base.activity_count().unwrap_or(0),
            got: sample.durations.len(),
        })?;
        durations.push(d);
    }
    execute(estnu, &durations)
}

/// Executes with one realized duration per contingent link (in link order).
///
/// At each step, contingent timepoints due no later than the earliest
/// controllable candidate are observed first; then the lowest-indexed
/// controllable with the smallest earliest time executes, and bounds are
/// recomputed. Several timepoints can share one instant.
pub fn execute(estnu: &Estnu, durations: &[i64]) -> Result<ExecutionTrace, RteError> {
    let net = &estnu.base;
    let n = net.timepoint_count();
    let links = net.contingent_links();
    if durations.len() != links.len() {
        return Err(RteError::DurationCount {
            expected: links.len(),
            got: durations.len(),
        });
    }
    for (k, (l, &d)) in links.iter().zip(durations).enumerate() {
        if d < l.low || d > l.high {
            return Err(RteError::OutOfBounds {
                link: k,
                duration: d,
                low: l.low,
                high: l.high,
            });
        }
    }
    let link_of: Vec<Option<usize>> = (0..n)
        .map(|tp| links.iter().position(|l| l.contingent == tp))
        .collect();

    let mut done = vec![false; n];
    let mut trace = ExecutionTrace {
        times: vec![0; n],
        feasible: false,
        makespan: 0,
        decisions: Vec::new(),
    };
    let mut remaining = n;
    let mut now = 0i64;
    while remaining > 0 {
        let mut best: Option<(i64, usize)> = None;
        for x in 0..n {
            if done[x] || link_of[x].is_some() {
                continue;
            }
            if let Some(lb) = earliest(estnu, &done, &trace.times, x, now) {
                if best.map_or(true, |(b, _)| lb < b) {
                    best = Some((lb, x));
                }
            }
        }
        let next_observation = links
            .iter()
            .zip(durations)
            .filter(|(l, _)| done[l.activation] && !done[l.contingent])
            .map(|(l, d)| trace.times[l.activation] + d)
            .min();
        match (best, next_observation) {
            (_, Some(t)) if best.map_or(true, |(lb, _)| t <= lb) => {
                now = t;
                for (l, d) in links.iter().zip(durations) {
                    if done[l.activation] && !done[l.contingent] && trace.times[l.activation] + d == t {
                        done[l.contingent] = true;
                        remaining -= 1;
                        trace.record(t, l.contingent);
                    }
                }
            }
            (Some((lb, x)), _) => {
                now = lb;
                let latest = latest(estnu, &done, &trace.times, x);
                if lb > latest {
                    return Err(RteError::NotDispatchable {
                        timepoint: x,
                        earliest: lb,
                        latest,
                    });
                }
                done[x] = true;
                remaining -= 1;
                trace.record(now, x);
            }
            (None, _) => {
                return Err(RteError::Stalled { time: now, remaining });
            }
        }
    }

    trace.feasible = net
        .ordinary_edges()
        .iter()
        .all(|e| trace.times[e.to] - trace.times[e.from] <= e.weight);
    debug_assert!(trace.feasible, "controllable network executed infeasibly");
    trace.makespan = match net.activity_count() {
        Some(total) if total > 2 => (1..total - 1).map(|j| trace.times[2 * j + 1]).max().unwrap_or(0),
        Some(_) => 0,
        None => trace.times.iter().copied().max().unwrap_or(0),
    };
    Ok(trace)
}

/// Earliest admissible time of `x`, or `None` while it must wait for an
/// unexecuted predecessor.
fn earliest(estnu: &Estnu, done: &[bool], times: &[i64], x: usize, now: i64) -> Option<i64> {
    let mut lb = now;
    for y in 0..done.len() {
        if y == x {
            continue;
        }
        if let Some(w) = estnu.ordinary(x, y) {
            if done[y] {
                lb = lb.max(times[y] - w);
            } else if w < 0 {
                return None;
            }
        }
    }
    for wait in estnu.wait_edges.iter().filter(|w| w.from == x) {
        let link = &estnu.base.contingent_links()[wait.link];
        if !done[link.activation] {
            return None;
        }
        if !done[link.contingent] {
            lb = lb.max(times[link.activation] - wait.weight);
        }
    }
    Some(lb)
}

fn latest(estnu: &Estnu, done: &[bool], times: &[i64], x: usize) -> i64 {
    (0..done.len())
        .filter(|&y| y != x && done[y])
        .filter_map(|y| estnu.ordinary(y, x).map(|w| times[y] + w))
        .min()
        .unwrap_or(i64::MAX)
}
