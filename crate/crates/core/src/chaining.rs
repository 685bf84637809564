//! Partial order schedules from resource chains.

use serde::{Deserialize, Serialize};

use crate::instance::ProjectInstance;
use crate::solver::Schedule;
use crate::stn::DistanceGraph;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialOrderSchedule {
    pub base: ProjectInstance,
    /// `(a, b)`: `b` starts no earlier than `a` ends.
    pub chain_edges: Vec<(usize, usize)>,
    /// `chains[r][k]` is the k-th unit chain of resource `r`.
    pub chains: Vec<Vec<Vec<usize>>>,
}

impl PartialOrderSchedule {
    /// Instance lags plus end-to-start chain edges under `durations`, with
    /// every activity kept at or after the source.
    pub fn temporal_graph(&self, durations: &[i64]) -> DistanceGraph {
        let total = self.base.total_activities();
        let mut g = DistanceGraph::new(total);
        for c in self.base.constraints() {
            g.add_edge(c.from, c.to, c.weight);
        }
        for j in 1..total {
            g.add_edge(0, j, 0);
        }
        for &(a, b) in &self.chain_edges {
            g.add_edge(a, b, durations[a]);
        }
        g
    }
}

/// Threads the activities of a resource-feasible schedule through unit chains.
///
/// Panics if some activity finds too few free chains, which only happens
/// when `sched` overloads a resource under `durations`.
pub fn chain(inst: &ProjectInstance, durations: &[i64], sched: &Schedule) -> PartialOrderSchedule {
    let s = &sched.starts;
    let mut order: Vec<usize> = inst.real_activities().collect();
    order.sort_by_key(|&j| (s[j], j));

    let mut chains = Vec::with_capacity(inst.resource_count());
    let mut edges = Vec::new();
    for r in 0..inst.resource_count() {
        let cap = inst.capacities()[r] as usize;
        let mut res_chains: Vec<Vec<usize>> = vec![Vec::new(); cap];
        for &j in &order {
            let need = inst.demand(r, j) as usize;
            if need == 0 {
                continue;
            }
            let end_of = |c: &Vec<usize>| c.last().map(|&a| s[a] + durations[a]);
            let mut free: Vec<(bool, Option<i64>, usize)> = res_chains
                .iter()
                .enumerate()
                .filter_map(|(k, c)| match end_of(c) {
                    Some(e) if e > s[j] => None,
                    e => Some((e != Some(s[j]), e, k)),
                })
                .collect();
            assert!(
                free.len() >= need,
                "activity {j} needs {need} units of resource {r}, only {} free at {}",
                free.len(),
                s[j]
            );
            // exact end match first, then earliest end (empty chains first), then index
            free.sort();
            for &(_, _, k) in &free[..need] {
                if let Some(&pred) = res_chains[k].last() {
                    edges.push((pred, j));
                }
                res_chains[k].push(j);
            }
        }
        chains.push(res_chains);
    }
    let mut chain_edges = Vec::with_capacity(edges.len());
    for e in edges {
        if !chain_edges.contains(&e) {
            chain_edges.push(e);
        }
    }
    PartialOrderSchedule {
        base: inst.clone(),
        chain_edges,
        chains,
    }
}

pub fn pos_respects_schedule(pos: &PartialOrderSchedule, sched: &Schedule, durations: &[i64]) -> bool {
    pos.chain_edges
        .iter()
        .all(|&(a, b)| sched.starts[b] >= sched.starts[a] + durations[a])
}
