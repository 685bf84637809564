//! Dynamic controllability by all-pairs label propagation.
//!
//! Ordinary constraints live in a shortest-path matrix; upper-case edges
//! `b -> activation(k)` labelled by contingent `k` live in one column per
//! link. Each round closes the ordinary matrix, applies the upper-case,
//! lower-case, cross-case and label-removal reductions, and checks the
//! ordinary-plus-upper projection for a negative cycle. Reactions to a
//! contingent observation may happen at the same instant.

use serde::{Deserialize, Serialize};

use super::Stnu;
use crate::stn::{DistanceGraph, Propagation};

const INF: i64 = i64::MAX / 4;

/// `from` may not execute before `activation + (-weight)` unless the
/// contingent timepoint of link `link` has already been observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaitEdge {
    pub from: usize,
    pub to: usize,
    pub weight: i64,
    pub link: usize,
}

/// A dynamically controllable network with its derived constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estnu {
    pub base: Stnu,
    /// All-pairs tightest ordinary constraints, `None` where unconstrained.
    ordinary: Vec<Vec<Option<i64>>>,
    pub wait_edges: Vec<WaitEdge>,
}

impl Estnu {
    pub fn ordinary(&self, from: usize, to: usize) -> Option<i64> {
        self.ordinary[from][to]
    }

    pub fn timepoint_count(&self) -> usize {
        self.base.timepoint_count()
    }

    /// Base network plus waits, drawn dotted with their contingent label.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph estnu {\n  rankdir=LR;\n");
        self.base.write_dot_body(&mut out);
        for w in &self.wait_edges {
            let label = self.base.timepoint_name(self.base.contingent_links()[w.link].contingent);
            out.push_str(&format!(
                "  n{} -> n{} [style=dotted, label=\"{}:{}\"];\n",
                w.from, w.to, label, w.weight
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DcResult {
    Controllable(Estnu),
    /// Negative cycle of the propagated network, as timepoints in edge order
    /// (`cycle[i] -> cycle[i+1]`, closing back to `cycle[0]`).
    NotDc { cycle: Vec<usize>, length: i64 },
}

impl DcResult {
    pub fn is_controllable(&self) -> bool {
        matches!(self, DcResult::Controllable(_))
    }
}

fn relax(slot: &mut i64, value: i64) -> bool {
    if value < *slot {
        *slot = value;
        true
    } else {
        false
    }
}

fn add(a: i64, b: i64) -> i64 {
    if a >= INF || b >= INF {
        INF
    } else {
        a + b
    }
}

/// Negative cycle over ordinary entries and upper-case columns, if any.
fn negative_cycle(ord: &[Vec<i64>], upper: &[Vec<i64>], activations: &[usize]) -> Option<(Vec<usize>, i64)> {
    let n = ord.len();
    // t_y - t_x <= w  is  t_x - t_y >= -w  in lower-bound form
    let mut g = DistanceGraph::new(n);
    for x in 0..n {
        for y in 0..n {
            if x != y && ord[x][y] < INF {
                g.add_edge(y, x, -ord[x][y]);
            }
        }
    }
    for (k, col) in upper.iter().enumerate() {
        let a = activations[k];
        for (b, &w) in col.iter().enumerate() {
            if w < INF && w < ord[b][a] {
                g.add_edge(a, b, -w);
            }
        }
    }
    for x in 0..n {
        if ord[x][x] < 0 {
            return Some((vec![x], ord[x][x]));
        }
    }
    match g.propagate() {
        Propagation::Consistent(_) => None,
        Propagation::NegativeCycle(mut cycle) => {
            let length = -g.cycle_weight(&cycle).expect("cycle edges exist");
            cycle.reverse();
            Some((cycle, length))
        }
    }
}

pub fn dc_check(net: &Stnu) -> DcResult {
    let n = net.timepoint_count();
    let links = net.contingent_links();
    let mut ord = vec![vec![INF; n]; n];
    for (i, row) in ord.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in net.ordinary_edges() {
        relax(&mut ord[e.from][e.to], e.weight);
    }
    let activations: Vec<usize> = links.iter().map(|l| l.activation).collect();
    let mut upper = vec![vec![INF; n]; links.len()];
    for (k, l) in links.iter().enumerate() {
        relax(&mut ord[l.activation][l.contingent], l.high);
        relax(&mut ord[l.contingent][l.activation], -l.low);
        upper[k][l.contingent] = -l.high;
    }

    // Each productive round tightens some entry by at least one; the cap
    // only guards against a bug turning this into a livelock.
    let max_rounds = 4 * (n + 1) * (n + 1) * (links.len() + 1);
    for _ in 0..max_rounds {
        if let Some((cycle, length)) = negative_cycle(&ord, &upper, &activations) {
            return DcResult::NotDc { cycle, length };
        }
        let mut changed = false;

        for k in 0..n {
            for i in 0..n {
                let ik = ord[i][k];
                if ik >= INF {
                    continue;
                }
                for j in 0..n {
                    let cand = add(ik, ord[k][j]);
                    if cand < ord[i][j] {
                        ord[i][j] = cand;
                        changed = true;
                    }
                }
            }
        }
        if (0..n).any(|i| ord[i][i] < 0) {
            continue;
        }

        for (k, l) in links.iter().enumerate() {
            // upper-case: x -> b (ordinary) then b -> A_k (upper)
            let col = upper[k].clone();
            for x in 0..n {
                if x == l.contingent {
                    continue;
                }
                let best = (0..n).map(|b| add(ord[x][b], col[b])).min().unwrap_or(INF);
                changed |= relax(&mut upper[k][x], best);
            }
            // lower-case: A_k -> C_k (x_k) then a negative ordinary edge out of C_k
            for d in 0..n {
                let cd = ord[l.contingent][d];
                if d != l.contingent && cd < 0 {
                    changed |= relax(&mut ord[l.activation][d], l.low + cd);
                }
            }
        }
        for (k, lk) in links.iter().enumerate() {
            // cross-case: A_k -> C_k (x_k) then C_k -> A_j (upper, j != k)
            for j in 0..links.len() {
                if j == k {
                    continue;
                }
                let w = upper[j][lk.contingent];
                if w < 0 {
                    changed |= relax(&mut upper[j][lk.activation], lk.low + w);
                }
            }
        }
        for (k, l) in links.iter().enumerate() {
            // label removal: a wait no longer than the minimum duration is unconditional
            for b in 0..n {
                let w = upper[k][b];
                if w < INF && w >= -l.low {
                    changed |= relax(&mut ord[b][l.activation], w);
                }
            }
        }
        if !changed {
            let mut wait_edges = Vec::new();
            for (k, l) in links.iter().enumerate() {
                for b in 0..n {
                    let w = upper[k][b];
                    if b != l.contingent && b != l.activation && w < -l.low && w < ord[b][l.activation] {
                        wait_edges.push(WaitEdge {
                            from: b,
                            to: l.activation,
                            weight: w,
                            link: k,
                        });
                    }
                }
            }
            let ordinary = ord
                .iter()
                .map(|row| row.iter().map(|&w| (w < INF).then_some(w)).collect())
                .collect();
            return DcResult::Controllable(Estnu {
                base: net.clone(),
                ordinary,
                wait_edges,
            });
        }
    }
    log::warn!("dc propagation did not settle within {max_rounds} rounds");
    let (cycle, length) = negative_cycle(&ord, &upper, &activations).unwrap_or((Vec::new(), 0));
    DcResult::NotDc { cycle, length }
}
