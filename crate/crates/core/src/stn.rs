//! Simple temporal networks in lower-bound form.
//!
//! An edge `(from, to, w)` means `t_to - t_from >= w`. Internally the
//! propagation computes longest paths, which is the same as shortest paths on
//! the negated, reversed distance graph.

use std::collections::BTreeMap;

/// Sentinel for "no path" in longest-path matrices.
pub const NO_PATH: i64 = i64::MIN / 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistanceGraph {
    node_count: usize,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Propagation {
    /// Earliest times: the least non-negative solution.
    Consistent(Vec<i64>),
    /// Cycle of nodes (in traversal order) whose lower-bound weights sum to a
    /// positive value, i.e. a negative cycle of the distance graph.
    NegativeCycle(Vec<usize>),
}

impl DistanceGraph {
    pub fn new(node_count: usize) -> Self {
        Self {
            node_count,
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Adds `t_to - t_from >= weight`.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: i64) {
        assert!(
            from < self.node_count && to < self.node_count,
            "edge ({from}, {to}) outside 0..{}",
            self.node_count
        );
        self.edges.push(Edge { from, to, weight });
    }

    /// Sum of lower-bound weights along a closed node sequence, using the
    /// tightest parallel edge between consecutive nodes.
    pub fn cycle_weight(&self, cycle: &[usize]) -> Option<i64> {
        let mut total = 0;
        for k in 0..cycle.len() {
            let (a, b) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            total += self
                .edges
                .iter()
                .filter(|e| e.from == a && e.to == b)
                .map(|e| e.weight)
                .max()?;
        }
        Some(total)
    }

    /// Bellman-Ford from a virtual origin joined to every node with weight 0.
    pub fn propagate(&self) -> Propagation {
        let n = self.node_count;
        let mut potential = vec![0i64; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        let mut last_updated = None;
        for _ in 0..=n {
            last_updated = None;
            for (idx, e) in self.edges.iter().enumerate() {
                let cand = potential[e.from] + e.weight;
                if cand > potential[e.to] {
                    potential[e.to] = cand;
                    pred[e.to] = Some(idx);
                    last_updated = Some(e.to);
                }
            }
            if last_updated.is_none() {
                return Propagation::Consistent(potential);
            }
        }
        // Walk back n steps to land on the cycle, then collect it.
        let mut node = last_updated.expect("updated in final pass");
        for _ in 0..n {
            node = self.edges[pred[node].expect("updated node has a predecessor")].from;
        }
        let start = node;
        let mut cycle = vec![start];
        let mut cur = self.edges[pred[start].unwrap()].from;
        while cur != start {
            cycle.push(cur);
            cur = self.edges[pred[cur].unwrap()].from;
        }
        cycle.reverse();
        Propagation::NegativeCycle(cycle)
    }

    /// Least completion that is non-negative, satisfies every edge and pins
    /// the `fixed` nodes to their values; `None` when no completion exists.
    pub fn earliest_schedule(&self, fixed: &BTreeMap<usize, i64>) -> Option<Vec<i64>> {
        let origin = self.node_count;
        let mut g = DistanceGraph::new(self.node_count + 1);
        g.edges = self.edges.clone();
        for v in 0..self.node_count {
            g.add_edge(origin, v, 0);
        }
        for (&v, &t) in fixed {
            if t < 0 {
                return None;
            }
            g.add_edge(origin, v, t);
            g.add_edge(v, origin, -t);
        }
        match g.propagate() {
            Propagation::Consistent(p) => {
                let base = p[origin];
                let times: Vec<i64> = p[..self.node_count].iter().map(|t| t - base).collect();
                let pinned = fixed.iter().all(|(&v, &t)| times[v] == t);
                pinned.then_some(times)
            }
            Propagation::NegativeCycle(_) => None,
        }
    }

    /// All-pairs longest path matrix (`NO_PATH` where unreachable), or `None`
    /// if some cycle has positive weight.
    pub fn all_pairs_longest(&self) -> Option<Vec<Vec<i64>>> {
        let n = self.node_count;
        let mut d = vec![vec![NO_PATH; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for e in &self.edges {
            d[e.from][e.to] = d[e.from][e.to].max(e.weight);
        }
        for k in 0..n {
            for i in 0..n {
                let dik = d[i][k];
                if dik == NO_PATH {
                    continue;
                }
                for j in 0..n {
                    let dkj = d[k][j];
                    if dkj != NO_PATH && dik + dkj > d[i][j] {
                        d[i][j] = dik + dkj;
                    }
                }
            }
        }
        (0..n).all(|i| d[i][i] == 0).then_some(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Project graph of the five-activity example, nodes 0 (source) ..= 6 (sink).
    pub(crate) fn example_graph() -> DistanceGraph {
        let mut g = DistanceGraph::new(7);
        for (f, t, w) in [
            (0, 1, 0),
            (0, 4, 0),
            (1, 2, 2),
            (2, 3, 1),
            (3, 1, -6),
            (3, 6, 3),
            (4, 5, 3),
            (5, 4, -3),
            (5, 6, 2),
        ] {
            g.add_edge(f, t, w);
        }
        g
    }

    #[test]
    fn example_is_consistent() {
        let Propagation::Consistent(p) = example_graph().propagate() else {
            panic!("expected consistent");
        };
        assert!(p[2] >= p[1] + 2);
        assert!(p[3] >= p[2] + 1);
        for e in example_graph().edges() {
            assert!(p[e.to] - p[e.from] >= e.weight);
        }
    }

    #[test]
    fn contradictory_window_is_a_cycle() {
        let mut g = DistanceGraph::new(2);
        g.add_edge(0, 1, 2);
        g.add_edge(1, 0, -1);
        match g.propagate() {
            Propagation::NegativeCycle(c) => {
                assert_eq!(c.len(), 2);
                assert!(g.cycle_weight(&c).unwrap() > 0);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn empty_graph_is_all_zero() {
        assert_eq!(DistanceGraph::new(3).propagate(), Propagation::Consistent(vec![0; 3]));
    }

    #[test]
    fn earliest_schedule_with_fixed_start() {
        let g = example_graph();
        let s = g.earliest_schedule(&BTreeMap::from([(4, 0)])).unwrap();
        assert_eq!(s[4], 0);
        assert_eq!(s[5], 3);
        assert_eq!(DistanceGraph::new(3).earliest_schedule(&BTreeMap::new()), Some(vec![0; 3]));
        // d and e are three apart; pinning both otherwise is infeasible.
        assert_eq!(g.earliest_schedule(&BTreeMap::from([(4, 0), (5, 2)])), None);
    }

    #[test]
    fn fixed_values_are_pinned_not_lower_bounds() {
        let mut g = DistanceGraph::new(2);
        g.add_edge(0, 1, 5);
        assert_eq!(g.earliest_schedule(&BTreeMap::from([(1, 3)])), None);
        assert_eq!(g.earliest_schedule(&BTreeMap::from([(1, 7)])), Some(vec![0, 7]));
    }

    #[test]
    fn all_pairs_matches_single_source() {
        let g = example_graph();
        let d = g.all_pairs_longest().unwrap();
        let Propagation::Consistent(p) = g.propagate() else { unreachable!() };
        for v in 0..7 {
            // every node is reachable from the source with non-negative weight
            assert_eq!(d[0][v].max(0), p[v]);
        }
        assert_eq!(d[1][3], 3);
        assert_eq!(d[3][1], -6);
    }
}
