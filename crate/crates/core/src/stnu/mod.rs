//! Simple temporal networks with uncertainty.
//!
//! Edges use the upper-bound convention: `(x, w, y)` reads `t_y - t_x <= w`.
//! Networks built from a project have two timepoints per activity,
//! `start(j) = 2j` and `end(j) = 2j + 1`.

mod dc;
mod rte;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chaining::PartialOrderSchedule;
use crate::instance::StochasticInstance;

pub use dc::{dc_check, DcResult, Estnu, WaitEdge};
pub use rte::{execute, rte_execute, ExecutionTrace, RteError};

pub fn start(activity: usize) -> usize {
    2 * activity
}

pub fn end(activity: usize) -> usize {
    2 * activity + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StnuEdge {
    pub from: usize,
    pub to: usize,
    pub weight: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingentLink {
    pub activation: usize,
    pub contingent: usize,
    pub low: i64,
    pub high: i64,
    /// Activity whose duration this link models, for project networks.
    pub activity: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StnuError {
    #[error("timepoint {0} out of range")]
    Timepoint(usize),
    #[error("contingent link bounds [{low}, {high}] must satisfy 1 <= low <= high")]
    ContingentBounds { low: i64, high: i64 },
    #[error("timepoint {0} already has an incoming contingent link")]
    DuplicateContingent(usize),
    #[error("timepoint {0} cannot be both activation and contingent")]
    ContingentActivation(usize),
    #[error("partial order schedule and stochastic instance describe different projects")]
    MismatchedInstance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stnu {
    timepoints: usize,
    /// `n + 2` when built from a project.
    activities: Option<usize>,
    ordinary_edges: Vec<StnuEdge>,
    contingent_links: Vec<ContingentLink>,
}

impl Stnu {
    pub fn new(timepoints: usize) -> Self {
        Self {
            timepoints,
            activities: None,
            ordinary_edges: Vec::new(),
            contingent_links: Vec::new(),
        }
    }

    pub fn timepoint_count(&self) -> usize {
        self.timepoints
    }

    pub fn activity_count(&self) -> Option<usize> {
        self.activities
    }

    pub fn ordinary_edges(&self) -> &[StnuEdge] {
        &self.ordinary_edges
    }

    pub fn contingent_links(&self) -> &[ContingentLink] {
        &self.contingent_links
    }

    pub fn is_contingent(&self, tp: usize) -> bool {
        self.contingent_links.iter().any(|l| l.contingent == tp)
    }

    /// Adds `t_to - t_from <= weight`.
    pub fn add_edge(&mut self, from: usize, to: usize, weight: i64) -> Result<(), StnuError> {
        for tp in [from, to] {
            if tp >= self.timepoints {
                return Err(StnuError::Timepoint(tp));
            }
        }
        self.ordinary_edges.push(StnuEdge { from, to, weight });
        Ok(())
    }

    pub fn add_contingent(
        &mut self,
        activation: usize,
        contingent: usize,
        low: i64,
        high: i64,
    ) -> Result<(), StnuError> {
        self.push_link(ContingentLink {
            activation,
            contingent,
            low,
            high,
            activity: None,
        })
    }

    fn push_link(&mut self, link: ContingentLink) -> Result<(), StnuError> {
        for tp in [link.activation, link.contingent] {
            if tp >= self.timepoints {
                return Err(StnuError::Timepoint(tp));
            }
        }
        if link.low < 1 || link.low > link.high {
            return Err(StnuError::ContingentBounds {
                low: link.low,
                high: link.high,
            });
        }
        if self.is_contingent(link.contingent) {
            return Err(StnuError::DuplicateContingent(link.contingent));
        }
        if link.activation == link.contingent
            || self.is_contingent(link.activation)
            || self.contingent_links.iter().any(|l| l.activation == link.contingent)
        {
            return Err(StnuError::ContingentActivation(link.contingent));
        }
        self.contingent_links.push(link);
        Ok(())
    }

    pub fn timepoint_name(&self, tp: usize) -> String {
        match self.activities {
            Some(_) if tp % 2 == 0 => format!("start_{}", tp / 2),
            Some(_) => format!("end_{}", tp / 2),
            None => format!("t{tp}"),
        }
    }

    /// Graphviz rendering: ordinary edges solid, contingent links dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph stnu {\n  rankdir=LR;\n");
        self.write_dot_body(&mut out);
        out.push_str("}\n");
        out
    }

    fn write_dot_body(&self, out: &mut String) {
        for tp in 0..self.timepoints {
            let shape = if self.is_contingent(tp) { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  n{tp} [label=\"{}\", shape={shape}];", self.timepoint_name(tp));
        }
        for e in &self.ordinary_edges {
            let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.weight);
        }
        for l in &self.contingent_links {
            let _ = writeln!(
                out,
                "  n{} -> n{} [style=dashed, label=\"[{}, {}]\"];",
                l.activation, l.contingent, l.low, l.high
            );
        }
    }
}

/// Network for a partial order schedule: one contingent link per uncertain
/// duration, lags between starts, and `end_a <= start_b` per chain edge.
pub fn build_stnu(pos: &PartialOrderSchedule, stoch: &StochasticInstance) -> Result<Stnu, StnuError> {
    if pos.base != stoch.base {
        return Err(StnuError::MismatchedInstance);
    }
    let total = pos.base.total_activities();
    let mut net = Stnu::new(2 * total);
    net.activities = Some(total);
    for j in 0..total {
        let (lo, hi) = stoch.bounds(j);
        if lo == hi {
            net.add_edge(start(j), end(j), lo)?;
            net.add_edge(end(j), start(j), -lo)?;
        } else {
            net.push_link(ContingentLink {
                activation: start(j),
                contingent: end(j),
                low: lo,
                high: hi,
                activity: Some(j),
            })?;
        }
    }
    for c in pos.base.constraints() {
        net.add_edge(start(c.to), start(c.from), -c.weight)?;
    }
    for &(a, b) in &pos.chain_edges {
        net.add_edge(start(b), end(a), 0)?;
    }
    Ok(net)
}
