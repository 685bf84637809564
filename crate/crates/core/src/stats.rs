//! Paired comparisons of method runs.
//!
//! Every metric is smaller-is-better and infeasible runs count as `+inf`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::methods::{Method, MethodRun, UnknownToken};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("every paired difference is zero")]
    NoNonzeroDifferences,
    #[error("every pair is a tie")]
    AllTies,
    #[error("need at least {needed} pairs, got {got}")]
    TooFewPairs { needed: usize, got: usize },
    #[error("normalized differences have zero variance")]
    ZeroVariance,
    #[error("magnitude test needs finite values on both sides")]
    InfiniteValue,
    #[error("metric values must be non-negative and not NaN, got {0}")]
    InvalidValue(String),
    #[error("need runs of at least two methods")]
    TooFewMethods,
}

/// `(metric_a, metric_b)` pairs; values may be `+inf` but not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    pairs: Vec<(f64, f64)>,
}

impl PairedSeries {
    /// Drops pairs where both sides are infinite.
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, StatsError> {
        let mut kept = Vec::new();
        for (a, b) in pairs {
            for v in [a, b] {
                if v.is_nan() || v < 0.0 {
                    return Err(StatsError::InvalidValue(v.to_string()));
                }
            }
            if !(a.is_infinite() && b.is_infinite()) {
                kept.push((a, b));
            }
        }
        Ok(Self { pairs: kept })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        Self {
            pairs: self.pairs.iter().map(|&(a, b)| (a * factor, b * factor)).collect(),
        }
    }

    /// Pairs where both values are finite.
    pub fn double_hits(&self) -> Vec<(f64, f64)> {
        self.pairs
            .iter()
            .copied()
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TestExtras {
    Wilcoxon {
        rank_sum_a_worse: f64,
        rank_sum_b_worse: f64,
    },
    Proportion {
        wins_a: usize,
        wins_b: usize,
        proportion_a: f64,
        /// `|Z| > 1.96`, the fixed acceptance region.
        outside_acceptance: bool,
    },
    Magnitude {
        mean_a: f64,
        mean_b: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n_pairs: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Side with the better (smaller) outcomes, if the test has a direction.
    pub winner: Option<Side>,
    pub extras: TestExtras,
}

fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * n.sf(z.abs())).clamp(0.0, 1.0)
}

/// Average ranks of `values` (1-based); equal values share their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test on `a - b`, zeros ranked then dropped (Pratt),
/// normal approximation with tie and continuity corrections.
///
/// `statistic` is signed: negative when `a` tends to be smaller.
pub fn wilcoxon_pratt(series: &PairedSeries, alpha: f64) -> Result<TestResult, StatsError> {
    let diffs: Vec<f64> = series
        .pairs
        .iter()
        .map(|&(a, b)| match (a.is_infinite(), b.is_infinite()) {
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            _ => a - b,
        })
        .collect();
    let count = diffs.len() as f64;
    let zeros = diffs.iter().filter(|d| **d == 0.0).count() as f64;
    if diffs.iter().all(|d| *d == 0.0) {
        return Err(StatsError::NoNonzeroDifferences);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let r_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let r_minus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();

    let mean = count * (count + 1.0) / 4.0 - zeros * (zeros + 1.0) / 4.0;
    let mut var = count * (count + 1.0) * (2.0 * count + 1.0) - zeros * (zeros + 1.0) * (2.0 * zeros + 1.0);
    let mut nonzero: Vec<f64> = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d != 0.0)
        .map(|(_, r)| *r)
        .collect();
    nonzero.sort_by(f64::total_cmp);
    for group in nonzero.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        var -= 0.5 * t * (t * t - 1.0);
    }
    let se = (var / 24.0).sqrt();
    let offset = r_plus - mean;
    let correction = if offset == 0.0 { 0.0 } else { 0.5 * offset.signum() };
    let z = (offset - correction) / se;
    let p_value = normal_two_sided(z);
    let winner = match r_plus.total_cmp(&r_minus) {
        std::cmp::Ordering::Less => Some(Side::A),
        std::cmp::Ordering::Greater => Some(Side::B),
        std::cmp::Ordering::Equal => None,
    };
    Ok(TestResult {
        n_pairs: series.len(),
        statistic: z,
        p_value,
        significant: p_value < alpha,
        winner,
        extras: TestExtras::Wilcoxon {
            rank_sum_a_worse: r_plus,
            rank_sum_b_worse: r_minus,
        },
    })
}

/// Z-test of the share of non-tied pairs won by `a` against one half.
pub fn proportion_test(series: &PairedSeries, alpha: f64) -> Result<TestResult, StatsError> {
    let wins_a = series.pairs.iter().filter(|(a, b)| a < b).count();
    let wins_b = series.pairs.iter().filter(|(a, b)| a > b).count();
    let n = wins_a + wins_b;
    if n == 0 {
        return Err(StatsError::AllTies);
    }
    let nf = n as f64;
    let p = wins_a as f64 / nf;
    let z = ((p - 0.5).abs() - 1.0 / (2.0 * nf)) / (0.25 / nf).sqrt();
    let p_value = normal_two_sided(z.max(0.0));
    let winner = match wins_a.cmp(&wins_b) {
        std::cmp::Ordering::Greater => Some(Side::A),
        std::cmp::Ordering::Less => Some(Side::B),
        std::cmp::Ordering::Equal => None,
    };
    Ok(TestResult {
        n_pairs: n,
        statistic: z,
        p_value,
        significant: p_value < alpha,
        winner,
        extras: TestExtras::Proportion {
            wins_a,
            wins_b,
            proportion_a: p,
            outside_acceptance: z.abs() > 1.96,
        },
    })
}

/// Paired t-test after dividing each pair by its own mean.
pub fn magnitude_test(pairs: &[(f64, f64)], alpha: f64) -> Result<TestResult, StatsError> {
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::InfiniteValue);
    }
    let n = pairs.len();
    if n < 2 {
        return Err(StatsError::TooFewPairs { needed: 2, got: n });
    }
    let normalized: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(a, b)| {
            let m = (a + b) / 2.0;
            if m == 0.0 {
                (1.0, 1.0)
            } else {
                (a / m, b / m)
            }
        })
        .collect();
    let nf = n as f64;
    let mean_a = normalized.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_b = normalized.iter().map(|p| p.1).sum::<f64>() / nf;
    let diffs: Vec<f64> = normalized.iter().map(|(a, b)| a - b).collect();
    let dbar = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - dbar).powi(2)).sum::<f64>() / (nf - 1.0);
    if var <= 1e-24 {
        return Err(StatsError::ZeroVariance);
    }
    let t = dbar / (var / nf).sqrt();
    let dist = StudentsT::new(0.0, 1.0, nf - 1.0).expect("positive degrees of freedom");
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TestResult {
        n_pairs: n,
        statistic: t,
        p_value,
        significant: p_value < alpha,
        winner: if t < 0.0 {
            Some(Side::A)
        } else if t > 0.0 {
            Some(Side::B)
        } else {
            None
        },
        extras: TestExtras::Magnitude { mean_a, mean_b },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Quality,
    TimeOffline,
    TimeOnline,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Quality, Metric::TimeOffline, Metric::TimeOnline];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Quality => "quality",
            Metric::TimeOffline => "time_offline",
            Metric::TimeOnline => "time_online",
        }
    }

    /// Metric value of a run; infeasible runs are infinitely bad.
    pub fn value(self, run: &MethodRun) -> f64 {
        if !run.feasible {
            return f64::INFINITY;
        }
        match self {
            Metric::Quality => run.makespan.map_or(f64::INFINITY, |m| m as f64),
            Metric::TimeOffline => run.time_offline.as_secs_f64(),
            Metric::TimeOnline => run.time_online.as_secs_f64(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownToken {
                kind: "metric",
                value: s.to_string(),
            })
    }
}

/// Series for `a` versus `b` over the `(instance, seed)` keys both ran on.
pub fn paired_series(runs: &[MethodRun], a: Method, b: Method, metric: Metric) -> PairedSeries {
    let index = |m: Method| -> BTreeMap<(&str, u64), f64> {
        runs.iter()
            .filter(|r| r.method == m)
            .map(|r| ((r.instance.as_str(), r.seed), metric.value(r)))
            .collect()
    };
    let (ia, ib) = (index(a), index(b));
    let pairs = ia
        .iter()
        .filter_map(|(k, &va)| ib.get(k).map(|&vb| (va, vb)));
    PairedSeries::new(pairs).expect("metric values are non-negative")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    Strong,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderingEdge {
    pub better: Method,
    pub worse: Method,
    pub strength: Strength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: Method,
    pub b: Method,
    pub wilcoxon: Result<TestResult, StatsError>,
    pub proportion: Result<TestResult, StatsError>,
    pub magnitude: Result<TestResult, StatsError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialOrdering {
    pub metric: Metric,
    pub methods: Vec<Method>,
    pub edges: Vec<OrderingEdge>,
    pub comparisons: Vec<PairComparison>,
}

impl PartialOrdering {
    pub fn has_edge(&self, better: Method, worse: Method) -> Option<Strength> {
        self.edges
            .iter()
            .find(|e| e.better == better && e.worse == worse)
            .map(|e| e.strength)
    }

    pub fn is_acyclic(&self) -> bool {
        let mut remaining: BTreeSet<Method> = self.methods.iter().copied().collect();
        loop {
            let source = remaining
                .iter()
                .copied()
                .find(|m| !self.edges.iter().any(|e| e.worse == *m && remaining.contains(&e.better)));
            match source {
                Some(m) => {
                    remaining.remove(&m);
                }
                None => return remaining.is_empty(),
            }
        }
    }

    /// Graphviz graph: solid edges for Wilcoxon, dashed for proportion only.
    pub fn to_dot(&self) -> String {
        let mut out = format!("digraph {} {{\n", self.metric);
        for m in &self.methods {
            let _ = writeln!(out, "  {m};");
        }
        for e in &self.edges {
            let style = match e.strength {
                Strength::Strong => "solid",
                Strength::Weak => "dashed",
            };
            let _ = writeln!(out, "  {} -> {} [style={style}];", e.better, e.worse);
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_partial_ordering(
    runs: &[MethodRun],
    metric: Metric,
    alpha: f64,
) -> Result<PartialOrdering, StatsError> {
    let methods: Vec<Method> = runs
        .iter()
        .map(|r| r.method)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if methods.len() < 2 {
        return Err(StatsError::TooFewMethods);
    }
    let mut edges = Vec::new();
    let mut comparisons = Vec::new();
    for (i, &a) in methods.iter().enumerate() {
        for &b in &methods[i + 1..] {
            let series = paired_series(runs, a, b, metric);
            let wilcoxon = wilcoxon_pratt(&series, alpha);
            let proportion = proportion_test(&series, alpha);
            let magnitude = magnitude_test(&series.double_hits(), alpha);
            let pick = |res: &Result<TestResult, StatsError>| match res {
                Ok(t) if t.significant => t.winner,
                Ok(_) => None,
                Err(e) => {
                    log::info!("{a} vs {b} on {metric}: {e}");
                    None
                }
            };
            let edge = match (pick(&wilcoxon), pick(&proportion)) {
                (Some(side), _) => Some((side, Strength::Strong)),
                (None, Some(side)) => Some((side, Strength::Weak)),
                (None, None) => None,
            };
            if let Some((side, strength)) = edge {
                let (better, worse) = match side {
                    Side::A => (a, b),
                    Side::B => (b, a),
                };
                edges.push(OrderingEdge { better, worse, strength });
            }
            comparisons.push(PairComparison {
                a,
                b,
                wilcoxon,
                proportion,
                magnitude,
            });
        }
    }
    let ordering = PartialOrdering {
        metric,
        methods,
        edges,
        comparisons,
    };
    if !ordering.is_acyclic() {
        log::warn!("partial ordering on {metric} contains a cycle");
    }
    Ok(ordering)
}
