//! Project instances, their stochastic variants and duration realizations.
//!
//! Activities are numbered `0..=n+1`: `0` is the source, `n + 1` the sink and
//! `1..=n` the real activities. A [`TemporalConstraint`] `(from, to, weight)`
//! always reads `s_to - s_from >= weight`; maximal lags are stored as reverse
//! arcs with a negative weight.

use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Start-to-start lag `s_to - s_from >= weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalConstraint {
    pub from: usize,
    pub to: usize,
    pub weight: i64,
}

impl TemporalConstraint {
    pub fn new(from: usize, to: usize, weight: i64) -> Self {
        Self { from, to, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("expected {expected} durations, got {got}")]
    DurationCount { expected: usize, got: usize },
    #[error("demand matrix must have {resources} rows of {activities} entries")]
    DemandShape { resources: usize, activities: usize },
    #[error("activity {activity} has negative duration {duration}")]
    NegativeDuration { activity: usize, duration: i64 },
    #[error("source and sink must have zero duration and zero demand")]
    DummyActivity,
    #[error("resource {resource} has capacity {capacity}; capacities must be at least 1")]
    Capacity { resource: usize, capacity: i64 },
    #[error("activity {activity} demands {demand} of resource {resource} (capacity {capacity})")]
    DemandExceedsCapacity {
        activity: usize,
        resource: usize,
        demand: i64,
        capacity: i64,
    },
    #[error("negative demand {demand} of resource {resource} by activity {activity}")]
    NegativeDemand {
        activity: usize,
        resource: usize,
        demand: i64,
    },
    #[error("constraint ({from} -> {to}) references an activity outside 0..={max}")]
    ConstraintIndex { from: usize, to: usize, max: usize },
}

/// Deterministic RCPSP/max instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInstance {
    pub name: String,
    activity_count: usize,
    durations: Vec<i64>,
    /// `demands[r][j]`
    demands: Vec<Vec<i64>>,
    capacities: Vec<i64>,
    constraints: Vec<TemporalConstraint>,
}

impl ProjectInstance {
    /// Validates and builds an instance. Constraints are stably ordered by
    /// their `from` activity, which is the order the `sch` format lists them.
    pub fn new(
        name: impl Into<String>,
        durations: Vec<i64>,
        demands: Vec<Vec<i64>>,
        capacities: Vec<i64>,
        mut constraints: Vec<TemporalConstraint>,
    ) -> Result<Self, InstanceError> {
        if durations.len() < 2 {
            return Err(InstanceError::DurationCount {
                expected: 2,
                got: durations.len(),
            });
        }
        let total = durations.len();
        let n = total - 2;
        if demands.len() != capacities.len() || demands.iter().any(|row| row.len() != total) {
            return Err(InstanceError::DemandShape {
                resources: capacities.len(),
                activities: total,
            });
        }
        if let Some((activity, &duration)) = durations.iter().enumerate().find(|(_, d)| **d < 0) {
            return Err(InstanceError::NegativeDuration { activity, duration });
        }
        if durations[0] != 0
            || durations[n + 1] != 0
            || demands.iter().any(|row| row[0] != 0 || row[n + 1] != 0)
        {
            return Err(InstanceError::DummyActivity);
        }
        for (resource, &capacity) in capacities.iter().enumerate() {
            if capacity < 1 {
                return Err(InstanceError::Capacity { resource, capacity });
            }
            for (activity, &demand) in demands[resource].iter().enumerate() {
                if demand < 0 {
                    return Err(InstanceError::NegativeDemand {
                        activity,
                        resource,
                        demand,
                    });
                }
                if demand > capacity {
                    return Err(InstanceError::DemandExceedsCapacity {
                        activity,
                        resource,
                        demand,
                        capacity,
                    });
                }
            }
        }
        if let Some(c) = constraints.iter().find(|c| c.from > n + 1 || c.to > n + 1) {
            return Err(InstanceError::ConstraintIndex {
                from: c.from,
                to: c.to,
                max: n + 1,
            });
        }
        constraints.sort_by_key(|c| c.from);
        Ok(Self {
            name: name.into(),
            activity_count: n,
            durations,
            demands,
            capacities,
            constraints,
        })
    }

    /// Number of real activities `n` (source and sink excluded).
    pub fn activity_count(&self) -> usize {
        self.activity_count
    }

    /// `n + 2`, the length of every per-activity vector.
    pub fn total_activities(&self) -> usize {
        self.activity_count + 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        self.activity_count + 1
    }

    /// Indices of the real activities.
    pub fn real_activities(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.activity_count
    }

    pub fn durations(&self) -> &[i64] {
        &self.durations
    }

    pub fn resource_count(&self) -> usize {
        self.capacities.len()
    }

    pub fn capacities(&self) -> &[i64] {
        &self.capacities
    }

    pub fn demand(&self, resource: usize, activity: usize) -> i64 {
        self.demands[resource][activity]
    }

    pub fn demands(&self) -> &[Vec<i64>] {
        &self.demands
    }

    pub fn constraints(&self) -> &[TemporalConstraint] {
        &self.constraints
    }

    /// Copy of the instance with its nominal durations replaced.
    pub fn with_durations(&self, durations: Vec<i64>) -> Result<Self, InstanceError> {
        Self::new(
            self.name.clone(),
            durations,
            self.demands.clone(),
            self.capacities.clone(),
            self.constraints.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header: {message}")]
    Header { line: usize, message: String },
    #[error("line {line}: expected an integer, found `{token}`")]
    NotInteger { line: usize, token: String },
    #[error("line {line}: activity {activity} lists {successors} successors but {weights} weights")]
    WeightCount {
        line: usize,
        activity: i64,
        successors: usize,
        weights: usize,
    },
    #[error("line {line}: activity {activity} demands {demand} of resource {resource}, capacity is {capacity}")]
    DemandExceedsCapacity {
        line: usize,
        activity: usize,
        resource: usize,
        demand: i64,
        capacity: i64,
    },
    #[error("line {line}: {message}")]
    Structure { line: usize, message: String },
    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEof { expected: String },
    #[error("invalid instance: {0}")]
    Invalid(#[from] InstanceError),
}

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn int_token(token: &str, line: usize) -> Result<i64, ParseError> {
    token.parse::<i64>().map_err(|_| ParseError::NotInteger {
        line,
        token: token.to_string(),
    })
}

fn weight_token(token: &str, line: usize) -> Result<i64, ParseError> {
    let inner = token
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .unwrap_or(token);
    int_token(inner, line).map_err(|_| ParseError::NotInteger {
        line,
        token: token.to_string(),
    })
}

fn index_token(token: &str, line: usize, max: usize) -> Result<usize, ParseError> {
    let v = int_token(token, line)?;
    if v < 0 || v as usize > max {
        return Err(ParseError::Structure {
            line,
            message: format!("activity id {v} outside 0..={max}"),
        });
    }
    Ok(v as usize)
}

/// Parses the RCPSP/max `sch` layout (see module docs for conventions).
///
/// Blank lines and lines starting with `#` are ignored. Successor weights may
/// be bracketed (`[5]`) or bare.
pub fn parse_psplib(text: &str) -> Result<ProjectInstance, ParseError> {
    parse_psplib_named(text, "")
}

pub fn parse_psplib_named(text: &str, name: &str) -> Result<ProjectInstance, ParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| Line {
            number: i + 1,
            tokens: l.split_whitespace().collect(),
        })
        .filter(|l| !l.tokens.is_empty() && !l.tokens[0].starts_with('#'));

    let header = lines.next().ok_or(ParseError::UnexpectedEof {
        expected: "header line".into(),
    })?;
    if header.tokens.len() < 2 {
        return Err(ParseError::Header {
            line: header.number,
            message: format!("expected `n R ...`, got {} tokens", header.tokens.len()),
        });
    }
    let n = int_token(header.tokens[0], header.number)?;
    let r = int_token(header.tokens[1], header.number)?;
    if n < 0 || r < 0 {
        return Err(ParseError::Header {
            line: header.number,
            message: "activity and resource counts must be non-negative".into(),
        });
    }
    let (n, r) = (n as usize, r as usize);
    let total = n + 2;

    let mut constraints = Vec::new();
    for expected in 0..total {
        let line = lines.next().ok_or_else(|| ParseError::UnexpectedEof {
            expected: format!("precedence line for activity {expected}"),
        })?;
        let ln = line.number;
        if line.tokens.len() < 3 {
            return Err(ParseError::Structure {
                line: ln,
                message: "precedence line needs `id mode #succ`".into(),
            });
        }
        let id = index_token(line.tokens[0], ln, n + 1)?;
        if id != expected {
            return Err(ParseError::Structure {
                line: ln,
                message: format!("expected activity {expected}, found {id}"),
            });
        }
        int_token(line.tokens[1], ln)?;
        let succ = int_token(line.tokens[2], ln)?;
        if succ < 0 {
            return Err(ParseError::Structure {
                line: ln,
                message: "negative successor count".into(),
            });
        }
        let succ = succ as usize;
        let rest = &line.tokens[3..];
        if rest.len() < succ {
            return Err(ParseError::Structure {
                line: ln,
                message: format!("expected {succ} successors, found {}", rest.len()),
            });
        }
        if rest.len() != 2 * succ {
            return Err(ParseError::WeightCount {
                line: ln,
                activity: id as i64,
                successors: succ,
                weights: rest.len() - succ,
            });
        }
        for k in 0..succ {
            let to = index_token(rest[k], ln, n + 1)?;
            let w = weight_token(rest[succ + k], ln)?;
            constraints.push(TemporalConstraint::new(id, to, w));
        }
    }

    let mut durations = vec![0; total];
    let mut demands = vec![vec![0; total]; r];
    let mut demand_lines = vec![0; total];
    for expected in 0..total {
        let line = lines.next().ok_or_else(|| ParseError::UnexpectedEof {
            expected: format!("requirement line for activity {expected}"),
        })?;
        let ln = line.number;
        if line.tokens.len() != 3 + r {
            return Err(ParseError::Structure {
                line: ln,
                message: format!(
                    "requirement line needs `id mode duration` and {r} demands, found {} tokens",
                    line.tokens.len()
                ),
            });
        }
        let id = index_token(line.tokens[0], ln, n + 1)?;
        if id != expected {
            return Err(ParseError::Structure {
                line: ln,
                message: format!("expected activity {expected}, found {id}"),
            });
        }
        int_token(line.tokens[1], ln)?;
        durations[id] = int_token(line.tokens[2], ln)?;
        for (res, tok) in line.tokens[3..].iter().enumerate() {
            demands[res][id] = int_token(tok, ln)?;
        }
        demand_lines[id] = ln;
    }

    let cap_line = lines.next().ok_or(ParseError::UnexpectedEof {
        expected: "capacity line".into(),
    })?;
    if cap_line.tokens.len() != r {
        return Err(ParseError::Structure {
            line: cap_line.number,
            message: format!("expected {r} capacities, found {}", cap_line.tokens.len()),
        });
    }
    let capacities = cap_line
        .tokens
        .iter()
        .map(|t| int_token(t, cap_line.number))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = lines.next() {
        return Err(ParseError::Structure {
            line: extra.number,
            message: "trailing content after capacity line".into(),
        });
    }

    for (resource, row) in demands.iter().enumerate() {
        for (activity, &demand) in row.iter().enumerate() {
            if demand > capacities[resource] {
                return Err(ParseError::DemandExceedsCapacity {
                    line: demand_lines[activity],
                    activity,
                    resource,
                    demand,
                    capacity: capacities[resource],
                });
            }
        }
    }

    Ok(ProjectInstance::new(
        name,
        durations,
        demands,
        capacities,
        constraints,
    )?)
}

/// Serializes to the canonical `sch` layout accepted by [`parse_psplib`].
pub fn to_psplib(inst: &ProjectInstance) -> String {
    let n = inst.activity_count();
    let r = inst.resource_count();
    let mut out = String::new();
    let _ = writeln!(out, "{n}\t{r}\t0\t0");
    for j in 0..inst.total_activities() {
        let arcs: Vec<_> = inst.constraints().iter().filter(|c| c.from == j).collect();
        let _ = write!(out, "{j}\t1\t{}", arcs.len());
        for c in &arcs {
            let _ = write!(out, "\t{}", c.to);
        }
        for c in &arcs {
            let _ = write!(out, "\t[{}]", c.weight);
        }
        out.push('\n');
    }
    for j in 0..inst.total_activities() {
        let _ = write!(out, "{j}\t1\t{}", inst.durations()[j]);
        for res in 0..r {
            let _ = write!(out, "\t{}", inst.demand(res, j));
        }
        out.push('\n');
    }
    let caps: Vec<String> = inst.capacities().iter().map(|c| c.to_string()).collect();
    out.push_str(&caps.join("\t"));
    out.push('\n');
    out
}

/// Instance whose real-activity durations are discrete-uniform on
/// `[lower[j], upper[j]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticInstance {
    pub base: ProjectInstance,
    lower: Vec<i64>,
    upper: Vec<i64>,
    pub epsilon: f64,
}

impl StochasticInstance {
    /// Explicit bounds; source and sink are forced to `(0, 0)`.
    pub fn with_bounds(
        base: ProjectInstance,
        mut lower: Vec<i64>,
        mut upper: Vec<i64>,
        epsilon: f64,
    ) -> Self {
        let total = base.total_activities();
        assert_eq!(lower.len(), total, "lower bound vector size");
        assert_eq!(upper.len(), total, "upper bound vector size");
        for j in [0, total - 1] {
            lower[j] = 0;
            upper[j] = 0;
        }
        for j in 0..total {
            assert!(
                0 <= lower[j] && lower[j] <= upper[j],
                "activity {j}: bounds ({}, {}) out of order",
                lower[j],
                upper[j]
            );
        }
        Self {
            base,
            lower,
            upper,
            epsilon,
        }
    }

    /// Stochastic view with no uncertainty at all: `lb = ub = d`.
    pub fn deterministic(base: ProjectInstance) -> Self {
        let d = base.durations().to_vec();
        Self::with_bounds(base, d.clone(), d, 0.0)
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn bounds(&self, activity: usize) -> (i64, i64) {
        (self.lower[activity], self.upper[activity])
    }

    pub fn is_deterministic(&self, activity: usize) -> bool {
        self.lower[activity] == self.upper[activity]
    }

    /// Whether `durations` lies inside the bounds element-wise.
    pub fn admits(&self, durations: &[i64]) -> bool {
        durations.len() == self.lower.len()
            && durations
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(d, (lo, hi))| lo <= d && d <= hi)
    }
}

/// Noisy variant: `lb = max(1, round(d - eps*sqrt(d)))`,
/// `ub = round(d + eps*sqrt(d))`, rounding half away from zero.
///
/// A zero nominal duration would give `ub < lb = 1`; `ub` is lifted to `lb`.
pub fn make_stochastic(inst: &ProjectInstance, epsilon: f64) -> StochasticInstance {
    assert!(epsilon >= 0.0, "noise level must be non-negative");
    let total = inst.total_activities();
    let mut lower = vec![0; total];
    let mut upper = vec![0; total];
    for j in inst.real_activities() {
        let d = inst.durations()[j] as f64;
        let spread = epsilon * d.sqrt();
        let lb = ((d - spread).round() as i64).max(1);
        let ub = ((d + spread).round() as i64).max(lb);
        lower[j] = lb;
        upper[j] = ub;
    }
    StochasticInstance::with_bounds(inst.clone(), lower, upper, epsilon)
}

/// One realized (or estimated) duration per activity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationSample {
    pub durations: Vec<i64>,
    pub seed: u64,
}

impl DurationSample {
    pub fn new(durations: Vec<i64>, seed: u64) -> Self {
        Self { durations, seed }
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent discrete-uniform draw per activity, seeded by `(seed, j)`.
pub fn sample_durations(stoch: &StochasticInstance, seed: u64) -> DurationSample {
    let durations = (0..stoch.base.total_activities())
        .map(|j| {
            let (lo, hi) = stoch.bounds(j);
            if lo == hi {
                lo
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, j as u64));
                rng.gen_range(lo..=hi)
            }
        })
        .collect();
    DurationSample { durations, seed }
}

/// Lower `gamma`-quantile per activity: the smallest `v` in `[lb, ub]` with
/// `(v - lb + 1) / (ub - lb + 1) >= gamma`.
pub fn quantile_durations(stoch: &StochasticInstance, gamma: f64) -> DurationSample {
    assert!((0.0..=1.0).contains(&gamma), "quantile level outside [0, 1]");
    let durations = (0..stoch.base.total_activities())
        .map(|j| {
            let (lo, hi) = stoch.bounds(j);
            let width = (hi - lo + 1) as f64;
            (lo..=hi)
                .find(|v| (v - lo + 1) as f64 >= gamma * width - 1e-9)
                .unwrap_or(hi)
        })
        .collect();
    DurationSample { durations, seed: 0 }
}
