//! Seeded random RCPSP/max instances.
//!
//! Minimal lags follow a random precedence DAG; maximal lags are cut from a
//! serial-SGS reference schedule so the nominal instance is always feasible.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{ProjectInstance, TemporalConstraint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub activities: usize,
    pub resources: usize,
    pub max_duration: i64,
    pub min_capacity: i64,
    pub max_capacity: i64,
    /// Chance that a resource is used by an activity.
    pub demand_density: f64,
    /// Chance of a precedence arc between two activities.
    pub arc_probability: f64,
    /// Number of maximal lags added on top of the DAG.
    pub max_lags: usize,
    pub max_lag_slack: i64,
}

impl GeneratorParams {
    /// Ten activities, five resources, durations 1..=10.
    pub fn j10() -> Self {
        Self {
            activities: 10,
            resources: 5,
            max_duration: 10,
            min_capacity: 4,
            max_capacity: 10,
            demand_density: 0.6,
            arc_probability: 0.25,
            max_lags: 4,
            max_lag_slack: 10,
        }
    }

    /// Up to five short activities on one or two tight resources.
    pub fn tiny(activities: usize) -> Self {
        Self {
            activities,
            resources: 2,
            max_duration: 4,
            min_capacity: 2,
            max_capacity: 3,
            demand_density: 0.7,
            arc_probability: 0.3,
            max_lags: 2,
            max_lag_slack: 2,
        }
    }
}

pub fn random_instance(name: &str, params: &GeneratorParams, seed: u64) -> ProjectInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.activities;
    let total = n + 2;
    let sink = n + 1;

    let mut durations = vec![0i64; total];
    for d in &mut durations[1..=n] {
        *d = rng.gen_range(1..=params.max_duration);
    }
    let capacities: Vec<i64> = (0..params.resources)
        .map(|_| rng.gen_range(params.min_capacity..=params.max_capacity))
        .collect();
    let mut demands = vec![vec![0i64; total]; params.resources];
    for (r, row) in demands.iter_mut().enumerate() {
        for d in &mut row[1..=n] {
            if rng.gen_bool(params.demand_density) {
                *d = rng.gen_range(1..=capacities[r]);
            }
        }
    }

    let mut constraints = Vec::new();
    let mut has_pred = vec![false; total];
    let mut has_succ = vec![false; total];
    for j in 2..=n {
        for i in 1..j {
            if rng.gen_bool(params.arc_probability) {
                let w = rng.gen_range(0..=durations[i] + 2);
                constraints.push(TemporalConstraint::new(i, j, w));
                has_pred[j] = true;
                has_succ[i] = true;
            }
        }
    }
    for j in 1..=n {
        if !has_pred[j] {
            constraints.push(TemporalConstraint::new(0, j, 0));
        }
        if !has_succ[j] {
            constraints.push(TemporalConstraint::new(j, sink, durations[j]));
        }
    }
    if n == 0 {
        constraints.push(TemporalConstraint::new(0, sink, 0));
    }

    let reference = serial_schedule(n, &durations, &demands, &capacities, &constraints);
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && reference[j] >= reference[i])
        .collect();
    pairs.shuffle(&mut rng);
    for &(i, j) in pairs.iter().take(params.max_lags) {
        let gap = reference[j] - reference[i] + rng.gen_range(0..=params.max_lag_slack);
        constraints.push(TemporalConstraint::new(j, i, -gap));
    }

    ProjectInstance::new(name, durations, demands, capacities, constraints)
        .expect("generated instance is well formed")
}

/// Serial schedule generation on the DAG arcs (non-negative weights only):
/// activities in index order, each at the earliest precedence- and
/// resource-feasible time.
fn serial_schedule(
    n: usize,
    durations: &[i64],
    demands: &[Vec<i64>],
    capacities: &[i64],
    constraints: &[TemporalConstraint],
) -> Vec<i64> {
    let total = n + 2;
    let mut starts = vec![0i64; total];
    let horizon: i64 = durations.iter().sum::<i64>()
        + constraints.iter().map(|c| c.weight.max(0)).sum::<i64>()
        + 1;
    let mut usage = vec![vec![0i64; horizon as usize + 1]; capacities.len()];
    for j in 1..total {
        let mut t = constraints
            .iter()
            .filter(|c| c.to == j && c.weight >= 0 && c.from < j)
            .map(|c| starts[c.from] + c.weight)
            .max()
            .unwrap_or(0);
        if j <= n {
            let fits = |t: i64, usage: &Vec<Vec<i64>>| {
                (0..capacities.len()).all(|r| {
                    (t..t + durations[j]).all(|u| usage[r][u as usize] + demands[r][j] <= capacities[r])
                })
            };
            while !fits(t, &usage) {
                t += 1;
            }
            for (r, row) in usage.iter_mut().enumerate() {
                for u in t..t + durations[j] {
                    row[u as usize] += demands[r][j];
                }
            }
        }
        starts[j] = t;
    }
    starts
}
