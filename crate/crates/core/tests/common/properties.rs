//! Randomized property suites, shared by the test targets.

use std::collections::BTreeMap;
use std::time::Duration;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use srcpsp_core::generate::{random_instance, GeneratorParams};
use srcpsp_core::instance::{make_stochastic, quantile_durations, sample_durations, ProjectInstance};
use srcpsp_core::solver::{check_schedule, solve, solve_scenarios, Schedule, SolveOptions, SolveStatus};
use srcpsp_core::stats::{magnitude_test, proportion_test, wilcoxon_pratt, PairedSeries, Side, TestExtras};
use srcpsp_core::stnu::{build_stnu, dc_check, rte_execute, DcResult};
use srcpsp_core::{chain, pos_respects_schedule};

fn tiny(n: usize, seed: u64) -> ProjectInstance {
    random_instance(&format!("tiny{n}_{seed}"), &GeneratorParams::tiny(n), seed)
}

fn opts() -> SolveOptions {
    SolveOptions::with_time_limit(Duration::from_secs(20))
}

/// Minimum makespan by exhaustive search over integer start vectors.
/// Starts range over `[0, H]` with `H` the sum of durations and positive
/// lags, which bounds the starts of some optimal schedule.
fn brute_force_optimum(inst: &ProjectInstance, d: &[i64]) -> Option<i64> {
    let n = inst.activity_count();
    let horizon: i64 =
        d.iter().sum::<i64>() + inst.constraints().iter().map(|c| c.weight.max(0)).sum::<i64>();
    let mut starts = vec![0i64; n + 2];
    let mut best = None;
    search(inst, d, horizon, 1, &mut starts, &mut best);
    best
}

fn search(
    inst: &ProjectInstance,
    d: &[i64],
    horizon: i64,
    j: usize,
    starts: &mut Vec<i64>,
    best: &mut Option<i64>,
) {
    let n = inst.activity_count();
    let partial = (1..j).map(|i| starts[i] + d[i]).max().unwrap_or(0);
    if best.is_some_and(|b| partial >= b) {
        return;
    }
    if j == n + 1 {
        let sink = n + 1;
        starts[sink] = inst
            .constraints()
            .iter()
            .filter(|c| c.to == sink)
            .map(|c| starts[c.from] + c.weight)
            .max()
            .unwrap_or(0)
            .max(0);
        if check_schedule(inst, d, &Schedule::new(starts.clone()))
            .unwrap()
            .feasible
        {
            *best = Some(partial);
        }
        return;
    }
    for s in 0..=horizon {
        starts[j] = s;
        let lags_ok = inst
            .constraints()
            .iter()
            .filter(|c| c.from <= j && c.to <= j)
            .all(|c| starts[c.to] - starts[c.from] >= c.weight);
        if !lags_ok {
            continue;
        }
        let fits = (0..inst.resource_count()).all(|r| {
            (s..s + d[j]).all(|t| {
                let usage: i64 = (1..=j)
                    .filter(|&i| starts[i] <= t && t < starts[i] + d[i])
                    .map(|i| inst.demand(r, i))
                    .sum();
                usage <= inst.capacities()[r]
            })
        });
        if fits {
            search(inst, d, horizon, j + 1, starts, best);
        }
    }
}

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![9 => (0u32..20).prop_map(f64::from), 1 => Just(f64::INFINITY)]
}

fn flip(side: Option<Side>) -> Option<Side> {
    side.map(|s| match s {
        Side::A => Side::B,
        Side::B => Side::A,
    })
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

/// A schedule feasible for some durations stays feasible when they shrink.
pub fn shrinking_durations_keeps_feasibility(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(1usize..=5, any::<u64>(), any::<u64>()),
            |(n, seed, shrink_seed)| {
                let inst = tiny(n, seed);
                let out = solve(&inst, inst.durations(), &opts());
                let Some(sched) = out.schedule else { return Ok(()) };
                // five shrinks per schedule
                let mut rng = shrink_seed;
                for _ in 0..5 {
                    let shorter: Vec<i64> = inst
                        .durations()
                        .iter()
                        .map(|&d| {
                            rng = srcpsp_core::instance::mix_seed(rng, 1);
                            if d == 0 {
                                0
                            } else {
                                1 + (rng % d as u64) as i64
                            }
                        })
                        .collect();
                    prop_assert!(check_schedule(&inst, &shorter, &sched).unwrap().feasible);
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// Any schedule of the chained network is resource-feasible.
pub fn chained_schedules_are_resource_safe(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(1usize..=5, any::<u64>(), 0usize..3), |(n, seed, eps)| {
            let inst = tiny(n, seed);
            let stoch = make_stochastic(&inst, [0.5, 1.0, 2.0][eps]);
            let est = quantile_durations(&stoch, 1.0).durations;
            let Some(sched) = solve(&inst, &est, &opts()).schedule else {
                return Ok(());
            };
            let pos = chain(&inst, &est, &sched);
            prop_assert!(pos_respects_schedule(&pos, &sched, &est));
            for k in 0..5 {
                let d = sample_durations(&stoch, seed ^ k).durations;
                let Some(starts) = pos.temporal_graph(&d).earliest_schedule(&BTreeMap::new()) else {
                    continue;
                };
                let report = check_schedule(&inst, &d, &Schedule::new(starts)).unwrap();
                prop_assert!(report.resource_violations.is_empty(), "{:?}", report);
            }

            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Execution of a controllable project network never breaks a constraint.
pub fn controllable_networks_execute_feasibly(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(1usize..=5, any::<u64>(), 0usize..3), |(n, seed, eps)| {
            let inst = tiny(n, seed);
            let stoch = make_stochastic(&inst, [0.5, 1.0, 2.0][eps]);
            let est = quantile_durations(&stoch, 1.0).durations;
            let Some(sched) = solve(&inst, &est, &opts()).schedule else {
                return Ok(());
            };
            let net = build_stnu(&chain(&inst, &est, &sched), &stoch).unwrap();
            let DcResult::Controllable(estnu) = dc_check(&net) else {
                return Ok(());
            };
            for k in 0..5 {
                let sample = sample_durations(&stoch, seed.wrapping_add(k));
                let trace = rte_execute(&estnu, &sample).unwrap();
                prop_assert!(trace.feasible);
                let report =
                    check_schedule(&inst, &sample.durations, &Schedule::new(trace.starts())).unwrap();
                prop_assert!(report.feasible, "{:?}", report);
            }

            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Branch and bound matches exhaustive search on small instances.
pub fn solver_matches_brute_force(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(1usize..=5, any::<u64>(), any::<bool>()),
            |(n, seed, sampled)| {
                let inst = tiny(n, seed);
                // sampled durations may break the maximal lags
                let d = &if sampled {
                    sample_durations(&make_stochastic(&inst, 1.0), seed).durations
                } else {
                    inst.durations().to_vec()
                };
                let out = solve(&inst, d, &opts());
                let oracle = brute_force_optimum(&inst, d);
                match out.status {
                    SolveStatus::Optimal => {
                        let s = out.schedule.unwrap();
                        prop_assert!(check_schedule(&inst, d, &s).unwrap().feasible);
                        prop_assert_eq!(Some(s.makespan(d)), oracle);
                    }
                    SolveStatus::Infeasible => prop_assert_eq!(oracle, None),
                    other => prop_assert!(false, "budget exhausted: {:?}", other),
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}

/// Extra scenarios only shrink the feasible set, so the optimum under the
/// original scenarios cannot improve.
pub fn extra_scenarios_never_help_the_original_ones(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(1usize..=4, any::<u64>()), |(n, seed)| {
            let inst = tiny(n, seed);
            let stoch = make_stochastic(&inst, 1.0);
            let base = vec![quantile_durations(&stoch, 0.5).durations];
            let mut more = base.clone();
            more.push(quantile_durations(&stoch, 1.0).durations);
            let a = solve_scenarios(&inst, &base, &opts());
            let b = solve_scenarios(&inst, &more, &opts());
            if let (Some(sa), Some(sb)) = (a.schedule, b.schedule) {
                prop_assert!(sb.makespan(&base[0]) >= sa.makespan(&base[0]));
            }
            if a.status == SolveStatus::Infeasible {
                prop_assert_eq!(b.status, SolveStatus::Infeasible);
            }

            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Swapping the two sides mirrors every test.
pub fn tests_are_antisymmetric(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(prop::collection::vec((value(), value()), 1..40),), |(pairs,)| {
            let s = PairedSeries::new(pairs).unwrap();
            let t = s.swapped();
            if let (Ok(a), Ok(b)) = (wilcoxon_pratt(&s, 0.05), wilcoxon_pratt(&t, 0.05)) {
                prop_assert!((a.statistic + b.statistic).abs() < 1e-9);
                prop_assert_eq!(a.significant, b.significant);
                prop_assert_eq!(a.winner, flip(b.winner));
            }
            if let (Ok(a), Ok(b)) = (proportion_test(&s, 0.05), proportion_test(&t, 0.05)) {
                let (
                    TestExtras::Proportion { proportion_a: pa, .. },
                    TestExtras::Proportion { proportion_a: pb, .. },
                ) = (&a.extras, &b.extras)
                else {
                    unreachable!()
                };
                prop_assert!((pa + pb - 1.0).abs() < 1e-12);
                prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
                prop_assert_eq!(a.winner, flip(b.winner));
            }
            let (dh, dh_swapped) = (s.double_hits(), t.double_hits());
            if let (Ok(a), Ok(b)) = (magnitude_test(&dh, 0.05), magnitude_test(&dh_swapped, 0.05)) {
                prop_assert!((a.statistic + b.statistic).abs() < 1e-9);
            }

            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Rescaling all values changes no decision.
pub fn decisions_are_scale_invariant(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(
            &(prop::collection::vec((value(), value()), 1..40), 0usize..3),
            |(pairs, k)| {
                let s = PairedSeries::new(pairs).unwrap();
                let c = s.scaled([0.5, 2.0, 8.0][k]);
                match (wilcoxon_pratt(&s, 0.05), wilcoxon_pratt(&c, 0.05)) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.significant, b.significant);
                        prop_assert_eq!(a.winner, b.winner);
                    }
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
                match (proportion_test(&s, 0.05), proportion_test(&c, 0.05)) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.significant, b.significant);
                        prop_assert_eq!(a.winner, b.winner);
                    }
                    (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
                }
                if let (Ok(a), Ok(b)) = (
                    magnitude_test(&s.double_hits(), 0.05),
                    magnitude_test(&c.double_hits(), 0.05),
                ) {
                    prop_assert!((a.statistic - b.statistic).abs() < 1e-9 * a.statistic.abs().max(1.0));
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())
}
