//! The four scheduling strategies, each run offline and then executed
//! against one realized duration vector.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chaining::chain;
use crate::instance::{quantile_durations, DurationSample, StochasticInstance};
use crate::solver::{check_schedule, solve, solve_scenarios, Schedule, SolveOptions, SolveStatus};
use crate::stnu::{build_stnu, dc_check, rte_execute, DcResult, Estnu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ProactiveSaa,
    ProactiveQ,
    Reactive,
    Stnu,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ProactiveSaa, Method::ProactiveQ, Method::Reactive, Method::Stnu];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::ProactiveSaa => "proactive_saa",
            Method::ProactiveQ => "proactive_q",
            Method::Reactive => "reactive",
            Method::Stnu => "stnu",
        }
    }

    /// Offline phase followed by execution against `sample`.
    pub fn run(self, stoch: &StochasticInstance, cfg: &MethodConfig, sample: &DurationSample) -> MethodRun {
        self.plan(stoch, cfg).execute(stoch, cfg, sample)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownToken {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for Method {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UnknownToken {
                kind: "method",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    SolverInfeasible,
    SolverTimeout,
    NotDc,
    ExecutionViolation,
}

impl FailureReason {
    pub const ALL: [FailureReason; 4] = [
        FailureReason::SolverInfeasible,
        FailureReason::SolverTimeout,
        FailureReason::NotDc,
        FailureReason::ExecutionViolation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::SolverInfeasible => "solver_infeasible",
            FailureReason::SolverTimeout => "solver_timeout",
            FailureReason::NotDc => "not_dc",
            FailureReason::ExecutionViolation => "execution_violation",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FailureReason {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FailureReason::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownToken {
                kind: "failure reason",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfig {
    /// Quantile for `proactive_q`.
    pub gamma: f64,
    pub reactive_gamma: f64,
    pub stnu_gamma: f64,
    pub saa_gammas: Vec<f64>,
    #[serde(with = "secs")]
    pub time_limit_offline: Duration,
    #[serde(with = "secs")]
    pub time_limit_saa: Duration,
    #[serde(with = "secs")]
    pub time_limit_reschedule: Duration,
    pub node_limit: u64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            reactive_gamma: 0.9,
            stnu_gamma: 1.0,
            saa_gammas: vec![0.25, 0.5, 0.75, 0.9],
            time_limit_offline: Duration::from_secs(60),
            time_limit_saa: Duration::from_secs(300),
            time_limit_reschedule: Duration::from_secs(2),
            node_limit: 10_000_000,
        }
    }
}

impl MethodConfig {
    /// Every quantile level inside `[0, 1]` and at least one SAA scenario.
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.gamma, self.reactive_gamma, self.stnu_gamma];
        if let Some(g) = all.iter().chain(&self.saa_gammas).find(|g| !(0.0..=1.0).contains(*g)) {
            return Err(format!("quantile level {g} outside [0, 1]"));
        }
        if self.saa_gammas.is_empty() {
            return Err("saa_gammas must not be empty".into());
        }
        Ok(())
    }

    fn options(&self, limit: Duration) -> SolveOptions {
        SolveOptions {
            time_limit: limit,
            node_limit: self.node_limit,
            ..SolveOptions::default()
        }
    }
}

/// Durations as fractional seconds in JSON.
mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub instance: String,
    pub seed: u64,
    pub feasible: bool,
    pub makespan: Option<i64>,
    pub time_offline: Duration,
    pub time_online: Duration,
    pub failure_reason: Option<FailureReason>,
    /// Executed start times, when execution got that far.
    pub starts: Option<Vec<i64>>,
    /// Re-solves performed online (reactive only).
    pub resolves: usize,
    /// Objective reported by the offline solve.
    pub offline_objective: Option<f64>,
}

impl MethodRun {
    fn new(method: Method, stoch: &StochasticInstance, sample: &DurationSample) -> Self {
        Self {
            method,
            instance: stoch.base.name.clone(),
            seed: sample.seed,
            feasible: false,
            makespan: None,
            time_offline: Duration::ZERO,
            time_online: Duration::ZERO,
            failure_reason: None,
            starts: None,
            resolves: 0,
            offline_objective: None,
        }
    }

    fn fail(mut self, reason: FailureReason) -> Self {
        self.feasible = false;
        self.makespan = None;
        self.failure_reason = Some(reason);
        self
    }

    /// Replays the executed starts under the realized durations.
    fn audited(mut self, stoch: &StochasticInstance, sample: &DurationSample, starts: Vec<i64>) -> Self {
        let sched = Schedule::new(starts);
        let ok = check_schedule(&stoch.base, &sample.durations, &sched).is_ok_and(|r| r.feasible);
        self.makespan = Some(sched.makespan(&sample.durations));
        self.starts = Some(sched.starts);
        if ok {
            self.feasible = true;
            self
        } else {
            self.fail(FailureReason::ExecutionViolation)
        }
    }
}

fn offline_failure(status: SolveStatus) -> FailureReason {
    if status == SolveStatus::Infeasible {
        FailureReason::SolverInfeasible
    } else {
        FailureReason::SolverTimeout
    }
}

/// Outcome of a method's offline phase. It does not depend on the realized
/// durations, so one plan serves every sample of an instance.
#[derive(Debug, Clone)]
pub struct OfflinePlan {
    pub method: Method,
    pub time_offline: Duration,
    pub objective: Option<f64>,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Failed(FailureReason),
    Fixed(Schedule),
    Reactive { schedule: Schedule, estimate: Vec<i64> },
    Dispatchable(Estnu),
}

impl OfflinePlan {
    pub fn failure(&self) -> Option<FailureReason> {
        match self.kind {
            PlanKind::Failed(r) => Some(r),
            _ => None,
        }
    }

    /// Online phase against one realized duration vector.
    pub fn execute(&self, stoch: &StochasticInstance, cfg: &MethodConfig, sample: &DurationSample) -> MethodRun {
        let mut run = MethodRun::new(self.method, stoch, sample);
        run.time_offline = self.time_offline;
        run.offline_objective = self.objective;
        match &self.kind {
            PlanKind::Failed(reason) => run.fail(*reason),
            PlanKind::Fixed(sched) => proactive_online(run, stoch, sample, sched.clone()),
            PlanKind::Reactive { schedule, estimate } => {
                reactive_online(run, stoch, cfg, sample, schedule.clone(), estimate.clone())
            }
            PlanKind::Dispatchable(estnu) => stnu_online(run, stoch, sample, estnu),
        }
    }
}

impl Method {
    pub fn plan(self, stoch: &StochasticInstance, cfg: &MethodConfig) -> OfflinePlan {
        match self {
            Method::ProactiveSaa => plan_proactive_saa(stoch, cfg),
            Method::ProactiveQ => plan_proactive_quantile(stoch, cfg),
            Method::Reactive => plan_reactive(stoch, cfg),
            Method::Stnu => plan_stnu(stoch, cfg),
        }
    }
}

fn solved_plan(
    method: Method,
    started: Instant,
    out: crate::solver::SolveOutcome,
    then: impl FnOnce(Schedule) -> PlanKind,
) -> OfflinePlan {
    let kind = match out.schedule {
        Some(s) => then(s),
        None => PlanKind::Failed(offline_failure(out.status)),
    };
    OfflinePlan {
        method,
        time_offline: started.elapsed(),
        objective: out.objective,
        kind,
    }
}

/// Fixed schedule against the `gamma`-quantile durations.
pub fn plan_proactive_quantile(stoch: &StochasticInstance, cfg: &MethodConfig) -> OfflinePlan {
    let est = quantile_durations(stoch, cfg.gamma).durations;
    let started = Instant::now();
    let out = solve(&stoch.base, &est, &cfg.options(cfg.time_limit_offline));
    solved_plan(Method::ProactiveQ, started, out, PlanKind::Fixed)
}

/// One start vector feasible under every quantile scenario, minimizing the
/// mean scenario makespan.
pub fn plan_proactive_saa(stoch: &StochasticInstance, cfg: &MethodConfig) -> OfflinePlan {
    assert!(!cfg.saa_gammas.is_empty(), "at least one scenario quantile");
    let scenarios: Vec<Vec<i64>> = cfg
        .saa_gammas
        .iter()
        .map(|&g| quantile_durations(stoch, g).durations)
        .collect();
    let started = Instant::now();
    let out = solve_scenarios(&stoch.base, &scenarios, &cfg.options(cfg.time_limit_saa));
    solved_plan(Method::ProactiveSaa, started, out, PlanKind::Fixed)
}

/// Initial plan for `reactive`; only this solve counts as offline time.
pub fn plan_reactive(stoch: &StochasticInstance, cfg: &MethodConfig) -> OfflinePlan {
    let estimate = quantile_durations(stoch, cfg.reactive_gamma).durations;
    let started = Instant::now();
    let out = solve(&stoch.base, &estimate, &cfg.options(cfg.time_limit_offline));
    solved_plan(Method::Reactive, started, out, |schedule| PlanKind::Reactive { schedule, estimate })
}

/// Chains a `stnu_gamma`-quantile schedule into a partial order and checks
/// dynamic controllability.
pub fn plan_stnu(stoch: &StochasticInstance, cfg: &MethodConfig) -> OfflinePlan {
    let est = quantile_durations(stoch, cfg.stnu_gamma).durations;
    let started = Instant::now();
    let out = solve(&stoch.base, &est, &cfg.options(cfg.time_limit_offline));
    solved_plan(Method::Stnu, started, out, |sched| {
        let pos = chain(&stoch.base, &est, &sched);
        let net = build_stnu(&pos, stoch).expect("network built from its own instance");
        match dc_check(&net) {
            DcResult::Controllable(estnu) => PlanKind::Dispatchable(estnu),
            DcResult::NotDc { .. } => PlanKind::Failed(FailureReason::NotDc),
        }
    })
}

pub fn run_proactive_quantile(
    stoch: &StochasticInstance,
    cfg: &MethodConfig,
    sample: &DurationSample,
) -> MethodRun {
    plan_proactive_quantile(stoch, cfg).execute(stoch, cfg, sample)
}

pub fn run_proactive_saa(stoch: &StochasticInstance, cfg: &MethodConfig, sample: &DurationSample) -> MethodRun {
    plan_proactive_saa(stoch, cfg).execute(stoch, cfg, sample)
}

pub fn run_reactive(stoch: &StochasticInstance, cfg: &MethodConfig, sample: &DurationSample) -> MethodRun {
    plan_reactive(stoch, cfg).execute(stoch, cfg, sample)
}

pub fn run_stnu(stoch: &StochasticInstance, cfg: &MethodConfig, sample: &DurationSample) -> MethodRun {
    plan_stnu(stoch, cfg).execute(stoch, cfg, sample)
}

/// The fixed starts only need a feasibility check online.
fn proactive_online(
    mut run: MethodRun,
    stoch: &StochasticInstance,
    sample: &DurationSample,
    sched: Schedule,
) -> MethodRun {
    let started = Instant::now();
    let ok = check_schedule(&stoch.base, &sample.durations, &sched).is_ok_and(|r| r.feasible);
    run.time_online = started.elapsed();
    run.starts = Some(sched.starts.clone());
    if ok {
        run.feasible = true;
        run.makespan = Some(sched.makespan(&sample.durations));
        run
    } else {
        run.fail(FailureReason::ExecutionViolation)
    }
}

/// Executes the current plan and re-solves whenever a finish deviates from
/// its estimate. A running activity that passes its estimated finish counts
/// as a deviation at that moment; its estimate becomes elapsed time + 1.
fn reactive_online(
    mut run: MethodRun,
    stoch: &StochasticInstance,
    cfg: &MethodConfig,
    sample: &DurationSample,
    mut plan: Schedule,
    mut est: Vec<i64>,
) -> MethodRun {
    let inst = &stoch.base;
    let total = inst.total_activities();
    let real = &sample.durations;
    let mut start: Vec<Option<i64>> = vec![None; total];
    let mut finished = vec![false; total];
    let mut online = Duration::ZERO;
    loop {
        let mut next: Option<i64> = None;
        let mut consider = |t: i64| next = Some(next.map_or(t, |n: i64| n.min(t)));
        for j in 0..total {
            match start[j] {
                None => consider(plan.starts[j]),
                Some(s) if !finished[j] => {
                    consider(s + real[j]);
                    if est[j] < real[j] {
                        consider(s + est[j]);
                    }
                }
                Some(_) => {}
            }
        }
        let Some(t) = next else { break };

        let mut deviation = false;
        for j in 0..total {
            let Some(s) = start[j] else { continue };
            if finished[j] {
                continue;
            }
            if s + real[j] == t {
                finished[j] = true;
                deviation |= est[j] != real[j];
                est[j] = real[j];
            } else if s + est[j] == t && real[j] > est[j] {
                deviation = true;
                est[j] = t - s + 1;
            }
        }
        if deviation {
            let fixed: BTreeMap<usize, i64> = (0..total).filter_map(|j| start[j].map(|s| (j, s))).collect();
            let opts = SolveOptions {
                time_limit: cfg.time_limit_reschedule,
                node_limit: cfg.node_limit,
                fixed,
                release: Some(t),
                warm_start: Some(plan.clone()),
            };
            let out = solve(inst, &est, &opts);
            online += out.wall_time;
            run.resolves += 1;
            match out.schedule {
                Some(s) => plan = s,
                None => {
                    run.time_online = online;
                    let reason = if out.status == SolveStatus::Infeasible {
                        FailureReason::ExecutionViolation
                    } else {
                        FailureReason::SolverTimeout
                    };
                    return run.fail(reason);
                }
            }
        }
        for j in 0..total {
            if start[j].is_none() && plan.starts[j] <= t {
                debug_assert_eq!(plan.starts[j], t, "plan starts activity {j} in the past");
                start[j] = Some(t);
            }
        }
    }
    run.time_online = online;
    let starts = start.into_iter().map(|s| s.expect("every activity started")).collect();
    run.audited(stoch, sample, starts)
}

fn stnu_online(mut run: MethodRun, stoch: &StochasticInstance, sample: &DurationSample, estnu: &Estnu) -> MethodRun {
    let started = Instant::now();
    let trace = rte_execute(estnu, sample);
    run.time_online = started.elapsed();
    match trace {
        Ok(trace) if trace.feasible => run.audited(stoch, sample, trace.starts()),
        Ok(trace) => {
            run.starts = Some(trace.starts());
            run.fail(FailureReason::ExecutionViolation)
        }
        Err(e) => {
            log::warn!("{}: execution failed: {e}", stoch.base.name);
            run.fail(FailureReason::ExecutionViolation)
        }
    }
}

/// Whether the realized durations admit any feasible schedule. A solve that
/// runs out of budget keeps the sample (and logs it).
pub fn perfect_information_feasible(
    stoch: &StochasticInstance,
    sample: &DurationSample,
    time_limit: Duration,
) -> bool {
    let out = solve(&stoch.base, &sample.durations, &SolveOptions::with_time_limit(time_limit));
    match out.status {
        SolveStatus::Optimal | SolveStatus::Feasible => true,
        SolveStatus::Infeasible => false,
        SolveStatus::Unknown => {
            log::warn!(
                "{}: perfect-information solve inconclusive for seed {}; keeping the sample",
                stoch.base.name,
                sample.seed
            );
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_psplib, sample_durations, ProjectInstance, TemporalConstraint};
    use crate::stnu::tests::{example_stoch, D};

    fn example() -> ProjectInstance {
        parse_psplib(crate::instance::tests::EXAMPLE_SCH).unwrap()
    }

    fn quick() -> MethodConfig {
        MethodConfig {
            time_limit_offline: Duration::from_secs(10),
            time_limit_saa: Duration::from_secs(10),
            ..MethodConfig::default()
        }
    }

    #[test]
    fn tokens_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        for r in FailureReason::ALL {
            assert_eq!(r.as_str().parse::<FailureReason>().unwrap(), r);
        }
        assert!("proactive".parse::<Method>().is_err());
    }

    #[test]
    fn degenerate_instance_all_methods_agree() {
        let inst = example();
        let stoch = StochasticInstance::deterministic(inst.clone());
        let sample = DurationSample::new(inst.durations().to_vec(), 3);
        let opt = solve(&inst, inst.durations(), &SolveOptions::default());
        let best = opt.schedule.unwrap().makespan(inst.durations());
        for m in Method::ALL {
            let run = m.run(&stoch, &quick(), &sample);
            assert!(run.feasible, "{m}: {run:?}");
            assert_eq!(run.makespan, Some(best), "{m}");
            assert_eq!(run.resolves, 0);
        }
    }

    #[test]
    fn quantile_schedule_survives_shorter_realizations() {
        let stoch = crate::instance::make_stochastic(&example(), 1.0);
        let cfg = MethodConfig { gamma: 1.0, ..quick() };
        for seed in 0..5 {
            let run = run_proactive_quantile(&stoch, &cfg, &sample_durations(&stoch, seed));
            assert!(run.feasible);
        }
    }

    #[test]
    fn saa_single_scenario_matches_quantile() {
        let stoch = crate::instance::make_stochastic(&example(), 1.0);
        let sample = sample_durations(&stoch, 11);
        let q = run_proactive_quantile(&stoch, &MethodConfig { gamma: 1.0, ..quick() }, &sample);
        let saa = run_proactive_saa(&stoch, &MethodConfig { saa_gammas: vec![1.0], ..quick() }, &sample);
        assert_eq!(q.starts, saa.starts);
        assert_eq!(q.offline_objective, saa.offline_objective);
    }

    #[test]
    fn offline_infeasible_is_tagged() {
        let inst = ProjectInstance::new(
            "bad",
            vec![0, 1, 1, 0],
            vec![vec![0, 1, 1, 0]],
            vec![1],
            vec![TemporalConstraint::new(1, 2, 2), TemporalConstraint::new(2, 1, -1)],
        )
        .unwrap();
        let stoch = StochasticInstance::deterministic(inst.clone());
        let sample = DurationSample::new(inst.durations().to_vec(), 0);
        for m in Method::ALL {
            let run = m.run(&stoch, &quick(), &sample);
            assert_eq!(run.failure_reason, Some(FailureReason::SolverInfeasible), "{m}");
        }
        assert!(!perfect_information_feasible(&stoch, &sample, Duration::from_secs(1)));
    }

    /// a (d 2, est 2) then b (d 2) with b >= a + 2 and a slack deadline.
    fn slack_pair() -> StochasticInstance {
        let inst = ProjectInstance::new(
            "slack",
            vec![0, 2, 2, 0],
            vec![vec![0, 1, 1, 0]],
            vec![1],
            vec![
                TemporalConstraint::new(0, 1, 0),
                TemporalConstraint::new(1, 2, 2),
                TemporalConstraint::new(2, 1, -6),
                TemporalConstraint::new(2, 3, 2),
            ],
        )
        .unwrap();
        StochasticInstance::with_bounds(inst, vec![0, 2, 2, 0], vec![0, 3, 2, 0], 0.0)
    }

    #[test]
    fn reactive_absorbs_a_late_finish() {
        // estimate for a is the 0.5-quantile 2; it really takes 3
        let stoch = slack_pair();
        let cfg = MethodConfig { reactive_gamma: 0.5, ..quick() };
        let run = run_reactive(&stoch, &cfg, &DurationSample::new(vec![0, 3, 2, 0], 0));
        assert!(run.feasible, "{run:?}");
        assert!(run.resolves >= 1);
        let starts = run.starts.unwrap();
        assert_eq!(starts[1], 0);
        assert_eq!(starts[2], 3);
        assert_eq!(run.makespan, Some(5));
    }

    #[test]
    fn reactive_reports_violated_deadline() {
        // b must start within 3 of a, but a holds the only unit for 5
        let inst = ProjectInstance::new(
            "tight",
            vec![0, 2, 2, 0],
            vec![vec![0, 1, 1, 0]],
            vec![1],
            vec![
                TemporalConstraint::new(0, 1, 0),
                TemporalConstraint::new(1, 2, 2),
                TemporalConstraint::new(2, 1, -3),
            ],
        )
        .unwrap();
        let stoch = StochasticInstance::with_bounds(inst, vec![0, 2, 2, 0], vec![0, 5, 2, 0], 0.0);
        let cfg = MethodConfig { reactive_gamma: 0.0, ..quick() };
        let run = run_reactive(&stoch, &cfg, &DurationSample::new(vec![0, 5, 2, 0], 0));
        assert_eq!(run.failure_reason, Some(FailureReason::ExecutionViolation));
    }

    #[test]
    fn stnu_example_end_to_end() {
        let stoch = example_stoch();
        let mut d = stoch.base.durations().to_vec();
        d[D] = 1;
        let run = run_stnu(&stoch, &quick(), &DurationSample::new(d.clone(), 0));
        assert!(run.feasible, "{run:?}");
        let starts = run.starts.unwrap();
        assert!(check_schedule(&stoch.base, &d, &Schedule::new(starts)).unwrap().feasible);
    }
}
