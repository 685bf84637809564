//! Scheduling workbench for resource-constrained projects with minimal and
//! maximal time lags under uncertain (discrete-uniform) activity durations.
//!
//! The crate is organised bottom-up:
//!
//! - [`instance`]: PSPLIB `sch` parsing, noisy stochastic variants, duration
//!   sampling and quantiles.
//! - [`stn`]: difference-constraint propagation (Bellman-Ford, all-pairs).
//! - [`solver`]: feasibility checking and a conflict-branching
//!   branch-and-bound for the deterministic problem (single or multi-scenario).
//! - [`chaining`]: partial order schedules built from resource chains.
//! - [`stnu`]: STNU construction, dynamic controllability checking with wait
//!   edges, and earliest-first real-time execution.
//! - [`methods`]: the four scheduling strategies run against one duration
//!   realization.
//! - [`generate`]: seeded random instances with a feasible reference schedule.
//! - [`stats`]: paired Wilcoxon/proportion/magnitude tests and partial
//!   orderings over method runs.

pub mod chaining;
pub mod generate;
pub mod instance;
pub mod methods;
pub mod solver;
pub mod stats;
pub mod stn;
pub mod stnu;

pub use chaining::{chain, pos_respects_schedule, PartialOrderSchedule};
pub use instance::{
    make_stochastic, parse_psplib, quantile_durations, sample_durations, to_psplib,
    DurationSample, ParseError, ProjectInstance, StochasticInstance, TemporalConstraint,
};
pub use methods::{FailureReason, Method, MethodConfig, MethodRun, OfflinePlan};
pub use solver::{
    check_schedule, critical_path_bound, solve, FeasibilityReport, Schedule, SolveOptions,
    SolveOutcome, SolveStatus,
};
pub use stn::{DistanceGraph, Propagation};
pub use stnu::{build_stnu, dc_check, rte_execute, DcResult, Estnu, ExecutionTrace, Stnu};
