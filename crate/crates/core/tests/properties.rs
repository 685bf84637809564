#[path = "common/properties.rs"]
mod suites;

const CASES: u32 = 200;

#[test]
fn shrinking_durations_keeps_feasibility() {
    suites::shrinking_durations_keeps_feasibility(CASES).unwrap();
}

#[test]
fn chained_schedules_are_resource_safe() {
    suites::chained_schedules_are_resource_safe(CASES).unwrap();
}

#[test]
fn controllable_networks_execute_feasibly() {
    suites::controllable_networks_execute_feasibly(CASES).unwrap();
}

#[test]
fn solver_matches_brute_force() {
    suites::solver_matches_brute_force(CASES).unwrap();
}

#[test]
fn extra_scenarios_never_help_the_original_ones() {
    suites::extra_scenarios_never_help_the_original_ones(CASES).unwrap();
}

#[test]
fn tests_are_antisymmetric() {
    suites::tests_are_antisymmetric(CASES).unwrap();
}

#[test]
fn decisions_are_scale_invariant() {
    suites::decisions_are_scale_invariant(CASES).unwrap();
}
