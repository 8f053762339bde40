//! Random linear automata: analytic runs satisfy the translated constraints, planner plans replay on
//! the automaton, and the planner agrees with a duration-grid search.

mod common;

use common::linear::Case;

const CASES: u64 = 200;

#[test]
fn analytic_runs_satisfy_the_translated_constraints() {
    let (base, mut runs) = (common::seed(), 0);
    for seed in (0..CASES).map(|k| base.wrapping_add(k)) {
        runs += Case::new(seed).check_run(seed).unwrap() as u64;
    }
    assert!(runs >= CASES / 3, "only {runs} automata admit a run");
}

#[test]
fn planner_plans_replay_on_the_automaton_and_match_the_grid_search() {
    let (base, mut found, mut off_grid) = (common::seed(), 0, 0);
    for seed in (0..CASES).map(|k| base.wrapping_add(k)) {
        let (f, grid) = Case::new(seed).check_planner(seed).unwrap();
        found += f as u64;
        off_grid += (f && !grid) as u64;
    }
    assert!(found >= CASES / 5, "only {found} feasible queries");
    assert!(off_grid <= found / 2, "{off_grid} of {found} plans off grid");
}
