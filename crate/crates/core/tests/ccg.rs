mod common;

use std::collections::HashSet;

use gridseg::adversary::{replay_attack, solve_worst_case_attack, AttackInstance};
use gridseg::ccg::{build_master, run_ccg, AttackColumn, CcgLimits, DefenseStatus};
use gridseg::fleet::{minimal_segmentation, validate_segmentation};
use gridseg::milp::{solve, SolveStatus};
use gridseg::{Error, SolverOptions};

use common::{feeder, feeder_params};

#[test]
fn master_without_columns_keeps_one_segment_per_operator() {
    let inst = feeder(1);
    let master = build_master(&inst, &[], 0, &feeder_params(1)).unwrap();
    let res = solve(&master.spec, &SolverOptions::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert_eq!(res.objective_value.round() as usize, inst.fleet.operators().len());
}

#[test]
fn master_splits_against_a_column_that_overloads_the_minimal_segmentation() {
    let inst = feeder(1);
    let params = feeder_params(1);
    let opts = SolverOptions::default();
    let minimal = minimal_segmentation(&inst.fleet);
    let sp = solve_worst_case_attack(&inst, &minimal, &params, &opts).unwrap();
    assert_eq!(sp.overload_count, 1);
    let column = AttackColumn::from_outcome(&inst, &minimal, &sp, 1);
    // the normalized column reproduces the attack under its own segmentation
    assert!((column.rate_pos[0][0] - 20.0).abs() < 1e-6);
    assert!((column.rate_pos[0][1] - 20.0).abs() < 1e-6);

    let master = build_master(&inst, &[column], 0, &params).unwrap();
    let res = solve(&master.spec, &opts).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert_eq!(res.objective_value.round() as usize, 2);
}

#[test]
fn malformed_columns_are_rejected() {
    let inst = feeder(1);
    let params = feeder_params(1);
    let minimal = minimal_segmentation(&inst.fleet);
    let mut outcome = replay_attack(&inst, &AttackInstance::none(&inst, &minimal), &params).unwrap();
    outcome.attack.hacked[0][0] = true;
    outcome.attack.l_pos[0][0] = 21.0;
    let column = AttackColumn::from_outcome(&inst, &minimal, &outcome, 1);
    assert!(matches!(
        build_master(&inst, &[column], 0, &params),
        Err(Error::MalformedColumn(_))
    ));

    let mut over_budget = outcome.clone();
    over_budget.attack.l_pos[0][0] = 0.0;
    over_budget.attack.hacked[0][1] = true;
    let column = AttackColumn::from_outcome(&inst, &minimal, &over_budget, 1);
    assert!(matches!(
        build_master(&inst, &[column], 0, &params),
        Err(Error::MalformedColumn(_))
    ));
}

#[test]
fn ccg_on_the_feeder_splits_the_operator() {
    let inst = feeder(1);
    let params = feeder_params(1);
    let res = run_ccg(&inst, 0, &params, &CcgLimits::default(), &SolverOptions::default()).unwrap();
    assert_eq!(res.status, DefenseStatus::Optimal);
    assert_eq!(res.segments_used, 2);
    assert!(validate_segmentation(&inst.fleet, &res.segmentation).is_empty());
    assert_eq!(res.iterations.len(), 2);
    assert!(res.upper_bound <= res.lower_bound && res.lower_bound == 0);
    assert_eq!(res.worst_case.as_ref().unwrap().overload_count, 0);
    let keys: HashSet<_> = res.columns.iter().map(|c| c.hacked.clone()).collect();
    assert_eq!(keys.len(), res.columns.len());
}

#[test]
fn ccg_reports_infeasible_when_the_finest_segmentation_is_unsafe() {
    // with budget 2 both halves can still be hacked in any segmentation
    let inst = feeder(1);
    let res = run_ccg(
        &inst,
        0,
        &feeder_params(2),
        &CcgLimits::default(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(res.status, DefenseStatus::Infeasible);
    assert_eq!(res.lower_bound, 1);
    assert!(res.iterations.is_empty());
}

#[test]
fn ccg_keeps_the_minimal_segmentation_when_already_safe() {
    let inst = feeder(1);
    let res = run_ccg(
        &inst,
        1,
        &feeder_params(1),
        &CcgLimits::default(),
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(res.status, DefenseStatus::Optimal);
    assert_eq!(res.segmentation, minimal_segmentation(&inst.fleet));
    assert!(res.columns.is_empty());
}

#[test]
fn ccg_rejects_zero_epsilon() {
    let inst = feeder(1);
    let mut params = feeder_params(1);
    params.epsilon = 0.0;
    assert!(run_ccg(&inst, 0, &params, &CcgLimits::default(), &SolverOptions::default()).is_err());
}

#[test]
fn iteration_limit_returns_incumbent_and_bounds() {
    let inst = feeder(1);
    let limits = CcgLimits {
        max_iterations: 1,
        ..CcgLimits::default()
    };
    let res = run_ccg(&inst, 0, &feeder_params(1), &limits, &SolverOptions::default()).unwrap();
    assert_eq!(res.status, DefenseStatus::IterationLimit);
    assert_eq!(res.upper_bound, 1);
    assert_eq!(res.segments_used, 2);
}
