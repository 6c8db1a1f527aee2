use lpiopt_core::optimizer::{
    gd_run, inexact_bound_trace, lpi_gd_run, sgd_run, theory_schedule, RunOptions, Sampling, Schedule, ScheduleMode,
};
use lpiopt_core::problems::{
    erm_objective, ridge_problem, synthetic_holder_problem_with, synthetic_regression_data,
};
use lpiopt_core::{CountingOracle, Kernel, DEFAULT_GRID_CAP};

fn audited() -> RunOptions {
    RunOptions {
        audit: true,
        ..Default::default()
    }
}

#[test]
fn lpi_gd_equals_gd_when_interpolation_is_exact() {
    let pr = ridge_problem(0.1, 2).unwrap();
    let data = synthetic_regression_data(50, 2, 0.1, 21).unwrap();
    let schedule = Schedule::practical(40, 0.1, 2, 30);
    let lpi = lpi_gd_run(&CountingOracle::new(pr.clone()), &data, &schedule, &[0.0], &audited()).unwrap();
    let gd = gd_run(&CountingOracle::new(pr.clone()), &data, 30, &[0.0], &RunOptions::default()).unwrap();
    for (a, b) in lpi.iterates.iter().zip(&gd.iterates) {
        assert_eq!(a.t, b.t);
        assert!((a.f - b.f).abs() <= 1e-8, "t={}: {} vs {}", a.t, a.f, b.f);
    }
    assert!((lpi.final_theta[0] - gd.final_theta[0]).abs() <= 1e-8);
}

#[test]
fn ridge_run_reaches_target_within_the_descent_bound() {
    let pr = ridge_problem(0.1, 2).unwrap();
    let data = synthetic_regression_data(50, 2, 0.1, 3).unwrap();
    let schedule = Schedule::practical(40, 0.1, 2, 60);
    let oracle = CountingOracle::new(pr.clone());
    let opts = RunOptions {
        audit: true,
        target_eps: Some(1e-3),
        ..Default::default()
    };
    let r = lpi_gd_run(&oracle, &data, &schedule, &[0.0], &opts).unwrap();
    assert!(r.converged);
    assert_eq!(r.final_count(), 60 * 1600);
    assert_eq!(oracle.count(), 60 * 1600);
    let tr = inexact_bound_trace(&r, &pr).unwrap();
    assert!(tr.all_hold(), "violation at {:?}", tr.first_violation);
}

#[test]
fn inexact_descent_bound_on_a_holder_problem() {
    for (eta, l) in [(2.0, 1u32), (3.0, 2)] {
        let pr = synthetic_holder_problem_with(eta, 2, 3, 4.0, 0.5, 2.0).unwrap();
        let data = synthetic_regression_data(80, 2, 0.1, 17).unwrap();
        let schedule = Schedule::practical(30, 0.1, l, 40);
        let r = lpi_gd_run(&CountingOracle::new(pr.clone()), &data, &schedule, &[1.0, -1.0, 0.5], &audited()).unwrap();
        let tr = inexact_bound_trace(&r, &pr).unwrap();
        assert!(tr.all_hold(), "eta={eta}: {:?}", tr.first_violation);
        // interpolation is not exact here, so the error terms are live
        assert!(r.iterates[1].grad_err.unwrap() > 1e-10);
        for w in r.iterates.windows(2) {
            let e = w[1].coord_err.unwrap();
            assert!(w[1].f <= w[0].f + 3.0 * e * e / (2.0 * pr.l1()) + 1e-12);
        }
    }
}

#[test]
fn oracle_accounting_is_exact() {
    let pr = ridge_problem(0.5, 3).unwrap();
    let data = synthetic_regression_data(37, 3, 0.1, 8).unwrap();
    let o = CountingOracle::new(pr.clone());
    let r = lpi_gd_run(&o, &data, &Schedule::practical(12, 0.1, 1, 4), &[0.0, 0.0], &RunOptions::default()).unwrap();
    for it in &r.iterates {
        assert_eq!(it.oracle_count, it.t as u64 * 12u64.pow(3));
    }
    let r = gd_run(&o, &data, 7, &[0.0, 0.0], &RunOptions::default()).unwrap();
    assert_eq!(r.final_count(), 7 * 37);
    let r = sgd_run(&o, &data, 11, &[0.0, 0.0], 1, Sampling::WithoutReplacement, &RunOptions::default()).unwrap();
    assert_eq!(r.final_count(), 11);
    assert_eq!(o.count(), 4 * 1728 + 7 * 37 + 11);
}

#[test]
fn runs_are_deterministic() {
    let pr = ridge_problem(0.1, 2).unwrap();
    let data = synthetic_regression_data(40, 2, 0.1, 2).unwrap();
    let s = Schedule::practical(20, 0.1, 2, 10);
    let run = || {
        let o = CountingOracle::new(pr.clone());
        (
            lpi_gd_run(&o, &data, &s, &[0.3], &audited()).unwrap().to_json().unwrap(),
            gd_run(&o, &data, 10, &[0.3], &audited()).unwrap().to_csv(),
            sgd_run(&o, &data, 500, &[0.3], 99, Sampling::WithReplacement, &RunOptions::default())
                .unwrap()
                .to_json()
                .unwrap(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn sgd_improves_with_more_iterations() {
    let pr = ridge_problem(0.1, 2).unwrap();
    let data = synthetic_regression_data(200, 2, 0.1, 4).unwrap();
    let fs = pr.f_star(&data).unwrap();
    let mut early = Vec::new();
    let mut late = Vec::new();
    for seed in 0..20 {
        let opts = RunOptions {
            record_every: 2000,
            ..Default::default()
        };
        let r = sgd_run(&CountingOracle::new(pr.clone()), &data, 20_000, &[0.0], seed, Sampling::WithReplacement, &opts).unwrap();
        let at = |t: usize| r.iterates.iter().find(|i| i.t == t).unwrap().f - fs;
        early.push(at(2000));
        late.push(at(20_000));
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[9] + v[10]) / 2.0
    };
    assert!(median(&mut late) < median(&mut early));
}

#[test]
fn theory_schedule_instance() {
    let pr = synthetic_holder_problem_with(3.0, 1, 2, 1.0, 1.0, 2.0).unwrap();
    let data = synthetic_regression_data(10, 2, 0.1, 1).unwrap();
    let data = lpiopt_core::Dataset::new(data.iter().map(|r| vec![r[0]]).collect(), 0.1).unwrap();
    let theta0 = [0.5, -0.5];
    let f0 = erm_objective(&pr, &data, &theta0).unwrap();
    let pr = pr.with_f_star_hint(f0 - 1.0);
    let s = theory_schedule(&pr, &data, &theta0, 0.1, &Kernel::boxcar(), DEFAULT_GRID_CAP).unwrap();
    assert_eq!(s.mode, ScheduleMode::Theory);
    assert_eq!(s.t, 5);
    assert!((s.delta - 0.5f64.powf(2.5)).abs() < 1e-15);
    assert!(!s.feasible);
    let o = CountingOracle::new(pr.clone());
    assert!(lpi_gd_run(&o, &data, &s, &theta0, &RunOptions::default()).is_err());
    assert_eq!(o.count(), 0);
}
