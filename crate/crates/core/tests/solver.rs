use std::f64::consts::PI;

use hamloop::error::Error;
use hamloop::loops::e_norm;
use hamloop::models::{quadratic_model, soft_power_model};
use hamloop::solver::{
    estimate_alpha0, find_critical_point, minimal_period, ode_defect, subharmonic_family, SolutionRecord, SolverOptions,
};

fn circle_error(rec: &SolutionRecord) -> f64 {
    // Energy outside modes +-1; the circle has none.
    let c1 = rec.orbit.coeff(1);
    let cm1 = rec.orbit.coeff(-1);
    let rest: f64 = rec.orbit.as_vector().norm_squared() - c1.iter().chain(cm1).map(|x| x * x).sum::<f64>();
    rest.max(0.0).sqrt()
}

#[test]
fn finer_truncation_keeps_the_ode_defect_small() {
    let sp = soft_power_model(1, 1.75).unwrap();
    let opts = SolverOptions { m: 64, ..SolverOptions::default() };
    let rec = find_critical_point(&sp, 6.0 / (2.0 * PI), 1, &opts).unwrap();
    let defect = ode_defect(&sp, &rec.orbit, rec.alpha * rec.k as f64).unwrap();
    assert!(defect <= 1e-5, "defect {defect}");
    assert!(circle_error(&rec) < 1e-8 * e_norm(&rec.orbit));
}

#[test]
fn family_members_are_pairwise_compared() {
    let sp = soft_power_model(1, 1.75).unwrap();
    let report = subharmonic_family(&sp, 6.0 / (2.0 * PI), 3, &SolverOptions::default()).unwrap();
    assert_eq!(report.members.len(), 3);
    for (a, row) in report.matrix.iter().enumerate() {
        assert_eq!(row.len(), 3);
        assert!(row[a].is_none());
    }
    for member in &report.members {
        let rec = member.record.as_ref().expect("soft power orbits exist for every k at T = 6");
        assert_eq!(rec.k, member.k);
        let min = minimal_period(rec, 1e-6).unwrap();
        assert!(min <= rec.period * rec.k as f64 + 1e-9);
    }
    assert!(report.findings.is_empty(), "{:?}", report.findings);
}

#[test]
fn quadratic_hamiltonian_has_no_nontrivial_orbit() {
    let q = quadratic_model(1, 0.5).unwrap();
    let opts = SolverOptions { m: 8, thetas: vec![2.0, 4.0], random_directions: 1, constant_seeds: 1, ..SolverOptions::default() };
    match find_critical_point(&q, 1.0, 1, &opts) {
        Err(Error::NotFound { attempts }) => assert!(attempts > 0),
        other => panic!("expected NotFound, got {other:?}"),
    }
}

#[test]
fn alpha0_bracket_is_ordered() {
    let sp = soft_power_model(1, 1.75).unwrap();
    let opts = SolverOptions { m: 8, thetas: vec![2.0, 4.0, 8.0], random_directions: 1, constant_seeds: 1, ..SolverOptions::default() };
    let est = estimate_alpha0(&sp, 0.05, 2.0, 3, &opts).unwrap();
    assert!(est.bracket.0 <= est.bracket.1);
    assert!(!est.evaluations.is_empty());
    if let Some(a) = est.alpha0 {
        assert!((0.05..=2.0).contains(&a));
    }
}
