use std::f64::consts::FRAC_PI_2;

use lagrograph::fields::{Grid2D, ScalarField, SymMatField};
use lagrograph::geometry::induced_metric;
use lagrograph::mat2::SymMat2;
use lagrograph::registry::suites::{
    hs_perturbed_study, hs_study_config, max_principle_sweep, sl_manufactured_study, sl_quadratic_cases,
};
use lagrograph::solvers::{hs_residual, solve_hamiltonian_stationary, solve_phase_laplacian, Domain, SolverConfig};

#[test]
fn manufactured_special_lagrangian_is_second_order() {
    let study = sl_manufactured_study(&[33, 65, 129], &SolverConfig::default()).unwrap();
    assert!((study.slope - 2.0).abs() <= 0.3, "{study:?}");
    assert!(study.errors.windows(2).all(|e| e[1] < e[0]));
}

#[test]
fn quadratics_are_exact_within_five_newton_steps() {
    let cases = sl_quadratic_cases(65, &SolverConfig::default()).unwrap();
    assert!(cases.iter().all(|c| c.passed()), "{cases:?}");
}

#[test]
fn phase_equation_reproduces_harmonic_data_for_constant_metric() {
    let grid = Grid2D::unit_disk(65).unwrap();
    let data = ScalarField::from_fn(grid, |x| 0.3 + x[0] - 2.0 * x[1] + x[0] * x[1]);
    let cfg = SolverConfig {
        linear_tol: 1e-14,
        ..SolverConfig::default()
    };
    let (theta, _) = solve_phase_laplacian(&SymMatField::constant(grid, SymMat2::scalar(3.0)), &data, &cfg).unwrap();
    assert!(theta.max_abs_diff(&data, 1.0) <= 1e-10);
}

#[test]
fn spec_metric_example_obeys_the_maximum_principle() {
    let grid = Grid2D::unit_disk(65).unwrap();
    let u = SymMatField::constant(grid, SymMat2::diag(1.0, 0.5));
    let data = ScalarField::from_fn(grid, |x| x[0]);
    let (theta, report) = solve_phase_laplacian(&induced_metric(&u), &data, &SolverConfig::default()).unwrap();
    assert!(report.final_residual <= SolverConfig::default().linear_tol);
    let domain = Domain::new(grid).unwrap();
    let hi = domain.ring().iter().map(|&k| data.at(k)).fold(f64::MIN, f64::max);
    assert!(domain.interior().iter().all(|&k| theta.at(k).abs() <= hi));
}

#[test]
fn maximum_principle_holds_on_random_metrics() {
    let worst = max_principle_sweep(11, 100, 33).unwrap();
    assert!(worst <= 1e-10, "{worst}");
}

#[test]
fn constant_phase_fixed_points_take_one_outer_iteration() {
    let grid = Grid2D::unit_disk(65).unwrap();
    for (m, phase) in [(SymMat2::IDENTITY, FRAC_PI_2), (SymMat2::diag(1.0, -1.0), 0.0)] {
        let u = ScalarField::from_fn(grid, |x| 0.5 * (m.xx * x[0] * x[0] + m.yy * x[1] * x[1]));
        let theta = ScalarField::from_fn(grid, |_| phase);
        let (us, _, report) = solve_hamiltonian_stationary(&u, &theta, &SolverConfig::default()).unwrap();
        assert!(report.converged && report.iterations == 1, "{report:?}");
        assert!(us.max_abs_diff(&u, 1.0) <= 1e-8);
        assert!(hs_residual(&us).unwrap().values().iter().all(|r| r.abs() <= 1e-8));
    }
}

#[test]
fn perturbed_hamiltonian_stationary_is_self_consistent_and_second_order() {
    let cfg = hs_study_config();
    let study = hs_perturbed_study(&[65, 129], &cfg).unwrap();
    assert!(study.converged, "{study:?}");
    assert!(study.self_consistency.iter().all(|&c| c <= cfg.newton_tol), "{study:?}");
    assert!(study.defect.slope >= 1.7, "{study:?}");
}

#[test]
fn invalid_configurations_are_rejected() {
    let grid = Grid2D::unit_disk(17).unwrap();
    let u = ScalarField::zeros(grid);
    let bad = SolverConfig {
        damping: 0.0,
        ..SolverConfig::default()
    };
    assert!(solve_hamiltonian_stationary(&u, &u, &bad).is_err());
    let other = ScalarField::zeros(Grid2D::unit_disk(33).unwrap());
    assert!(solve_hamiltonian_stationary(&u, &other, &SolverConfig::default()).is_err());
}
