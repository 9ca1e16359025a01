use lagrograph::analysis::{holder_seminorm, regularity_pipeline, Branch, HolderSampling};
use lagrograph::fields::{Grid2D, ScalarField};
use lagrograph::geometry::check_small_phase_condition;
use lagrograph::registry::suites::empirical_c1_study;
use lagrograph::rotation::HESSIAN_TRANSFER_SLACK;
use lagrograph::solvers::{solve_hamiltonian_stationary, SolverConfig};

fn field(n: usize, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
    ScalarField::from_fn(Grid2D::unit_disk(n).unwrap(), f)
}

#[test]
fn radial_quadratic_takes_the_bounded_away_branch() {
    let u = field(65, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
    let r = regularity_pipeline(&u, 0.5, 0.5, &HolderSampling::default()).unwrap();
    assert_eq!(r.branch, Branch::PhaseBoundedAway);
    assert_eq!(r.hessian_alpha, 0.0);
    assert!(r.rotated.is_none());
}

#[test]
fn saddle_takes_the_rotated_branch_with_zero_moduli() {
    let u = field(65, |x| 0.5 * (x[0] * x[0] - x[1] * x[1]));
    let r = regularity_pipeline(&u, 0.5, 0.5, &HolderSampling::default()).unwrap();
    assert_eq!(r.branch, Branch::SmallPhaseRotated);
    assert!(check_small_phase_condition(r.theta0, r.budget.lambda));
    let rot = r.rotated.unwrap();
    assert!(rot.hessian_bar_alpha < 1e-8, "{rot:?}");
    assert!(rot.transfer.passed());
}

#[test]
fn hamiltonian_stationary_solution_satisfies_the_modulus_transfer() {
    let grid = Grid2D::unit_disk(65).unwrap();
    let ub = ScalarField::from_fn(grid, |x| 0.4 * (x[0] * x[0] - x[1] * x[1]));
    let tb = ScalarField::from_fn(grid, |x| 0.045 * x[0]);
    let (u, theta, report) = solve_hamiltonian_stationary(&ub, &tb, &SolverConfig::default()).unwrap();
    assert!(report.converged);
    assert!(grid.mask_nodes().into_iter().all(|k| theta.at(k).abs() < 0.05));
    // Analyse inside B_{3/4}, clear of the Dirichlet ring layer.
    let inner = u.with_mask_radius(0.75).unwrap().restrict_to_mask();
    let r = regularity_pipeline(&inner, 0.5, 0.5, &HolderSampling::default()).unwrap();
    assert!(r.lambda_measured <= 1.0, "{r:?}");
    assert_eq!(r.branch, Branch::SmallPhaseRotated);
    let t = r.rotated.unwrap().transfer;
    assert!(t.hessian_seminorm <= t.hessian_bound + HESSIAN_TRANSFER_SLACK, "{t:?}");
    assert!(t.passed(), "{t:?}");
}

#[test]
fn negative_central_phase_is_sign_normalised() {
    let u = field(65, |x| -0.5 * (x[0] * x[0] + x[1] * x[1]) + 0.01 * x[0].powi(3));
    let r = regularity_pipeline(&u, 0.5, 0.5, &HolderSampling::default()).unwrap();
    assert!(r.sign_flipped && r.theta0 > 0.0);
}

#[test]
fn reports_are_deterministic() {
    let u = field(65, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) * (1.0 + 0.05 * x[0].sin()));
    let s = HolderSampling::default();
    let a = serde_json::to_string(&regularity_pipeline(&u, 0.5, 0.5, &s).unwrap()).unwrap();
    let b = serde_json::to_string(&regularity_pipeline(&u, 0.5, 0.5, &s).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn seminorm_scales_linearly_and_grows_with_radius() {
    let f = field(65, |x| (3.0 * x[0]).sin() * x[1]);
    let s = HolderSampling::default();
    let base = holder_seminorm(&f, 1.0, 0.5, &s).unwrap();
    let scaled = holder_seminorm(&f.map(|v| -2.5 * v), 1.0, 0.5, &s).unwrap();
    assert!((scaled - 2.5 * base).abs() <= 1e-12 * base);
    assert!(holder_seminorm(&f, 0.5, 0.5, &s).unwrap() <= base);
}

#[test]
fn empirical_constant_is_stable_under_refinement() {
    let study = empirical_c1_study(&[65, 129, 257], 129, &[0.5, 0.25], 0.5, 0.5, &HolderSampling::default()).unwrap();
    assert!(study.refinement.iter().all(|c| c.is_finite() && *c > 0.0));
    assert!(study.refinement_variation < 0.2, "{study:?}");
    assert!(study.rescaled.iter().all(|(_, c)| c.is_finite() && *c > 0.0));
}
