//! Verification suites run by name: algebraic identities of the rotation,
//! Hölder transfer through rotated graphs, and refinement studies of the
//! discretisations and solvers.
//!
//! The refinement studies are public so tests and front ends can rerun a
//! single one without the rest of its suite.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generators::{sample, AnalyticPotential, PerturbedQuadratic};
use crate::analysis::{c11_norm, holder_seminorm, regularity_pipeline, HolderSampling};
use crate::error::{Error, Result};
use crate::fields::{gradient, hessian, rescale_potential, Grid2D, ScalarField, SymMatField};
use crate::geometry::{
    complex_log_phase_of, induced_metric, lagrangian_phase, phase_of, rotation_budget, RotationBudget,
};
use crate::mat2::SymMat2;
use crate::rng::{self, symmetric_with_eigenvalues_in};
use crate::rotation::{
    hessian_difference_factorization, hessian_pullback, hessian_pushforward, holder_transfer_check, rotate_graph,
    rotation_product_defect, TransferCheck, HESSIAN_TRANSFER_SLACK, THETA_TRANSFER_SLACK,
};
use crate::solvers::{
    hs_residual_strided, solve_hamiltonian_stationary, solve_phase_laplacian, solve_special_lagrangian, Domain,
    SolverConfig,
};

/// Smallest trial count a suite accepts.
pub const MIN_TRIALS: usize = 100;
/// Eigenvalue range of the random matrices in the identity suite.
pub const IDENTITY_EIGEN_BOUND: f64 = 5.0;
/// Hessian bounds of the constant-budget checks.
pub const BUDGET_LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
/// Grid sizes of the three dyadic levels `h = 1/32, 1/64, 1/128` on the unit disk.
pub const REFINEMENT_LEVELS: [usize; 3] = [65, 129, 257];
/// Accepted range for observed second-order slopes.
pub const SLOPE_RANGE: (f64, f64) = (1.8, 2.2);
/// Lowest accepted order for the coupled-system defect, which may superconverge.
pub const HS_MIN_ORDER: f64 = 1.7;
/// Radius of the ball on which the coupled-system defect is measured.
pub const HS_DEFECT_RADIUS: f64 = 0.5;
/// Amplitude of the manufactured perturbations.
pub const MANUFACTURED_EPS: f64 = 0.05;
/// Source phase seminorms below this are roundoff and carry no ratio.
pub const RATIO_FLOOR: f64 = 1e-8;
/// Hölder exponent used by the transfer suite for both phase and Hessian.
pub const TRANSFER_ALPHA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteContext {
    pub seed: u64,
    pub trials: usize,
}

impl SuiteContext {
    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::config(format!(
                "a suite needs at least {MIN_TRIALS} trials, got {}",
                self.trials
            )));
        }
        Ok(())
    }
}

/// One measured quantity with its acceptance interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl CheckResult {
    pub fn at_most(name: &str, measured: f64, upper: f64) -> Self {
        CheckResult {
            name: name.to_owned(),
            measured,
            lower: None,
            upper: Some(upper),
            passed: measured <= upper,
        }
    }

    pub fn at_least(name: &str, measured: f64, lower: f64) -> Self {
        CheckResult {
            name: name.to_owned(),
            measured,
            lower: Some(lower),
            upper: None,
            passed: measured >= lower,
        }
    }

    pub fn within(name: &str, measured: f64, (lower, upper): (f64, f64)) -> Self {
        CheckResult {
            name: name.to_owned(),
            measured,
            lower: Some(lower),
            upper: Some(upper),
            passed: measured >= lower && measured <= upper,
        }
    }

    /// A boolean property; `measured` holds the number of violations.
    pub fn holds(name: &str, violations: usize) -> Self {
        Self::at_most(name, violations as f64, 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteSummary {
    fn new(suite: &str, ctx: &SuiteContext, checks: Vec<CheckResult>) -> Self {
        SuiteSummary {
            suite: suite.to_owned(),
            seed: ctx.seed,
            trials: ctx.trials,
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub trait VerifySuite: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, ctx: &SuiteContext) -> Result<SuiteSummary>;
}

pub(crate) fn builtin() -> Vec<Box<dyn VerifySuite>> {
    vec![Box::new(IdentitySuite), Box::new(TransferSuite), Box::new(ConvergenceSuite)]
}

// ---------------------------------------------------------------------------
// Identities

/// Worst deviations of the pointwise rotation identities over random trials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityDeviations {
    pub product_defect: f64,
    pub factorization_vs_pushforward: f64,
    pub pullback_eigenvalues: f64,
    pub pushforward_eigenvalues: f64,
    pub round_trip: f64,
    pub phase_agreement: f64,
}

/// A rotation angle in `(0, delta_max]`, `delta_max = (pi/2 - arctan L)/2`,
/// where `L` bounds both matrices; both rotation directions are regular there.
fn admissible_delta(rng: &mut impl Rng, a: &SymMat2, b: &SymMat2) -> f64 {
    let bound = a.spectral_norm().max(b.spectral_norm());
    let delta_max = (FRAC_PI_2 - bound.atan()) / 2.0;
    delta_max * (1.0 - rng.gen::<f64>())
}

fn eigen_deviation(m: &SymMat2, expected: (f64, f64)) -> f64 {
    let (lo, hi) = m.eigenvalues();
    let (e_lo, e_hi) = if expected.0 <= expected.1 { expected } else { (expected.1, expected.0) };
    (lo - e_lo).abs().max((hi - e_hi).abs())
}

/// Runs `trials` random pairs through every pointwise identity.
pub fn identity_deviations(seed: u64, trials: usize) -> Result<IdentityDeviations> {
    let mut rng = rng::stream(seed, "identities");
    let mut d = IdentityDeviations::default();
    let bound = IDENTITY_EIGEN_BOUND;
    for _ in 0..trials {
        let a = symmetric_with_eigenvalues_in(&mut rng, -bound, bound);
        let b = symmetric_with_eigenvalues_in(&mut rng, -bound, bound);
        let delta = admissible_delta(&mut rng, &a, &b);

        let defect = rotation_product_defect(&a.to_mat(), &b.to_mat(), delta).max_abs();
        d.product_defect = d.product_defect.max(defect);

        let (pa, pb) = (hessian_pushforward(&a, delta)?, hessian_pushforward(&b, delta)?);
        let factored = hessian_difference_factorization(&a, &b, delta)?;
        d.factorization_vs_pushforward = d
            .factorization_vs_pushforward
            .max(factored.sub(&pa.sub(&pb)).max_abs());

        let (lo, hi) = a.eigenvalues();
        let law = |sign: f64| ((lo.atan() + sign * delta).tan(), (hi.atan() + sign * delta).tan());
        let down = hessian_pullback(&a, delta)?;
        d.pullback_eigenvalues = d.pullback_eigenvalues.max(eigen_deviation(&down, law(-1.0)));
        d.pushforward_eigenvalues = d.pushforward_eigenvalues.max(eigen_deviation(&pa, law(1.0)));
        let back = hessian_pullback(&pa, delta)?;
        d.round_trip = d.round_trip.max(back.sub(&a).max_abs());

        let phase = phase_of(&a);
        if phase.abs() < PI - 1e-6 {
            d.phase_agreement = d.phase_agreement.max((phase - complex_log_phase_of(&a)).abs());
        }
    }
    Ok(d)
}

/// Worst deviations of the constant-budget relations over [`BUDGET_LAMBDAS`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetDeviations {
    /// `|c (tan delta + tan A) / tan(pi/2 - delta) - (c - Lambda s)|`.
    pub inv_l2_formulas: f64,
    /// Cases violating `0 < 1/L2 < 1 < L1`.
    pub ordering_violations: usize,
    /// `|threshold - delta/2|`.
    pub threshold: f64,
}

pub fn budget_deviations() -> Result<BudgetDeviations> {
    let mut d = BudgetDeviations::default();
    for lambda in BUDGET_LAMBDAS {
        let b = rotation_budget(lambda, 0.0, 1.0)?;
        d.inv_l2_formulas = d.inv_l2_formulas.max((b.inv_l2_tan_chain() - b.inv_l2()).abs());
        let inv = b.inv_l2();
        d.ordering_violations += usize::from(!(inv > 0.0 && inv < 1.0 && b.l1 > 1.0));
        d.threshold = d.threshold.max((b.small_phase_threshold - b.delta / 2.0).abs());
    }
    Ok(d)
}

struct IdentitySuite;

impl VerifySuite for IdentitySuite {
    fn name(&self) -> &'static str {
        "identities"
    }
    fn summary(&self) -> &'static str {
        "difference identity, eigenvalue law, round trip, phase branches, constant budget"
    }
    fn run(&self, ctx: &SuiteContext) -> Result<SuiteSummary> {
        ctx.validate()?;
        let d = identity_deviations(ctx.seed, ctx.trials)?;
        let b = budget_deviations()?;
        let diag = (phase_of(&SymMat2::diag(2.0, 3.0)) - 0.75 * PI).abs();
        Ok(SuiteSummary::new(
            self.name(),
            ctx,
            vec![
                CheckResult::at_most("product_defect", d.product_defect, 1e-12),
                CheckResult::at_most("factorization_vs_pushforward", d.factorization_vs_pushforward, 1e-11),
                CheckResult::at_most("pullback_eigenvalue_law", d.pullback_eigenvalues, 1e-12),
                CheckResult::at_most("pushforward_eigenvalue_law", d.pushforward_eigenvalues, 1e-12),
                CheckResult::at_most("round_trip", d.round_trip, 1e-12),
                CheckResult::at_most("phase_agreement", d.phase_agreement, 1e-12),
                CheckResult::at_most("phase_diag_2_3", diag, 1e-12),
                CheckResult::at_most("budget_inv_l2_formulas", b.inv_l2_formulas, 1e-12),
                CheckResult::holds("budget_ordering", b.ordering_violations),
                CheckResult::at_most("budget_threshold", b.threshold, 1e-15),
            ],
        ))
    }
}

// ---------------------------------------------------------------------------
// Transfer

/// One rotated test case of the transfer corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCase {
    pub name: String,
    pub budget: RotationBudget,
    pub check: TransferCheck,
    /// `[theta_bar]_alpha / [theta]_alpha`, when the source seminorm exceeds
    /// [`RATIO_FLOOR`].
    pub theta_ratio: Option<f64>,
}

/// Rotates `u` with the budget of its Hessian bound and phase seminorm
/// measured on `B_{3R/4}` (clear of the Dirichlet ring layer of solver
/// output), then measures both sides of the transfer inequalities.
pub fn transfer_case(name: &str, u: &ScalarField, sampling: &HolderSampling) -> Result<TransferCase> {
    let radius = 0.75 * u.grid().mask_radius();
    let h = hessian(u)?;
    let theta = lagrangian_phase(&h);
    let lambda = c11_norm(u, radius)?.max(1e-12);
    let theta_alpha = holder_seminorm(&theta, radius, TRANSFER_ALPHA, sampling)?;
    let budget = rotation_budget(lambda, theta_alpha, TRANSFER_ALPHA)?;
    let rg = rotate_graph(u, &budget)?;
    let check = holder_transfer_check(&theta, &h, &rg, TRANSFER_ALPHA, sampling)?;
    let source = check.theta_bound / budget.l2.powf(TRANSFER_ALPHA);
    Ok(TransferCase {
        name: name.to_owned(),
        budget,
        check,
        theta_ratio: (source > RATIO_FLOOR).then(|| check.theta_bar_seminorm / source),
    })
}

/// Solution of `F(D^2 u) = delta/4 x1` (with `delta` of the unit Hessian
/// bound) and saddle boundary data `(x1^2 - x2^2)/4`.
pub fn manufactured_small_phase(n: usize) -> Result<ScalarField> {
    let grid = Grid2D::unit_disk(n)?;
    let delta = (FRAC_PI_2 - 1f64.atan()) / 2.0;
    let theta = ScalarField::from_fn(grid, |x| delta / 4.0 * x[0]);
    let boundary = ScalarField::from_fn(grid, |x| 0.25 * (x[0] * x[0] - x[1] * x[1]));
    let (u, report) = solve_special_lagrangian(&theta, &boundary, &SolverConfig::default())?;
    if !report.converged {
        return Err(Error::Consistency(format!(
            "manufactured small-phase solve stalled at residual {:e}",
            report.final_residual
        )));
    }
    Ok(u)
}

fn analytic_field(p: &dyn AnalyticPotential, n: usize) -> Result<ScalarField> {
    Ok(sample(p, Grid2D::unit_disk(n)?, None)?.u)
}

/// The transfer corpus: radial quadratics `tan(a)|x|^2/2`, `trials` random
/// quadratics, the perturbed quadratic, and the manufactured small phase.
pub fn transfer_corpus(seed: u64, trials: usize, sampling: &HolderSampling) -> Result<Vec<TransferCase>> {
    let mut cases = Vec::new();
    for (label, a) in [("radial_pi_8", PI / 8.0), ("radial_pi_4", PI / 4.0)] {
        let u = ScalarField::from_fn(Grid2D::unit_disk(65)?, |x| 0.5 * a.tan() * (x[0] * x[0] + x[1] * x[1]));
        cases.push(transfer_case(label, &u, sampling)?);
    }
    let mut rng = rng::stream(seed, "transfer-quadratics");
    let grid = Grid2D::unit_disk(33)?;
    for i in 0..trials {
        let bound = rng.gen_range(0.25..=2.0);
        let m = symmetric_with_eigenvalues_in(&mut rng, -bound, bound);
        let u = ScalarField::from_fn(grid, |x| {
            let mx = m.mul_vec(x);
            0.5 * (x[0] * mx[0] + x[1] * mx[1])
        });
        cases.push(transfer_case(&format!("quadratic_{i}"), &u, sampling)?);
    }
    let perturbed = PerturbedQuadratic {
        m: SymMat2::IDENTITY,
        eps: MANUFACTURED_EPS,
    };
    cases.push(transfer_case("perturbed_quadratic", &analytic_field(&perturbed, 65)?, sampling)?);
    cases.push(transfer_case("manufactured_small_phase", &manufactured_small_phase(65)?, sampling)?);
    Ok(cases)
}

struct TransferSuite;

impl VerifySuite for TransferSuite {
    fn name(&self) -> &'static str {
        "transfer"
    }
    fn summary(&self) -> &'static str {
        "Hölder transfer of phase and Hessian moduli through rotated graphs"
    }
    fn run(&self, ctx: &SuiteContext) -> Result<SuiteSummary> {
        ctx.validate()?;
        let sampling = HolderSampling {
            seed: ctx.seed,
            ..HolderSampling::default()
        };
        let cases = transfer_corpus(ctx.seed, ctx.trials, &sampling)?;
        let theta_margin = cases
            .iter()
            .map(|c| c.check.theta_bar_seminorm - c.check.theta_bound)
            .fold(f64::NEG_INFINITY, f64::max);
        let hessian_margin = cases
            .iter()
            .map(|c| c.check.hessian_seminorm - c.check.hessian_bound)
            .fold(f64::NEG_INFINITY, f64::max);
        let quadratic_seminorm = cases
            .iter()
            .filter(|c| c.name.starts_with("quadratic_") || c.name.starts_with("radial_"))
            .map(|c| c.check.theta_bar_seminorm.max(c.check.hessian_seminorm))
            .fold(0.0, f64::max);
        let manufactured = cases.last().expect("corpus is non-empty");
        let ratio_gap = manufactured
            .theta_ratio
            .map_or(f64::INFINITY, |r| r - manufactured.budget.l2.powf(TRANSFER_ALPHA));
        Ok(SuiteSummary::new(
            self.name(),
            ctx,
            vec![
                CheckResult::at_most("theta_transfer_excess", theta_margin, THETA_TRANSFER_SLACK),
                CheckResult::at_most("hessian_transfer_excess", hessian_margin, HESSIAN_TRANSFER_SLACK),
                CheckResult::holds("failed_cases", cases.iter().filter(|c| !c.check.passed()).count()),
                CheckResult::at_most("quadratic_seminorms", quadratic_seminorm, 1e-8),
                CheckResult::at_most("manufactured_ratio_minus_l2_power", ratio_gap, -f64::EPSILON),
            ],
        ))
    }
}

// ---------------------------------------------------------------------------
// Convergence

/// Errors at a sequence of grid spacings and the fitted order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub spacings: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`.
    pub slope: f64,
    /// Slopes between consecutive levels.
    pub pairwise: Vec<f64>,
}

impl RefinementStudy {
    pub fn new(spacings: Vec<f64>, errors: Vec<f64>) -> Self {
        let lh: Vec<f64> = spacings.iter().map(|h| h.ln()).collect();
        let le: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let n = lh.len() as f64;
        let (mh, me) = (lh.iter().sum::<f64>() / n, le.iter().sum::<f64>() / n);
        let cov: f64 = lh.iter().zip(&le).map(|(h, e)| (h - mh) * (e - me)).sum();
        let var: f64 = lh.iter().map(|h| (h - mh) * (h - mh)).sum();
        let pairwise = lh
            .windows(2)
            .zip(le.windows(2))
            .map(|(h, e)| (e[1] - e[0]) / (h[1] - h[0]))
            .collect();
        RefinementStudy {
            spacings,
            errors,
            slope: cov / var,
            pairwise,
        }
    }
}

fn derivative_probe(x: [f64; 2]) -> (f64, [f64; 2], SymMat2) {
    let (s1, c1) = x[0].sin_cos();
    let e = (0.5 * x[1]).exp();
    (
        s1 * e,
        [c1 * e, 0.5 * s1 * e],
        SymMat2::new(-s1 * e, 0.5 * c1 * e, 0.25 * s1 * e),
    )
}

/// Max-node gradient and Hessian errors of `sin(x1) exp(x2/2)` over the mask,
/// ring stencils included.
pub fn derivative_study(levels: &[usize]) -> Result<(RefinementStudy, RefinementStudy)> {
    let (mut hs, mut eg, mut eh) = (Vec::new(), Vec::new(), Vec::new());
    for &n in levels {
        let grid = Grid2D::unit_disk(n)?;
        let f = ScalarField::from_fn(grid, |x| derivative_probe(x).0).restrict_to_mask();
        let (g, h) = (gradient(&f)?, hessian(&f)?);
        let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
        for k in grid.mask_nodes() {
            let (_, dg, dh) = derivative_probe(grid.coord(k));
            let v = g.at(k);
            worst_g = worst_g.max((v[0] - dg[0]).abs().max((v[1] - dg[1]).abs()));
            worst_h = worst_h.max(h.at(k).sub(&dh).max_abs());
        }
        hs.push(grid.spacing());
        eg.push(worst_g);
        eh.push(worst_h);
    }
    Ok((RefinementStudy::new(hs.clone(), eg), RefinementStudy::new(hs, eh)))
}

/// Manufactured special Lagrangian problem: `u* = |x|^2 (1 + eps sin x1) / 2`
/// with its analytic phase and boundary values; errors are max-node
/// deviations from `u*` over the mask.
pub fn sl_manufactured_study(levels: &[usize], cfg: &SolverConfig) -> Result<RefinementStudy> {
    let exact = PerturbedQuadratic {
        m: SymMat2::IDENTITY,
        eps: MANUFACTURED_EPS,
    };
    let (mut hs, mut errors) = (Vec::new(), Vec::new());
    for &n in levels {
        let grid = Grid2D::unit_disk(n)?;
        let sampled = sample(&exact, grid, None)?;
        let theta = lagrangian_phase(&sampled.d2u);
        let (u, report) = solve_special_lagrangian(&theta, &sampled.u, cfg)?;
        if !report.converged {
            return Err(Error::Consistency(format!(
                "manufactured solve on n = {n} stalled at residual {:e}",
                report.final_residual
            )));
        }
        hs.push(grid.spacing());
        errors.push(u.max_abs_diff(&sampled.u, grid.mask_radius()));
    }
    Ok(RefinementStudy::new(hs, errors))
}

/// Outcome of one exact quadratic special Lagrangian solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCase {
    pub m: SymMat2,
    pub iterations: usize,
    pub converged: bool,
    /// Max-node deviation from the exact quadratic.
    pub error: f64,
    /// Whether the case is held to the five-step bound. The strongly
    /// anisotropic `diag(2, 1/2)` starts far from the isotropic Poisson guess
    /// and is only checked for exactness.
    pub step_bound: bool,
}

impl QuadraticCase {
    pub fn passed(&self) -> bool {
        self.converged && self.error <= 1e-8 && (!self.step_bound || self.iterations <= 5)
    }
}

pub fn sl_quadratic_cases(n: usize, cfg: &SolverConfig) -> Result<Vec<QuadraticCase>> {
    let grid = Grid2D::unit_disk(n)?;
    [
        (SymMat2::IDENTITY, true),
        (SymMat2::diag(1.0, -1.0), true),
        (SymMat2::new(0.8, 0.3, -0.4), true),
        (SymMat2::diag(2.0, 0.5), false),
    ]
    .into_iter()
    .map(|(m, step_bound)| {
        let exact = ScalarField::from_fn(grid, |x| {
            let mx = m.mul_vec(x);
            0.5 * (x[0] * mx[0] + x[1] * mx[1])
        });
        let theta = ScalarField::from_fn(grid, |_| phase_of(&m));
        let (u, report) = solve_special_lagrangian(&theta, &exact, cfg)?;
        Ok(QuadraticCase {
            m,
            iterations: report.iterations,
            converged: report.converged,
            error: u.max_abs_diff(&exact, grid.mask_radius()),
            step_bound,
        })
    })
    .collect()
}

/// Tolerances of the coupled-system refinement study; the Picard
/// increments must sit well below the `O(h^2)` defect on the finest level.
pub fn hs_study_config() -> SolverConfig {
    SolverConfig {
        newton_tol: 1e-11,
        linear_tol: 1e-13,
        ..SolverConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsStudy {
    /// Defect of each fine solution under the stride-2 operator on
    /// `B_{HS_DEFECT_RADIUS}`.
    pub defect: RefinementStudy,
    /// `max |theta - F(D^2 u)|` over interior nodes at each level.
    pub self_consistency: Vec<f64>,
    pub outer_iterations: Vec<usize>,
    pub converged: bool,
}

/// Coupled problem with `theta_b = pi/2 + eps x1`, `u_b = |x|^2/2`.
pub fn hs_perturbed_study(levels: &[usize], cfg: &SolverConfig) -> Result<HsStudy> {
    let (mut hs, mut defects, mut consistency, mut iterations) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut converged = true;
    for &n in levels {
        let grid = Grid2D::unit_disk(n)?;
        let ub = ScalarField::from_fn(grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let tb = ScalarField::from_fn(grid, |x| FRAC_PI_2 + MANUFACTURED_EPS * x[0]);
        let (u, theta, report) = solve_hamiltonian_stationary(&ub, &tb, cfg)?;
        converged &= report.converged;
        iterations.push(report.iterations);
        let phase = lagrangian_phase(&hessian(&u.restrict_to_mask())?);
        let domain = Domain::new(grid)?;
        consistency.push(
            domain
                .interior()
                .iter()
                .map(|&k| (phase.at(k) - theta.at(k)).abs())
                .fold(0.0, f64::max),
        );
        let defect = hs_residual_strided(&u, 2)?;
        let ball = defect.grid().disk_nodes(HS_DEFECT_RADIUS);
        hs.push(grid.spacing());
        defects.push(ball.into_iter().map(|k| defect.at(k).abs()).fold(0.0, f64::max));
    }
    Ok(HsStudy {
        defect: RefinementStudy::new(hs, defects),
        self_consistency: consistency,
        outer_iterations: iterations,
        converged,
    })
}

/// Largest amount by which an interior phase-equation solution leaves the
/// range of its ring data, over `count` random smooth metrics `I + H(x)^2`
/// and random smooth boundary data.
pub fn max_principle_sweep(seed: u64, count: usize, n: usize) -> Result<f64> {
    let mut rng = rng::stream(seed, "max-principle");
    let grid = Grid2D::unit_disk(n)?;
    let domain = Domain::new(grid)?;
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let h0 = symmetric_with_eigenvalues_in(&mut rng, -2.0, 2.0);
        let h1 = symmetric_with_eigenvalues_in(&mut rng, -1.0, 1.0);
        let w: [f64; 2] = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let field = SymMatField::from_fn(grid, |x| h0.add(&h1.scale((w[0] * x[0] + w[1] * x[1] + phi).sin())));
        let g = induced_metric(&field);
        let modes: Vec<(f64, f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(-4.0..4.0),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let data = ScalarField::from_fn(grid, |x| {
            modes.iter().map(|&(a, k1, k2, p)| a * (k1 * x[0] + k2 * x[1] + p).sin()).sum()
        });
        let (theta, _) = solve_phase_laplacian(&g, &data, &cfg)?;
        let (lo, hi) = domain
            .ring()
            .iter()
            .map(|&k| data.at(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        for &k in domain.interior() {
            let t = theta.at(k);
            worst = worst.max(t - hi).max(lo - t);
        }
    }
    Ok(worst.max(0.0))
}

/// `empirical_C1` of the regularity pipeline on the perturbed quadratic
/// under grid refinement and under the rescaling `u_rho(x) = u(rho x)/rho^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Study {
    pub spacings: Vec<f64>,
    pub refinement: Vec<f64>,
    /// `(max - min) / max` over the refinement levels.
    pub refinement_variation: f64,
    /// Grid on which the rescaled potentials are compared.
    pub rescaling_n: usize,
    pub unscaled: f64,
    /// `(rho, empirical_C1 of u_rho)`.
    pub rescaled: Vec<(f64, f64)>,
    /// Largest `|C1(u_rho) - C1(u)| / C1(u)`.
    pub rescaling_variation: f64,
}

fn relative_spread(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    (hi - lo) / hi
}

pub fn empirical_c1_study(
    levels: &[usize],
    rescaling_n: usize,
    rhos: &[f64],
    alpha_bar: f64,
    alpha: f64,
    sampling: &HolderSampling,
) -> Result<C1Study> {
    let potential = PerturbedQuadratic {
        m: SymMat2::IDENTITY,
        eps: MANUFACTURED_EPS,
    };
    let c1 = |u: &ScalarField| -> Result<f64> {
        let report = regularity_pipeline(u, alpha_bar, alpha, sampling)?;
        if !report.empirical_c1.is_finite() {
            return Err(Error::Consistency(format!("empirical C1 is {}", report.empirical_c1)));
        }
        Ok(report.empirical_c1)
    };
    let mut spacings = Vec::new();
    let mut refinement = Vec::new();
    for &n in levels {
        let u = analytic_field(&potential, n)?;
        spacings.push(u.grid().spacing());
        refinement.push(c1(&u)?);
    }
    let base = analytic_field(&potential, rescaling_n)?;
    let unscaled = c1(&base)?;
    let rescaled = rhos
        .iter()
        .map(|&rho| Ok((rho, c1(&rescale_potential(&base, rho)?)?)))
        .collect::<Result<Vec<_>>>()?;
    let rescaling_variation = rescaled
        .iter()
        .map(|&(_, c)| (c - unscaled).abs() / unscaled)
        .fold(0.0, f64::max);
    Ok(C1Study {
        refinement_variation: relative_spread(&refinement),
        spacings,
        refinement,
        rescaling_n,
        unscaled,
        rescaled,
        rescaling_variation,
    })
}

struct ConvergenceSuite;

impl VerifySuite for ConvergenceSuite {
    fn name(&self) -> &'static str {
        "convergence"
    }
    fn summary(&self) -> &'static str {
        "refinement orders of derivatives and solvers; discrete maximum principle"
    }
    fn run(&self, ctx: &SuiteContext) -> Result<SuiteSummary> {
        ctx.validate()?;
        let (grad, hess) = derivative_study(&REFINEMENT_LEVELS)?;
        let sl = sl_manufactured_study(&REFINEMENT_LEVELS, &SolverConfig::default())?;
        let quadratics = sl_quadratic_cases(33, &SolverConfig::default())?;
        let quad_err = quadratics.iter().map(|c| c.error).fold(0.0, f64::max);
        let quad_failures = quadratics.iter().filter(|c| !c.passed()).count();
        let hs = hs_perturbed_study(&REFINEMENT_LEVELS, &hs_study_config())?;
        let consistency = hs.self_consistency.iter().copied().fold(0.0, f64::max);
        let max_principle = max_principle_sweep(ctx.seed, ctx.trials, 33)?;
        Ok(SuiteSummary::new(
            self.name(),
            ctx,
            vec![
                CheckResult::within("gradient_slope", grad.slope, SLOPE_RANGE),
                CheckResult::within("hessian_slope", hess.slope, SLOPE_RANGE),
                CheckResult::within("sl_manufactured_slope", sl.slope, SLOPE_RANGE),
                CheckResult::at_most("sl_quadratic_error", quad_err, 1e-8),
                CheckResult::holds("sl_quadratic_failures", quad_failures),
                CheckResult::holds("hs_unconverged", usize::from(!hs.converged)),
                CheckResult::at_least("hs_defect_order", hs.defect.slope, HS_MIN_ORDER),
                CheckResult::at_most("hs_self_consistency", consistency, hs_study_config().newton_tol),
                CheckResult::at_most("max_principle_violation", max_principle, 1e-10),
            ],
        ))
    }
}
