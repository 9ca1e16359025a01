//! Norms, Hölder seminorms, the estimate-(E) report and the regularity
//! pipeline that follows the case split of the interior estimate.

pub(crate) mod holder;

pub use holder::{
    holder_seminorm, holder_seminorm_exhaustive, holder_seminorm_matrix, HolderSampling, MIN_PAIR_BUDGET,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{gradient, hessian, ScalarField};
use crate::geometry::{check_small_phase_condition, lagrangian_phase, rotation_budget, RotationBudget};
use crate::rotation::{correction_at, holder_transfer_check, rotate_graph, TransferCheck};

/// Slack on the correction-function bound.
const CORRECTION_SLACK: f64 = 1e-10;
/// Largest admissible mismatch between a supplied phase and `F(D^2 u)`.
const PHASE_CONSISTENCY_TOL: f64 = 1e-6;
/// Smallest ball the pipeline will accept, in grid cells.
const MIN_BALL_CELLS: f64 = 2.0;
/// Floor on the measured `C^{1,1}` bound so affine inputs still get a budget.
const LAMBDA_FLOOR: f64 = 1e-12;

fn check_radius(grid: &crate::fields::Grid2D, radius: f64) -> Result<()> {
    if !(radius > 0.0) || radius > grid.mask_radius() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "radius {radius} must lie in (0, {}]",
            grid.mask_radius()
        )));
    }
    Ok(())
}

/// `max |f|` over finite nodes with `|x| <= radius`.
pub fn sup_norm(f: &ScalarField, radius: f64) -> Result<f64> {
    check_radius(f.grid(), radius)?;
    let nodes: Vec<f64> = f
        .grid()
        .disk_nodes(radius)
        .into_iter()
        .map(|k| f.at(k))
        .filter(|v| v.is_finite())
        .collect();
    if nodes.is_empty() {
        return Err(Error::Domain(format!("no finite node within radius {radius}")));
    }
    Ok(nodes.into_iter().map(f64::abs).fold(0.0, f64::max))
}

/// Largest spectral norm of the discrete Hessian over the disk of `radius`.
pub fn c11_norm(u: &ScalarField, radius: f64) -> Result<f64> {
    check_radius(u.grid(), radius)?;
    let h = hessian(u)?;
    let nodes = u.grid().disk_nodes(radius);
    if nodes.is_empty() {
        return Err(Error::Domain(format!("no node within radius {radius}")));
    }
    Ok(nodes.into_iter().map(|k| h.at(k).spectral_norm()).fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionCheck {
    /// `sup |psi|` over the ball, `psi = u_bar - u`.
    pub measured: f64,
    /// `R sup|Du| + (R^2 + sup|Du|^2) / 2`.
    pub bound: f64,
    pub ok: bool,
}

pub fn correction_bound_check(u: &ScalarField, budget: &RotationBudget, radius: f64) -> Result<CorrectionCheck> {
    check_radius(u.grid(), radius)?;
    let du = gradient(u)?;
    let grid = u.grid();
    let mut measured: f64 = 0.0;
    let mut sup_du: f64 = 0.0;
    for k in grid.disk_nodes(radius) {
        let p = du.at(k);
        measured = measured.max(correction_at(grid.coord(k), p, budget.c, budget.s).abs());
        sup_du = sup_du.max(p[0].hypot(p[1]));
    }
    let bound = radius * sup_du + 0.5 * (radius * radius + sup_du * sup_du);
    Ok(CorrectionCheck {
        measured,
        bound,
        ok: measured <= bound + CORRECTION_SLACK,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    SmallPhaseRotated,
    PhaseBoundedAway,
}

/// Measurements taken on the rotated graph in the small-phase branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedMeasurements {
    /// `[D^2 u_bar]_alpha` on `B_{r0/2}` in rotated coordinates.
    pub hessian_bar_alpha: f64,
    pub transfer: TransferCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub alpha: f64,
    pub lambda_measured: f64,
    pub sup_u: f64,
    pub theta_alpha: f64,
    pub hessian_alpha: f64,
    pub r_used: f64,
    pub branch: Branch,
    pub empirical_c1: f64,
    pub budget: RotationBudget,
    pub correction_bound_ok: bool,
    /// Radius of the centred ball selected by the pipeline.
    pub ball_radius: f64,
    /// Phase at the centre after sign normalisation.
    pub theta0: f64,
    pub theta_osc: f64,
    /// Whether `-u` was analysed because `theta(0) < 0`.
    pub sign_flipped: bool,
    pub rotated: Option<RotatedMeasurements>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Estimate-(E) report: `[D^2 u]_alpha` on `B_{r0/2}` against the data
/// `||u||_inf + Lambda + [theta]_alpha` on the mask disk.
pub fn schauder_report(
    u: &ScalarField,
    theta: &ScalarField,
    alpha: f64,
    budget: &RotationBudget,
    sampling: &HolderSampling,
) -> Result<RegularityReport> {
    let grid = *u.grid();
    let radius = grid.mask_radius();
    let h = hessian(u)?;
    let phase = lagrangian_phase(&h);
    let mismatch = phase.max_abs_diff(theta, radius);
    if !(mismatch <= PHASE_CONSISTENCY_TOL) {
        return Err(Error::Consistency(format!(
            "supplied phase differs from F(D^2 u) by {mismatch:e}"
        )));
    }
    let sup_u = sup_norm(u, radius)?;
    let lambda_measured = c11_norm(u, radius)?;
    let theta_alpha = holder_seminorm(theta, radius, alpha, sampling)?;
    let r_used = budget.r0 / 2.0;
    let hessian_alpha = holder_seminorm_matrix(&h, r_used, alpha, sampling)?;
    let correction = correction_bound_check(u, budget, budget.r_prime.min(radius))?;
    let theta0 = theta.at(grid.center_node());
    Ok(RegularityReport {
        alpha,
        lambda_measured,
        sup_u,
        theta_alpha,
        hessian_alpha,
        r_used,
        branch: if check_small_phase_condition(theta0, budget.lambda) {
            Branch::SmallPhaseRotated
        } else {
            Branch::PhaseBoundedAway
        },
        empirical_c1: ratio(hessian_alpha, sup_u + lambda_measured + theta_alpha),
        budget: *budget,
        correction_bound_ok: correction.ok,
        ball_radius: budget.r_prime,
        theta0,
        theta_osc: oscillation(theta, budget.r_prime.min(radius)),
        sign_flipped: false,
        rotated: None,
    })
}

fn oscillation(f: &ScalarField, radius: f64) -> f64 {
    let (lo, hi) = f
        .grid()
        .disk_nodes(radius)
        .into_iter()
        .map(|k| f.at(k))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// Dyadic centred radii `R, R/2, R/4, ...` down to two grid cells.
fn dyadic_radii(mask_radius: f64, spacing: f64) -> Vec<f64> {
    std::iter::successors(Some(mask_radius), |r| Some(r / 2.0))
        .take_while(|&r| r >= MIN_BALL_CELLS * spacing)
        .collect()
}

/// Follows the proof of the interior estimate: measure `Lambda` and the
/// phase, pick the largest centred dyadic ball with `osc theta < delta/4`,
/// then either rotate (small phase) or measure directly (phase bounded away).
pub fn regularity_pipeline(
    u: &ScalarField,
    alpha_bar: f64,
    alpha: f64,
    sampling: &HolderSampling,
) -> Result<RegularityReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("output exponent must lie in (0, 1), got {alpha}")));
    }
    u.validate()?;
    let grid = *u.grid();
    let mut theta = lagrangian_phase(&hessian(u)?);
    let sign_flipped = theta.at(grid.center_node()) < 0.0;
    let u = if sign_flipped { u.map(|v| -v) } else { u.clone() };
    if sign_flipped {
        theta = theta.map(|t| -t);
    }

    let lambda = c11_norm(&u, grid.mask_radius())?.max(LAMBDA_FLOOR);
    let theta_bar_alpha = holder_seminorm(&theta, grid.mask_radius(), alpha_bar, sampling)?;
    let budget = rotation_budget(lambda, theta_bar_alpha, alpha_bar)?;

    let quarter = budget.delta / 4.0;
    let ball = dyadic_radii(grid.mask_radius(), grid.spacing())
        .into_iter()
        .find(|&r| oscillation(&theta, r) < quarter)
        .ok_or_else(|| {
            Error::Resolution(format!(
                "no centred ball of at least {MIN_BALL_CELLS} cells has phase oscillation below delta/4 = {quarter}; refine the grid"
            ))
        })?;
    let budget = budget.with_r_prime(ball)?;
    let theta0 = theta.at(grid.center_node());
    let theta_max = grid
        .disk_nodes(ball)
        .into_iter()
        .map(|k| theta.at(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let small_phase = check_small_phase_condition(theta0, lambda) && theta_max < budget.delta / 2.0;

    let mut report = schauder_report(&u, &theta, alpha, &budget, sampling)?;
    report.ball_radius = ball;
    report.theta0 = theta0;
    report.theta_osc = oscillation(&theta, ball);
    report.sign_flipped = sign_flipped;
    report.branch = if small_phase {
        Branch::SmallPhaseRotated
    } else {
        Branch::PhaseBoundedAway
    };
    if small_phase {
        let rg = rotate_graph(&u, &budget)?;
        let half = rg.d2u_bar.grid().disk_nodes(budget.r0 / 2.0);
        let hessian_bar_alpha = holder::matrix_seminorm_on(&rg.d2u_bar, &half, alpha, sampling);
        let transfer = holder_transfer_check(&theta, &hessian(&u)?, &rg, alpha, sampling)?;
        report.rotated = Some(RotatedMeasurements {
            hessian_bar_alpha,
            transfer,
        });
    }
    Ok(report)
}
