//! Hamiltonian stationary potentials as the coupled system
//! `theta = F(D^2 u)`, `Delta_g theta = 0`, solved by Picard iteration.

use rayon::prelude::*;

use super::domain::Domain;
use super::flux::{beltrami_coefficient, FluxOperator};
use super::special_lagrangian::special_lagrangian_from;
use super::{phase_laplacian_from, same_grid, SolveReport, SolverConfig};
use crate::error::Result;
use crate::fields::{hessian, ScalarField, SymMatField};
use crate::geometry::{induced_metric, lagrangian_phase, metric_of};

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.max_abs_diff(b, a.grid().mask_radius())
}

/// Alternates `theta_{k+1} = solve_phase_laplacian(g(u_k))` and
/// `u_{k+1} = solve_special_lagrangian(theta_{k+1})` until the combined
/// max-norm increment drops below `newton_tol`. The residual history holds
/// those increments; `max_newton` bounds the outer loop.
pub fn solve_hamiltonian_stationary(
    u_boundary: &ScalarField,
    theta_boundary: &ScalarField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, ScalarField, SolveReport)> {
    cfg.validate()?;
    same_grid(u_boundary.grid(), theta_boundary.grid(), "phase boundary data")?;
    u_boundary.validate()?;
    theta_boundary.validate()?;
    let mut u = u_boundary.clone();
    let mut theta = lagrangian_phase(&hessian(&u.restrict_to_mask())?);
    let mut history = Vec::new();
    let mut linear_iterations = Vec::new();
    let mut clamp_events = 0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_newton {
        iterations += 1;
        // Ring metrics come from one-sided stencils inside the mask, never
        // from whatever the boundary field holds outside it.
        let g = induced_metric(&hessian(&u.restrict_to_mask())?);
        let (theta_next, phase_report) = phase_laplacian_from(&g, theta_boundary, Some(&theta), cfg)?;
        let (u_next, sl_report) = special_lagrangian_from(&theta_next, u_boundary, Some(&u), cfg)?;
        linear_iterations.push(phase_report.iterations + sl_report.linear_iterations.iter().sum::<usize>());
        clamp_events += phase_report.clamp_events + sl_report.clamp_events;
        let increment = max_diff(&u_next, &u) + max_diff(&theta_next, &theta);
        history.push(increment);
        u = u_next;
        theta = theta_next;
        if !sl_report.converged {
            break;
        }
        if increment < cfg.newton_tol {
            converged = true;
            break;
        }
    }
    let final_residual = history.last().copied().unwrap_or(f64::NAN);
    Ok((
        u,
        theta,
        SolveReport {
            iterations,
            residual_history: history,
            final_residual,
            converged,
            linear_iterations,
            clamp_events,
        },
    ))
}

/// `Delta_g F(D^2 u)` through the flux-form operator, evaluated at interior
/// nodes whose neighbours are all interior (so every phase value entering the
/// stencil comes from central differences). Other nodes hold zero.
pub fn hs_residual(u: &ScalarField) -> Result<ScalarField> {
    let grid = *u.grid();
    let h = hessian(&u.restrict_to_mask())?;
    let theta = lagrangian_phase(&h);
    let g = induced_metric(&h);
    let domain = Domain::new(grid)?;
    let a = SymMatField::new(grid, g.values().iter().map(beltrami_coefficient).collect())?;
    let op = FluxOperator::new(&domain, &a)?;
    let deep = domain.deep_interior(1);
    let values: Vec<(usize, f64)> = deep
        .par_iter()
        .map(|&k| {
            let div = op.divergence(domain.slot(k), theta.values());
            (k, div / metric_of(&h.at(k)).det().sqrt())
        })
        .collect();
    let mut out = ScalarField::zeros(grid);
    for (k, v) in values {
        out.values_mut()[k] = v;
    }
    Ok(out)
}

/// [`hs_residual`] of every `stride`-th node of `u`: the defect of a fine
/// solution measured by the coarser operator.
pub fn hs_residual_strided(u: &ScalarField, stride: usize) -> Result<ScalarField> {
    hs_residual(&u.subsample(stride)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;
    use std::f64::consts::PI;

    #[test]
    fn quadratic_residual_vanishes() {
        let u = ScalarField::from_fn(Grid2D::unit_disk(33).unwrap(), |x| 0.5 * x[0] * x[0] + 0.3 * x[0] * x[1]);
        let r = hs_residual(&u).unwrap();
        assert!(r.values().iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn constant_phase_is_a_fixed_point() {
        let grid = Grid2D::unit_disk(33).unwrap();
        let u = ScalarField::from_fn(grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let theta = ScalarField::from_fn(grid, |_| PI / 2.0);
        let (us, ts, report) = solve_hamiltonian_stationary(&u, &theta, &SolverConfig::default()).unwrap();
        assert!(report.converged && report.iterations == 1, "{report:?}");
        assert!(us.max_abs_diff(&u, 1.0) <= 1e-8);
        assert!(ts.max_abs_diff(&theta, 1.0) <= 1e-8);
    }
}
