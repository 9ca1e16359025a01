//! Newton's method for `F(D^2 u) = theta`, `F(H) = arctan l1 + arctan l2`.
//!
//! The discrete Hessian uses central second differences and the centred
//! cross stencil at interior nodes. Since `dF(H)[dH] = tr((I + H^2)^{-1} dH)`,
//! the Newton system is `sum g^{ij} D_ij v = theta - F(D^2 u)` with `v = 0`
//! on the ring. The matrix is not symmetric (coefficients vary by row), so
//! steps are solved with BiCGSTAB.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::domain::Domain;
use super::flux::FluxOperator;
use super::linear::{bicgstab, cg, LinearOperator};
use super::{same_grid, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField, SymMatField};
use crate::geometry::phase_of;
use crate::mat2::SymMat2;

/// Phases must stay this far inside `(-pi, pi)`.
const PHASE_MARGIN: f64 = 1e-6;
/// Coefficient clamp: Hessian eigenvalues are limited to this multiple of the
/// reference bound when forming the linearisation.
const CLAMP_FACTOR: f64 = 10.0;
/// Damping is halved on residual increase down to this step length.
const MIN_STEP: f64 = 1.0 / 1024.0;

/// Central discrete Hessian at a node with a full 9-point neighbourhood.
#[inline]
fn central_hessian(grid: &Grid2D, w: &[f64], k: usize) -> SymMat2 {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let at = |di, dj| w[grid.offset(k, di, dj).expect("interior stencil")];
    let c = w[k];
    SymMat2::new(
        (at(1, 0) - 2.0 * c + at(-1, 0)) * inv_h2,
        (at(1, 1) - at(-1, 1) - at(1, -1) + at(-1, -1)) * 0.25 * inv_h2,
        (at(0, 1) - 2.0 * c + at(0, -1)) * inv_h2,
    )
}

/// Limits the eigenvalues of `h` to `[-bound, bound]`, keeping eigenvectors.
fn clamp_eigenvalues(h: &SymMat2, bound: f64) -> (SymMat2, bool) {
    let (lo, hi) = h.eigenvalues();
    if lo >= -bound && hi <= bound {
        return (*h, false);
    }
    let angle = 0.5 * (2.0 * h.xy).atan2(h.xx - h.yy);
    (SymMat2::from_eigen(hi.clamp(-bound, bound), lo.clamp(-bound, bound), angle), true)
}

/// `(I + H^2)^{-1}`, the linearisation coefficients of `F` at `H`.
pub fn linearization_coefficients(h: &SymMat2) -> SymMat2 {
    let g = SymMat2::IDENTITY.add(&h.square());
    g.adjugate().scale(1.0 / g.det())
}

struct NewtonOperator<'d> {
    domain: &'d Domain,
    coeffs: Vec<SymMat2>,
    inv_h2: f64,
}

impl NewtonOperator<'_> {
    #[inline]
    fn unknown(&self, x: &[f64], k: usize, di: isize, dj: isize) -> f64 {
        let m = self.domain.grid().offset(k, di, dj).expect("interior stencil");
        match self.domain.slot(m) {
            Domain::NO_SLOT => 0.0,
            j => x[j],
        }
    }
}

impl LinearOperator for NewtonOperator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let interior = self.domain.interior();
        y.par_iter_mut().enumerate().for_each(|(i, y)| {
            let k = interior[i];
            let g = &self.coeffs[i];
            let u = |di, dj| self.unknown(x, k, di, dj);
            let dxx = u(1, 0) - 2.0 * x[i] + u(-1, 0);
            let dyy = u(0, 1) - 2.0 * x[i] + u(0, -1);
            let dxy = 0.25 * (u(1, 1) - u(-1, 1) - u(1, -1) + u(-1, -1));
            *y = (g.xx * dxx + 2.0 * g.xy * dxy + g.yy * dyy) * self.inv_h2;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        self.coeffs.iter().map(|g| -2.0 * (g.xx + g.yy) * self.inv_h2).collect()
    }
}

fn phase_residual(domain: &Domain, theta: &ScalarField, w: &[f64]) -> Vec<f64> {
    domain
        .interior()
        .par_iter()
        .map(|&k| theta.at(k) - phase_of(&central_hessian(domain.grid(), w, k)))
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Initial guess: `Delta u0 = 2 tan(theta / 2)` with the ring data. This is
/// the exact trace of `D^2 u` whenever the Hessian is a multiple of `I`.
fn poisson_guess(domain: &Domain, theta: &ScalarField, boundary: &ScalarField, cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let identity = SymMatField::constant(*domain.grid(), SymMat2::IDENTITY);
    let op = FluxOperator::new(domain, &identity)?;
    let mut rhs = op.boundary_rhs(boundary.values());
    for (r, &k) in rhs.iter_mut().zip(domain.interior()) {
        *r -= 2.0 * (0.5 * theta.at(k)).tan();
    }
    let x0 = domain.interior().iter().map(|_| 0.0).collect();
    let out = cg(&op, &rhs, x0, cfg.linear_tol, cfg.max_linear)?;
    let mut w = boundary.values().to_vec();
    for (&k, v) in domain.interior().iter().zip(&out.x) {
        w[k] = *v;
    }
    Ok((w, out.iterations))
}

/// Solves `F(D^2 u) = theta` on the interior with `u = u_boundary` on the
/// ring. The returned field is NaN outside the mask. Non-convergence is
/// reported, not raised.
pub fn solve_special_lagrangian(
    theta: &ScalarField,
    u_boundary: &ScalarField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    special_lagrangian_from(theta, u_boundary, None, cfg)
}

/// As [`solve_special_lagrangian`], optionally starting from `guess` instead
/// of the Poisson initial guess.
pub(crate) fn special_lagrangian_from(
    theta: &ScalarField,
    u_boundary: &ScalarField,
    guess: Option<&ScalarField>,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    same_grid(theta.grid(), u_boundary.grid(), "boundary potential")?;
    u_boundary.validate()?;
    let domain = Domain::new(*theta.grid())?;
    if let Some(&k) = domain
        .interior()
        .iter()
        .find(|&&k| !(theta.at(k).abs() < PI - PHASE_MARGIN))
    {
        return Err(Error::Precondition(format!(
            "phase {} at node {k} is not inside (-pi, pi)",
            theta.at(k)
        )));
    }
    let grid = *domain.grid();
    let (mut w, guess_iterations) = match guess {
        Some(g) => {
            same_grid(g.grid(), &grid, "initial guess")?;
            let mut w = u_boundary.values().to_vec();
            for &k in domain.interior() {
                w[k] = g.at(k);
            }
            (w, 0)
        }
        None => poisson_guess(&domain, theta, u_boundary, cfg)?,
    };
    let lambda_ref = domain
        .interior()
        .iter()
        .map(|&k| central_hessian(&grid, &w, k).spectral_norm())
        .fold(1.0, f64::max);
    let clamp = CLAMP_FACTOR * lambda_ref;

    let mut residual = phase_residual(&domain, theta, &w);
    let mut r = max_abs(&residual);
    let mut history = vec![r];
    let mut linear_iterations = vec![guess_iterations];
    let mut clamp_events = 0;
    let mut iterations = 0;
    while r > cfg.newton_tol && iterations < cfg.max_newton {
        let mut clamped = 0;
        let coeffs: Vec<SymMat2> = domain
            .interior()
            .iter()
            .map(|&k| {
                let (h, hit) = clamp_eigenvalues(&central_hessian(&grid, &w, k), clamp);
                clamped += usize::from(hit);
                linearization_coefficients(&h)
            })
            .collect();
        clamp_events += clamped;
        let op = NewtonOperator {
            domain: &domain,
            coeffs,
            inv_h2: 1.0 / (grid.spacing() * grid.spacing()),
        };
        let x0 = vec![0.0; residual.len()];
        let step = bicgstab(&op, &residual, x0, cfg.linear_tol, cfg.max_linear)?;
        linear_iterations.push(step.iterations);

        let mut t = cfg.damping;
        let accepted = loop {
            let mut trial = w.clone();
            for (&k, v) in domain.interior().iter().zip(&step.x) {
                trial[k] += t * v;
            }
            let trial_residual = phase_residual(&domain, theta, &trial);
            let tr = max_abs(&trial_residual);
            if tr < r {
                break Some((trial, trial_residual, tr));
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, trial_residual, tr)) => {
                w = trial;
                residual = trial_residual;
                r = tr;
                history.push(r);
            }
            None => break,
        }
    }
    let converged = r <= cfg.newton_tol;
    let u = ScalarField::new(grid, w)?.restrict_to_mask();
    Ok((
        u,
        SolveReport {
            iterations,
            residual_history: history,
            final_residual: r,
            converged,
            linear_iterations,
            clamp_events,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid2D;

    #[test]
    fn clamp_preserves_eigenvectors() {
        let h = SymMat2::from_eigen(30.0, -2.0, 0.4);
        let (c, hit) = clamp_eigenvalues(&h, 10.0);
        assert!(hit);
        assert!(c.sub(&SymMat2::from_eigen(10.0, -2.0, 0.4)).max_abs() < 1e-12);
        assert_eq!(clamp_eigenvalues(&h, 40.0), (h, false));
    }

    #[test]
    fn coefficients_are_uniformly_elliptic() {
        let lambda: f64 = 3.0;
        let g = linearization_coefficients(&SymMat2::from_eigen(lambda, -1.0, 1.1));
        let (lo, hi) = g.eigenvalues();
        assert!(lo >= 1.0 / (1.0 + lambda * lambda) - 1e-15 && hi <= 1.0 + 1e-15);
    }

    #[test]
    fn quadratic_solutions_are_recovered() {
        let grid = Grid2D::unit_disk(33).unwrap();
        for (m, phase) in [(SymMat2::IDENTITY, PI / 2.0), (SymMat2::diag(1.0, -1.0), 0.0)] {
            let exact = ScalarField::from_fn(grid, |x| 0.5 * (m.xx * x[0] * x[0] + m.yy * x[1] * x[1]));
            let theta = ScalarField::from_fn(grid, |_| phase);
            let (u, report) = solve_special_lagrangian(&theta, &exact, &SolverConfig::default()).unwrap();
            assert!(report.converged && report.iterations <= 5, "{report:?}");
            assert!(u.max_abs_diff(&exact, 1.0) <= 1e-8);
        }
    }
}
