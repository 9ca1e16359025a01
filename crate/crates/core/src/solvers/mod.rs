//! Solvers for the special Lagrangian equation `F(D^2 u) = theta`, the
//! divergence-form phase equation `Delta_g theta = 0`, and the coupled
//! Hamiltonian stationary system.
//!
//! Unknowns live on the interior nodes of a [`Domain`]; the mask ring
//! carries Dirichlet data taken from the supplied boundary fields.

mod domain;
mod flux;
mod hamiltonian;
mod linear;
mod special_lagrangian;

pub use domain::Domain;
pub use flux::beltrami_coefficient;
pub use hamiltonian::{hs_residual, hs_residual_strided, solve_hamiltonian_stationary};
pub use special_lagrangian::{linearization_coefficients, solve_special_lagrangian};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField, SymMatField};
use crate::geometry::ellipticity_bounds;
use flux::FluxOperator;

/// Smallest admissible metric eigenvalue; metrics `I + H^2` always exceed one.
const METRIC_FLOOR: f64 = 1.0 - 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Max-norm tolerance on `F(D^2 u) - theta` (and on Picard increments).
    pub newton_tol: f64,
    /// Relative residual tolerance of the linear solves.
    pub linear_tol: f64,
    pub max_newton: usize,
    pub max_linear: usize,
    /// Initial Newton step length in `(0, 1]`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            linear_tol: 1e-12,
            max_newton: 50,
            max_linear: 20_000,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("newton_tol", self.newton_tol)?;
        positive("linear_tol", self.linear_tol)?;
        if self.max_newton == 0 || self.max_linear == 0 {
            return Err(Error::config("iteration limits must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub converged: bool,
    /// Linear iterations spent per outer step.
    pub linear_iterations: Vec<usize>,
    /// Nodes whose coefficients were clamped (Newton admissibility guard) or
    /// clipped (flux-scheme monotonicity), summed over all steps.
    pub clamp_events: usize,
}

fn same_grid(a: &Grid2D, b: &Grid2D, what: &str) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::config(format!("{what} lives on a different grid")))
    }
}

/// Solves `div(sqrt(det g) g^{-1} grad theta) = 0` with Dirichlet data from
/// `theta_boundary` on the ring. The interior starts from the mean ring value;
/// the returned field is NaN outside the mask.
pub fn solve_phase_laplacian(
    g: &SymMatField,
    theta_boundary: &ScalarField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    phase_laplacian_from(g, theta_boundary, None, cfg)
}

pub(crate) fn phase_laplacian_from(
    g: &SymMatField,
    theta_boundary: &ScalarField,
    guess: Option<&ScalarField>,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    same_grid(g.grid(), theta_boundary.grid(), "phase boundary data")?;
    g.validate()?;
    theta_boundary.validate()?;
    let (lo, _) = ellipticity_bounds(g)?;
    if lo < METRIC_FLOOR {
        return Err(Error::Precondition(format!(
            "metric eigenvalue {lo} is below the uniform ellipticity floor {METRIC_FLOOR}"
        )));
    }
    let domain = Domain::new(*g.grid())?;
    let a = SymMatField::new(*g.grid(), g.values().iter().map(beltrami_coefficient).collect())?;
    let op = FluxOperator::new(&domain, &a)?;
    let rhs = op.boundary_rhs(theta_boundary.values());
    let x0: Vec<f64> = match guess {
        Some(t) => domain.interior().iter().map(|&k| t.at(k)).collect(),
        None => {
            let ring = domain.ring();
            let mean = ring.iter().map(|&k| theta_boundary.at(k)).sum::<f64>() / ring.len() as f64;
            vec![mean; domain.interior().len()]
        }
    };
    let out = linear::cg(&op, &rhs, x0, cfg.linear_tol, cfg.max_linear)?;
    let mut theta = theta_boundary.restrict_to_mask();
    for (&k, v) in domain.interior().iter().zip(&out.x) {
        theta.values_mut()[k] = *v;
    }
    let final_residual = *out.history.last().expect("history holds the initial residual");
    Ok((
        theta,
        SolveReport {
            iterations: out.iterations,
            residual_history: out.history,
            final_residual,
            converged: true,
            linear_iterations: vec![out.iterations],
            clamp_events: op.clip_events,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::induced_metric;
    use crate::mat2::SymMat2;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { damping: 1.5, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { newton_tol: 0.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_metric_reproduces_harmonic_bilinear() {
        let grid = Grid2D::unit_disk(33).unwrap();
        let g = SymMatField::constant(grid, SymMat2::scalar(2.0));
        let data = ScalarField::from_fn(grid, |x| x[0] * x[1]);
        let cfg = SolverConfig { linear_tol: 1e-14, ..SolverConfig::default() };
        let (theta, report) = solve_phase_laplacian(&g, &data, &cfg).unwrap();
        assert!(report.converged);
        assert!(theta.max_abs_diff(&data, 1.0) <= 1e-10);
    }

    #[test]
    fn constants_are_harmonic() {
        let grid = Grid2D::unit_disk(33).unwrap();
        let g = SymMatField::constant(grid, SymMat2::IDENTITY);
        let data = ScalarField::from_fn(grid, |_| 1.0);
        let (theta, _) = solve_phase_laplacian(&g, &data, &SolverConfig::default()).unwrap();
        assert!(theta.max_abs_diff(&data, 1.0) <= 1e-12);
    }

    #[test]
    fn indefinite_metric_is_rejected() {
        let grid = Grid2D::unit_disk(17).unwrap();
        let g = SymMatField::constant(grid, SymMat2::diag(1.0, -1.0));
        let data = ScalarField::zeros(grid);
        assert!(matches!(
            solve_phase_laplacian(&g, &data, &SolverConfig::default()),
            Err(Error::Geometry { .. })
        ));
    }

    #[test]
    fn metric_of_anisotropic_quadratic_obeys_max_principle() {
        let grid = Grid2D::unit_disk(33).unwrap();
        let h = SymMatField::constant(grid, SymMat2::diag(1.0, 0.5));
        let g = induced_metric(&h);
        let data = ScalarField::from_fn(grid, |x| x[0]);
        let (theta, _) = solve_phase_laplacian(&g, &data, &SolverConfig::default()).unwrap();
        let domain = Domain::new(grid).unwrap();
        let (lo, hi) = domain
            .ring()
            .iter()
            .map(|&k| data.at(k))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        for &k in domain.interior() {
            assert!(theta.at(k) >= lo && theta.at(k) <= hi);
        }
    }
}
