//! Lagrangian phase, induced metric and the rotation constant budget.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, SymMatField};
use crate::mat2::SymMat2;

/// Distance to `±pi` below which the complex-log phase is flagged.
pub const BRANCH_CUT_MARGIN: f64 = 1e-9;

/// `arctan(l1) + arctan(l2)` for the eigenvalues of `h`.
pub fn phase_of(h: &SymMat2) -> f64 {
    let (l1, l2) = h.eigenvalues();
    l1.atan() + l2.atan()
}

/// Principal `Im log det(I + iH) = atan2(tr H, 1 - det H)`.
pub fn complex_log_phase_of(h: &SymMat2) -> f64 {
    h.trace().atan2(1.0 - h.det())
}

pub fn lagrangian_phase(h: &SymMatField) -> ScalarField {
    let values = h.values().par_iter().map(phase_of).collect();
    ScalarField::new(*h.grid(), values).expect("same grid")
}

#[derive(Clone, Debug)]
pub struct ComplexLogPhase {
    pub phase: ScalarField,
    /// Nodes within [`BRANCH_CUT_MARGIN`] of the branch cut at `±pi`.
    pub branch_flags: Vec<bool>,
}

impl ComplexLogPhase {
    pub fn flagged_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.branch_flags.iter().enumerate().filter(|(_, f)| **f).map(|(k, _)| k)
    }
}

pub fn phase_via_complex_log(h: &SymMatField) -> ComplexLogPhase {
    let values: Vec<f64> = h.values().par_iter().map(complex_log_phase_of).collect();
    let branch_flags = values
        .iter()
        .map(|t| t.abs() >= std::f64::consts::PI - BRANCH_CUT_MARGIN)
        .collect();
    ComplexLogPhase {
        phase: ScalarField::new(*h.grid(), values).expect("same grid"),
        branch_flags,
    }
}

/// `g = I + H^2`.
pub fn metric_of(h: &SymMat2) -> SymMat2 {
    SymMat2::IDENTITY.add(&h.square())
}

pub fn induced_metric(h: &SymMatField) -> SymMatField {
    let values = h.values().par_iter().map(metric_of).collect();
    SymMatField::new(*h.grid(), values).expect("same grid")
}

/// Smallest and largest metric eigenvalue over the unmasked nodes.
pub fn ellipticity_bounds(g: &SymMatField) -> Result<(f64, f64)> {
    let grid = g.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in grid.mask_nodes() {
        let m = g.at(k);
        let (a, b) = m.eigenvalues();
        if !(a > 0.0) || !m.is_finite() {
            return Err(Error::Geometry {
                node: k,
                reason: format!("metric not positive definite (eigenvalues {a}, {b})"),
            });
        }
        lo = lo.min(a);
        hi = hi.max(b);
    }
    Ok((lo, hi))
}

/// Constants of the rotation argument for a `C^{1,1}` bound `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationBudget {
    pub lambda: f64,
    /// `arctan(lambda)`.
    pub a: f64,
    pub delta: f64,
    pub c: f64,
    pub s: f64,
    /// Upper Lipschitz constant of the forward map, `c + lambda s`.
    pub l1: f64,
    /// `1 / L2 = c - lambda s` is the lower Jacobian bound of the forward map.
    pub l2: f64,
    pub r_prime: f64,
    pub r0: f64,
    pub small_phase_threshold: f64,
}

impl RotationBudget {
    /// Budget with an explicit rotation angle; used for synthetic rotations
    /// (including `delta = 0`) and by [`rotation_budget`].
    pub fn with_delta(lambda: f64, delta: f64, r_prime: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(r_prime > 0.0 && r_prime.is_finite()) {
            return Err(Error::config(format!("R' must be positive, got {r_prime}")));
        }
        let (s, c) = delta.sin_cos();
        let inv_l2 = c - lambda * s.abs();
        if !(inv_l2 > 0.0) {
            return Err(Error::config(format!(
                "rotation by {delta} folds a graph with Hessian bound {lambda}"
            )));
        }
        let a = lambda.atan();
        Ok(RotationBudget {
            lambda,
            a,
            delta,
            c,
            s,
            l1: c + lambda * s.abs(),
            l2: 1.0 / inv_l2,
            r_prime,
            r0: r_prime / (2.0 / inv_l2),
            small_phase_threshold: (FRAC_PI_2 - a) / 4.0,
        })
    }

    /// `1/L2` through the tangent chain `c (tan delta + tan A) / tan(pi/2 - delta)`.
    pub fn inv_l2_tan_chain(&self) -> f64 {
        self.c * (self.delta.tan() + self.a.tan()) / (FRAC_PI_2 - self.delta).tan()
    }

    pub fn inv_l2(&self) -> f64 {
        1.0 / self.l2
    }

    /// Same constants on a different source radius.
    pub fn with_r_prime(&self, r_prime: f64) -> Result<Self> {
        RotationBudget::with_delta(self.lambda, self.delta, r_prime)
    }

    pub fn cot_delta(&self) -> f64 {
        self.c / self.s
    }
}

/// Radius on which `|theta(x) - theta(0)| <= delta/4` follows from the Hölder
/// bound; capped at one half.
pub fn source_radius(delta: f64, holder_theta: f64, alpha_bar: f64) -> f64 {
    if holder_theta > 0.0 {
        0.5f64.min((delta / (4.0 * holder_theta)).powf(1.0 / alpha_bar))
    } else {
        0.5
    }
}

pub fn rotation_budget(lambda: f64, holder_theta: f64, alpha_bar: f64) -> Result<RotationBudget> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be positive, got {lambda}")));
    }
    if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
        return Err(Error::config(format!("Hölder exponent must lie in (0, 1], got {alpha_bar}")));
    }
    if !(holder_theta >= 0.0 && holder_theta.is_finite()) {
        return Err(Error::config(format!("phase seminorm must be >= 0, got {holder_theta}")));
    }
    let delta = (FRAC_PI_2 - lambda.atan()) / 2.0;
    RotationBudget::with_delta(lambda, delta, source_radius(delta, holder_theta, alpha_bar))
}

/// `0 <= theta0 < (pi/2 - arctan lambda) / 4`.
pub fn check_small_phase_condition(theta0: f64, lambda: f64) -> bool {
    theta0 >= 0.0 && theta0 < (FRAC_PI_2 - lambda.atan()) / 4.0
}
