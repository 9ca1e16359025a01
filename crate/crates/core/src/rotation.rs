//! Rotation of the gradient graph `{(x, Du(x))}` by an angle `delta`.
//!
//! Convention: rotating *downward* by `delta` is the pullback, under which
//! each Hessian eigenvalue follows `lambda -> tan(arctan(lambda) - delta)`.
//! The pushforward is the inverse direction used to rotate back up.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::holder::{matrix_seminorm_on, scalar_seminorm_on, HolderSampling};
use crate::error::{Error, Result};
use crate::fields::{
    gradient, hessian, interpolate, invert_map, read_field, write_field, AnyField, Grid2D, ScalarField,
    SymMatField, VectorField,
};
use crate::geometry::{lagrangian_phase, RotationBudget};
use crate::mat2::{Mat2, SymMat2};

/// Margin by which eigenvalues must stay clear of the singular value `∓cot delta`.
const SINGULAR_MARGIN: f64 = 1e-12;
/// Tolerance on the Hessian bound when validating a rotation input.
const HESSIAN_BOUND_TOL: f64 = 1e-8;
/// Cells of padding between the rotated mask and the rotated grid edge.
const ROTATED_PADDING_CELLS: usize = 2;

pub const THETA_TRANSFER_SLACK: f64 = 1e-3;
pub const HESSIAN_TRANSFER_SLACK: f64 = 1e-2;

fn check_factor(m: &SymMat2, sign: f64, delta: f64) -> Result<()> {
    // Eigenvalues of c I + sign * s H must stay positive.
    let (s, c) = delta.sin_cos();
    let (lo, hi) = m.eigenvalues();
    for lambda in [lo, hi] {
        if !(c + sign * s * lambda > s.abs() * SINGULAR_MARGIN) && s != 0.0 {
            return Err(Error::SingularRotation {
                eigenvalue: lambda,
                limit: -sign * c / s,
            });
        }
    }
    Ok(())
}

/// `[cH - sI][cI + sH]^{-1}`: the Hessian after rotating down by `delta`.
pub fn hessian_pullback(h: &SymMat2, delta: f64) -> Result<SymMat2> {
    check_factor(h, 1.0, delta)?;
    let (s, c) = delta.sin_cos();
    let num = h.to_mat().scale(c).sub(&Mat2::scalar(s));
    let den = Mat2::scalar(c).add(&h.to_mat().scale(s));
    let inv = den.inverse().ok_or(Error::SingularRotation {
        eigenvalue: h.eigenvalues().0,
        limit: -c / s,
    })?;
    Ok(num.mul(&inv).symmetric_part())
}

/// `[sI + cA][cI - sA]^{-1}`: the Hessian after rotating up by `delta`.
pub fn hessian_pushforward(a: &SymMat2, delta: f64) -> Result<SymMat2> {
    check_factor(a, -1.0, delta)?;
    let (s, c) = delta.sin_cos();
    let num = Mat2::scalar(s).add(&a.to_mat().scale(c));
    let den = Mat2::scalar(c).sub(&a.to_mat().scale(s));
    let inv = den.inverse().ok_or(Error::SingularRotation {
        eigenvalue: a.eigenvalues().1,
        limit: c / s,
    })?;
    Ok(num.mul(&inv).symmetric_part())
}

/// `[cI - sB]^{-1} [A - B] [cI - sA]^{-1}`, which equals
/// `pushforward(A) - pushforward(B)`.
pub fn hessian_difference_factorization(a: &SymMat2, b: &SymMat2, delta: f64) -> Result<SymMat2> {
    Ok(difference_factorization_full(a, b, delta)?.symmetric_part())
}

/// Unsymmetrised form of [`hessian_difference_factorization`].
pub fn difference_factorization_full(a: &SymMat2, b: &SymMat2, delta: f64) -> Result<Mat2> {
    check_factor(a, -1.0, delta)?;
    check_factor(b, -1.0, delta)?;
    let (s, c) = delta.sin_cos();
    let inv = |m: &SymMat2| {
        Mat2::scalar(c)
            .sub(&m.to_mat().scale(s))
            .inverse()
            .ok_or(Error::SingularRotation {
                eigenvalue: m.eigenvalues().1,
                limit: c / s,
            })
    };
    let left = inv(b)?;
    let right = inv(a)?;
    Ok(left.mul(&a.sub(b).to_mat()).mul(&right))
}

/// `[cI - sB][sI + cA] - [sI + cB][cI - sA] - (A - B)` for arbitrary square
/// matrices; identically zero in exact arithmetic.
pub fn rotation_product_defect(a: &Mat2, b: &Mat2, delta: f64) -> Mat2 {
    let (s, c) = delta.sin_cos();
    let cs = |m: &Mat2| Mat2::scalar(c).sub(&m.scale(s));
    let sc = |m: &Mat2| Mat2::scalar(s).add(&m.scale(c));
    cs(b).mul(&sc(a)).sub(&sc(b).mul(&cs(a))).sub(&a.sub(b))
}

#[derive(Clone, Debug)]
pub struct RotatedGraph {
    pub budget: RotationBudget,
    /// `c x + s Du(x)` at every source node.
    pub forward_map: VectorField,
    /// Rotated potential on a fresh grid whose mask is the disk of radius `r0`.
    pub u_bar: ScalarField,
    pub du_bar: VectorField,
    pub d2u_bar: SymMatField,
    pub theta_bar: ScalarField,
}

/// Provenance record written next to a saved [`RotatedGraph`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationProvenance {
    /// Field file the source potential was read from, if any.
    pub source: Option<String>,
    pub delta: f64,
}

pub const BUDGET_FILE: &str = "budget.json";
pub const PROVENANCE_FILE: &str = "provenance.json";
pub const U_BAR_FILE: &str = "u_bar.field";
pub const DU_BAR_FILE: &str = "du_bar.field";
pub const D2U_BAR_FILE: &str = "d2u_bar.field";
pub const THETA_BAR_FILE: &str = "theta_bar.field";
pub const FORWARD_MAP_FILE: &str = "forward_map.field";

impl RotatedGraph {
    /// Writes the graph as a directory of field files plus `budget.json`
    /// and `provenance.json`. Returns the paths written, in a fixed order.
    pub fn save(&self, dir: impl AsRef<Path>, source: Option<&str>) -> Result<Vec<std::path::PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let budget = dir.join(BUDGET_FILE);
        std::fs::write(&budget, serde_json::to_string_pretty(&self.budget)? + "\n")?;
        written.push(budget);
        let fields: [(&str, AnyField); 5] = [
            (U_BAR_FILE, self.u_bar.clone().into()),
            (DU_BAR_FILE, self.du_bar.clone().into()),
            (D2U_BAR_FILE, self.d2u_bar.clone().into()),
            (THETA_BAR_FILE, self.theta_bar.clone().into()),
            (FORWARD_MAP_FILE, self.forward_map.clone().into()),
        ];
        for (name, field) in &fields {
            let path = dir.join(name);
            write_field(&path, field)?;
            written.push(path);
        }
        let provenance = RotationProvenance {
            source: source.map(str::to_owned),
            delta: self.budget.delta,
        };
        let path = dir.join(PROVENANCE_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(&provenance)? + "\n")?;
        written.push(path);
        Ok(written)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<(RotatedGraph, RotationProvenance)> {
        let dir = dir.as_ref();
        let budget: RotationBudget = serde_json::from_str(&std::fs::read_to_string(dir.join(BUDGET_FILE))?)?;
        let provenance: RotationProvenance =
            serde_json::from_str(&std::fs::read_to_string(dir.join(PROVENANCE_FILE))?)?;
        let rg = RotatedGraph {
            budget,
            forward_map: read_field(dir.join(FORWARD_MAP_FILE))?.into_vector()?,
            u_bar: read_field(dir.join(U_BAR_FILE))?.into_scalar()?,
            du_bar: read_field(dir.join(DU_BAR_FILE))?.into_vector()?,
            d2u_bar: read_field(dir.join(D2U_BAR_FILE))?.into_symmat()?,
            theta_bar: read_field(dir.join(THETA_BAR_FILE))?.into_scalar()?,
        };
        Ok((rg, provenance))
    }
}

/// Grid for the rotated potential: same node count, mask radius `r0`, and a
/// few cells of padding so mask nodes get central stencils.
pub fn rotated_grid(n: usize, r0: f64) -> Result<Grid2D> {
    let pad = 2 * ROTATED_PADDING_CELLS;
    if n <= pad + 1 {
        return Err(Error::config(format!("{n} nodes per side cannot hold the rotated grid")));
    }
    let half_width = r0 * (n - 1) as f64 / (n - 1 - pad) as f64;
    Grid2D::new(n, half_width, r0)
}

/// Rotates the gradient graph of `u` over `B_{R'}` down by `budget.delta`.
pub fn rotate_graph(u: &ScalarField, budget: &RotationBudget) -> Result<RotatedGraph> {
    let grid = *u.grid();
    let r_prime = budget.r_prime;
    if r_prime > grid.mask_radius() * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "source radius R' = {r_prime} exceeds the field's mask radius {}",
            grid.mask_radius()
        )));
    }
    let d2u = hessian(u)?;
    let du = gradient(u)?;
    for k in grid.disk_nodes(r_prime) {
        let (lo, hi) = d2u.at(k).eigenvalues();
        if lo < -budget.lambda - HESSIAN_BOUND_TOL || hi > budget.lambda + HESSIAN_BOUND_TOL {
            return Err(Error::Precondition(format!(
                "Hessian eigenvalues ({lo}, {hi}) at node {k} exceed the bound {}",
                budget.lambda
            )));
        }
    }

    let (c, s) = (budget.c, budget.s);
    let forward_vals: Vec<[f64; 2]> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.coord(k);
            let p = du.at(k);
            [c * x[0] + s * p[0], c * x[1] + s * p[1]]
        })
        .collect();
    let forward = VectorField::new(grid, forward_vals)?;
    let u_bar_source: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| correction_at(grid.coord(k), du.at(k), c, s) + u.at(k))
        .collect();
    let u_bar_source = ScalarField::new(grid, u_bar_source)?;

    let target_grid = rotated_grid(grid.n(), budget.r0)?;
    let targets: Vec<[f64; 2]> = (0..target_grid.len()).map(|k| target_grid.coord(k)).collect();
    let seeds = forward.with_mask_radius(r_prime)?;
    let preimages = invert_map(&seeds, &targets, budget.inv_l2())?;
    let u_bar = ScalarField::new(target_grid, interpolate(&u_bar_source, &preimages)?)?;
    let du_bar = gradient(&u_bar)?;
    let d2u_bar = hessian(&u_bar)?;
    let theta_bar = lagrangian_phase(&d2u_bar);

    if s > 0.0 {
        let cot = budget.cot_delta();
        if let Some(k) = target_grid
            .mask_nodes()
            .into_iter()
            .find(|&k| d2u_bar.at(k).eigenvalues().1 >= cot)
        {
            return Err(Error::SingularRotation {
                eigenvalue: d2u_bar.at(k).eigenvalues().1,
                limit: cot,
            });
        }
    }

    Ok(RotatedGraph {
        budget: *budget,
        forward_map: forward,
        u_bar,
        du_bar,
        d2u_bar,
        theta_bar,
    })
}

/// `psi(x) = s c (|Du|^2 - |x|^2) / 2 - s^2 Du . x`, so that `u_bar = u + psi`.
pub fn correction_at(x: [f64; 2], du: [f64; 2], c: f64, s: f64) -> f64 {
    let du2 = du[0] * du[0] + du[1] * du[1];
    let x2 = x[0] * x[0] + x[1] * x[1];
    s * c * (du2 - x2) / 2.0 - s * s * (du[0] * x[0] + du[1] * x[1])
}

/// Inverse rotation on the rotated grid: `(x(x̄), y(x̄))`.
pub fn rotate_back(rg: &RotatedGraph) -> (VectorField, VectorField) {
    let grid = *rg.u_bar.grid();
    let (c, s) = (rg.budget.c, rg.budget.s);
    let (xs, ys): (Vec<[f64; 2]>, Vec<[f64; 2]>) = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let xb = grid.coord(k);
            let p = rg.du_bar.at(k);
            (
                [c * xb[0] - s * p[0], c * xb[1] - s * p[1]],
                [s * xb[0] + c * p[0], s * xb[1] + c * p[1]],
            )
        })
        .unzip();
    (
        VectorField::new(grid, xs).expect("same grid"),
        VectorField::new(grid, ys).expect("same grid"),
    )
}

/// Source nodes whose forward image lies in the disk of `radius`.
pub fn preimage_nodes(rg: &RotatedGraph, radius: f64) -> Vec<usize> {
    let grid = rg.forward_map.grid();
    let r2 = radius * radius * (1.0 + 1e-12);
    grid.disk_nodes(rg.budget.r_prime)
        .into_iter()
        .filter(|&k| {
            let v = rg.forward_map.at(k);
            v[0] * v[0] + v[1] * v[1] <= r2
        })
        .collect()
}

/// Largest `|theta_bar(x̄(x)) - (theta(x) - 2 delta)|` over source nodes that
/// land inside the rotated mask.
pub fn verify_phase_shift(u: &ScalarField, rg: &RotatedGraph) -> Result<f64> {
    let theta = lagrangian_phase(&hessian(u)?);
    let nodes = preimage_nodes(rg, rg.budget.r0);
    let pts: Vec<[f64; 2]> = nodes.iter().map(|&k| rg.forward_map.at(k)).collect();
    let theta_bar = interpolate(&rg.theta_bar, &pts)?;
    let shift = 2.0 * rg.budget.delta;
    Ok(nodes
        .iter()
        .zip(theta_bar)
        .map(|(&k, tb)| (tb - (theta.at(k) - shift)).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCheck {
    /// `[theta_bar]_{alpha, B_r0}` on the rotated grid.
    pub theta_bar_seminorm: f64,
    /// `L2^alpha [theta]_{alpha, B_R'}` on the source grid.
    pub theta_bound: f64,
    pub theta_ok: bool,
    /// `[D^2 u]_alpha` over source nodes mapped into `B_{r0/2}`.
    pub hessian_seminorm: f64,
    /// `L1^{alpha+2} [D^2 u_bar]_{alpha, B_{r0/2}}`.
    pub hessian_bound: f64,
    pub hessian_ok: bool,
}

impl TransferCheck {
    pub fn passed(&self) -> bool {
        self.theta_ok && self.hessian_ok
    }
}

/// Measures both sides of the phase Hölder transfer and of the Hessian
/// modulus transfer through the coordinate change, each independently.
pub fn holder_transfer_check(
    theta: &ScalarField,
    source_hessian: &SymMatField,
    rg: &RotatedGraph,
    alpha: f64,
    sampling: &HolderSampling,
) -> Result<TransferCheck> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config(format!("transfer exponent must lie in (0, 1), got {alpha}")));
    }
    let b = &rg.budget;
    let source_ball = theta.grid().disk_nodes(b.r_prime);
    let rotated_ball = rg.theta_bar.grid().disk_nodes(b.r0);
    let theta_bar_seminorm = scalar_seminorm_on(&rg.theta_bar, &rotated_ball, alpha, sampling);
    let theta_bound = b.l2.powf(alpha) * scalar_seminorm_on(theta, &source_ball, alpha, sampling);

    let half_ball = rg.d2u_bar.grid().disk_nodes(b.r0 / 2.0);
    let rotated_modulus = matrix_seminorm_on(&rg.d2u_bar, &half_ball, alpha, sampling);
    let hessian_bound = b.l1.powf(alpha + 2.0) * rotated_modulus;
    let hessian_seminorm = matrix_seminorm_on(source_hessian, &preimage_nodes(rg, b.r0 / 2.0), alpha, sampling);

    Ok(TransferCheck {
        theta_bar_seminorm,
        theta_bound,
        theta_ok: theta_bar_seminorm <= theta_bound + THETA_TRANSFER_SLACK,
        hessian_seminorm,
        hessian_bound,
        hessian_ok: hessian_seminorm <= hessian_bound + HESSIAN_TRANSFER_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &SymMat2, b: &SymMat2, tol: f64) -> bool {
        a.sub(b).max_abs() <= tol
    }

    #[test]
    fn pullback_examples() {
        let z = hessian_pullback(&SymMat2::IDENTITY, PI / 4.0).unwrap();
        assert!(z.max_abs() < 1e-15);
        let h = SymMat2::new(0.3, -2.0, 1.7);
        assert_eq!(hessian_pullback(&h, 0.0).unwrap(), h);
        let p = hessian_pullback(&SymMat2::diag(2.0, 3.0), PI / 8.0).unwrap();
        assert!(close(&p, &SymMat2::diag(0.86730, 1.15301), 1e-5), "{p:?}");
    }

    #[test]
    fn pushforward_examples() {
        let d = PI / 8.0;
        let t = hessian_pushforward(&SymMat2::ZERO, d).unwrap();
        assert!(close(&t, &SymMat2::scalar(d.tan()), 1e-15));
        let h = SymMat2::new(0.3, -2.0, 1.7);
        assert_eq!(hessian_pushforward(&h, 0.0).unwrap(), h);
        let p = hessian_pushforward(&SymMat2::diag(0.86730, 1.15301), d).unwrap();
        assert!(close(&p, &SymMat2::diag(2.0, 3.0), 1e-4));
    }

    #[test]
    fn singular_rotations_are_reported() {
        let d = PI / 8.0;
        let cot = 1.0 / d.tan();
        assert!(matches!(
            hessian_pushforward(&SymMat2::scalar(cot), d),
            Err(Error::SingularRotation { .. })
        ));
        assert!(matches!(
            hessian_pullback(&SymMat2::diag(-cot, 0.0), d),
            Err(Error::SingularRotation { .. })
        ));
        assert!(hessian_pullback(&SymMat2::diag(-cot + 1e-6, 0.0), d).is_ok());
    }

    #[test]
    fn difference_factorization_examples() {
        let d = 0.3;
        let a = SymMat2::new(0.4, -0.2, 1.1);
        assert!(hessian_difference_factorization(&a, &a, d).unwrap().max_abs() == 0.0);
        let f = hessian_difference_factorization(&a, &SymMat2::ZERO, d).unwrap();
        let expected = hessian_pushforward(&a, d).unwrap().sub(&hessian_pushforward(&SymMat2::ZERO, d).unwrap());
        assert!(close(&f, &expected, 1e-12));
    }

    #[test]
    fn product_defect_vanishes_for_nonsymmetric_matrices() {
        let a = Mat2::new(1.0, 2.0, -3.0, 0.5);
        let b = Mat2::new(-0.7, 4.0, 0.1, 2.0);
        assert!(rotation_product_defect(&a, &b, 0.37).max_abs() < 1e-14);
    }

    #[test]
    fn correction_vanishes_without_rotation() {
        assert_eq!(correction_at([0.3, 0.4], [1.0, -2.0], 1.0, 0.0), 0.0);
    }
}
