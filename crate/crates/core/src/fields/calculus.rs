//! Second-order finite differences.
//!
//! A stencil may use any grid node carrying a finite value. Central
//! differences are preferred; where a neighbour is missing (grid edge, or a
//! NaN exterior) the one-sided second-order formula pointing into the data is
//! used. Each node is computed independently, so results do not depend on
//! how the node loop is scheduled.

use rayon::prelude::*;

use super::{Grid2D, ScalarField, SymMatField, VectorField};
use crate::error::{Error, Result};
use crate::mat2::SymMat2;

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

impl Axis {
    fn across(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    #[inline]
    fn step(self, t: isize) -> (isize, isize) {
        match self {
            Axis::X => (t, 0),
            Axis::Y => (0, t),
        }
    }
}

/// Finite value of `f` at offset `t` along `axis`, if any.
#[inline]
fn sample(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize, axis: Axis, t: isize) -> Option<f64> {
    let (di, dj) = axis.step(t);
    grid.offset(k, di, dj).map(f).filter(|v| v.is_finite())
}

/// Tip nodes of a disk mask can lack any stencil along one axis. There the
/// derivative is extrapolated linearly from the two nearest nodes across the
/// axis, which keeps second-order accuracy and quadratic exactness.
fn with_fallback(
    grid: &Grid2D,
    k: usize,
    axis: Axis,
    along: impl Fn(usize) -> f64,
) -> f64 {
    let v = along(k);
    if v.is_finite() {
        return v;
    }
    for dir in [1isize, -1] {
        let (d1i, d1j) = axis.across().step(dir);
        let (d2i, d2j) = axis.across().step(2 * dir);
        if let (Some(p1), Some(p2)) = (grid.offset(k, d1i, d1j), grid.offset(k, d2i, d2j)) {
            let (a, b) = (along(p1), along(p2));
            if a.is_finite() && b.is_finite() {
                return 2.0 * a - b;
            }
        }
    }
    f64::NAN
}

fn first(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize, axis: Axis) -> f64 {
    if sample(grid, f, k, Axis::X, 0).is_none() {
        return f64::NAN;
    }
    with_fallback(grid, k, axis, |node| first_along(grid, f, node, axis))
}

fn second(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize, axis: Axis) -> f64 {
    if sample(grid, f, k, Axis::X, 0).is_none() {
        return f64::NAN;
    }
    with_fallback(grid, k, axis, |node| second_along(grid, f, node, axis))
}

fn first_along(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize, axis: Axis) -> f64 {
    let h = grid.spacing();
    let Some(v0) = sample(grid, f, k, axis, 0) else {
        return f64::NAN;
    };
    let at = |t| sample(grid, f, k, axis, t);
    if let (Some(vm), Some(vp)) = (at(-1), at(1)) {
        return (vp - vm) / (2.0 * h);
    }
    if let (Some(v1), Some(v2)) = (at(1), at(2)) {
        return (-3.0 * v0 + 4.0 * v1 - v2) / (2.0 * h);
    }
    if let (Some(v1), Some(v2)) = (at(-1), at(-2)) {
        return (3.0 * v0 - 4.0 * v1 + v2) / (2.0 * h);
    }
    f64::NAN
}

fn second_along(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize, axis: Axis) -> f64 {
    let h2 = grid.spacing() * grid.spacing();
    let Some(v0) = sample(grid, f, k, axis, 0) else {
        return f64::NAN;
    };
    let at = |t| sample(grid, f, k, axis, t);
    if let (Some(vm), Some(vp)) = (at(-1), at(1)) {
        return (vp - 2.0 * v0 + vm) / h2;
    }
    for dir in [1isize, -1] {
        if let (Some(v1), Some(v2), Some(v3)) = (at(dir), at(2 * dir), at(3 * dir)) {
            return (2.0 * v0 - 5.0 * v1 + 4.0 * v2 - v3) / h2;
        }
    }
    f64::NAN
}

/// `d/dy (d/dx f)`; the outer stencil is chosen from where the inner
/// derivative is available. On the interior this is the centred cross stencil.
fn mixed(grid: &Grid2D, f: &impl Fn(usize) -> f64, k: usize) -> f64 {
    let dx = |node: usize| first(grid, f, node, Axis::X);
    first(grid, &dx, k, Axis::Y)
}

fn check_unmasked<T>(grid: &Grid2D, values: &[T], finite: impl Fn(&T) -> bool) -> Result<()> {
    match (0..grid.len()).find(|&k| grid.in_mask(k) && !finite(&values[k])) {
        Some(node) => Err(Error::StencilUnavailable { node }),
        None => Ok(()),
    }
}

pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    f.validate()?;
    let grid = *f.grid();
    let vals = f.values();
    let get = |k: usize| vals[k];
    let out: Vec<[f64; 2]> = (0..grid.len())
        .into_par_iter()
        .map(|k| [first(&grid, &get, k, Axis::X), first(&grid, &get, k, Axis::Y)])
        .collect();
    check_unmasked(&grid, &out, |v| v[0].is_finite() && v[1].is_finite())?;
    VectorField::new(grid, out)
}

pub fn hessian(f: &ScalarField) -> Result<SymMatField> {
    f.validate()?;
    let grid = *f.grid();
    let vals = f.values();
    let get = |k: usize| vals[k];
    let out: Vec<SymMat2> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            SymMat2::new(
                second(&grid, &get, k, Axis::X),
                mixed(&grid, &get, k),
                second(&grid, &get, k, Axis::Y),
            )
        })
        .collect();
    check_unmasked(&grid, &out, SymMat2::is_finite)?;
    SymMatField::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid2D {
        Grid2D::unit_disk(n).unwrap()
    }

    #[test]
    fn zero_field_has_zero_derivatives() {
        let f = ScalarField::zeros(grid(17));
        assert!(gradient(&f).unwrap().values().iter().all(|v| *v == [0.0, 0.0]));
        assert!(hessian(&f).unwrap().values().iter().all(|m| *m == SymMat2::ZERO));
    }

    #[test]
    fn affine_gradient_is_exact() {
        let f = ScalarField::from_fn(grid(33), |x| x[0]);
        for v in gradient(&f).unwrap().values() {
            assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
        }
    }

    #[test]
    fn quadratic_gradient_is_node_exact() {
        let g = grid(65);
        let f = ScalarField::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let d = gradient(&f).unwrap();
        for k in 0..g.len() {
            let x = g.coord(k);
            assert!((d.at(k)[0] - x[0]).abs() <= 1e-12);
            assert!((d.at(k)[1] - x[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_hessians_are_exact() {
        let g = grid(33);
        let f = ScalarField::from_fn(g, |x| 0.5 * (x[0] * x[0] - x[1] * x[1]));
        for m in hessian(&f).unwrap().values() {
            assert!(m.sub(&SymMat2::diag(1.0, -1.0)).max_abs() <= 1e-12);
        }
        let f = ScalarField::from_fn(g, |x| x[0] * x[1]);
        for m in hessian(&f).unwrap().values() {
            assert!(m.sub(&SymMat2::new(0.0, 1.0, 0.0)).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn one_sided_ring_stencils_are_quadratic_exact() {
        // NaN exterior forces the intrinsic one-sided stencils at the ring.
        let g = Grid2D::new(41, 1.0, 0.8).unwrap();
        let f = ScalarField::from_fn(g, |x| 0.5 * x[0] * x[0] + 0.3 * x[0] * x[1] - x[1] * x[1])
            .restrict_to_mask();
        let d = gradient(&f).unwrap();
        let hs = hessian(&f).unwrap();
        for k in g.mask_nodes() {
            let x = g.coord(k);
            assert!((d.at(k)[0] - (x[0] + 0.3 * x[1])).abs() < 1e-11);
            assert!((d.at(k)[1] - (0.3 * x[0] - 2.0 * x[1])).abs() < 1e-11);
            assert!(hs.at(k).sub(&SymMat2::new(1.0, 0.3, -2.0)).max_abs() < 1e-9);
        }
    }

    #[test]
    fn isolated_tip_node_reports_missing_stencil() {
        // Mask of radius exactly one cell: the four axis nodes have no x-or-y
        // neighbours inside a NaN exterior.
        let g = Grid2D::new(17, 1.0, 0.125).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0]).restrict_to_mask();
        assert!(matches!(gradient(&f), Err(Error::StencilUnavailable { .. })));
    }
}
