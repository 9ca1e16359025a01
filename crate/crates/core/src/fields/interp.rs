//! Bicubic resampling, map inversion and potential rescaling.
//!
//! Interpolation is the tensor product of cubic Lagrange polynomials on the
//! 4x4 node window around a point; the window slides inward at the grid
//! edge. Cubics are reproduced exactly, and a point sitting on a node returns
//! that node's stored value.

use rayon::prelude::*;

use super::{Grid2D, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::mat2::Mat2;

/// Offsets closer than this (in cell units) snap onto the node.
const NODE_SNAP: f64 = 1e-10;
const MAX_NEWTON: usize = 50;
/// Acceptance threshold for an inverted point.
pub const INVERSION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug)]
struct Window {
    start: usize,
    w: [f64; 4],
    dw: [f64; 4],
}

impl Window {
    fn new(grid: &Grid2D, x: f64, snap: bool) -> Option<Window> {
        let n = grid.n();
        let mut t = grid.continuous_index(x);
        let last = (n - 1) as f64;
        if !(t >= -NODE_SNAP && t <= last + NODE_SNAP) {
            return None;
        }
        if snap && (t - t.round()).abs() <= NODE_SNAP {
            t = t.round();
        }
        let t = t.clamp(0.0, last);
        let start = (t.floor() as usize).saturating_sub(1).min(n - 4);
        let s = t - start as f64;
        let (a, b, c, d) = (s, s - 1.0, s - 2.0, s - 3.0);
        let w = [
            -b * c * d / 6.0,
            a * c * d / 2.0,
            -a * b * d / 2.0,
            a * b * c / 6.0,
        ];
        let dw = [
            -(c * d + b * d + b * c) / 6.0,
            (c * d + a * d + a * c) / 2.0,
            -(b * d + a * d + a * b) / 2.0,
            (b * c + a * c + a * b) / 6.0,
        ];
        let h = grid.spacing();
        Some(Window {
            start,
            w,
            dw: dw.map(|v| v / h),
        })
    }
}

fn out_of_domain(p: [f64; 2]) -> Error {
    Error::OutOfDomain { x: p[0], y: p[1] }
}

fn windows(grid: &Grid2D, p: [f64; 2], snap: bool) -> Result<(Window, Window)> {
    match (Window::new(grid, p[0], snap), Window::new(grid, p[1], snap)) {
        (Some(wx), Some(wy)) => Ok((wx, wy)),
        _ => Err(out_of_domain(p)),
    }
}

fn scalar_at(f: &ScalarField, p: [f64; 2]) -> Result<f64> {
    let grid = f.grid();
    let (wx, wy) = windows(grid, p, true)?;
    let mut acc = 0.0;
    for (b, &wyb) in wy.w.iter().enumerate() {
        let mut row = 0.0;
        for (a, &wxa) in wx.w.iter().enumerate() {
            let v = f.at(grid.index(wx.start + a, wy.start + b));
            if !v.is_finite() {
                return Err(out_of_domain(p));
            }
            row += wxa * v;
        }
        acc += wyb * row;
    }
    Ok(acc)
}

pub fn interpolate(f: &ScalarField, pts: &[[f64; 2]]) -> Result<Vec<f64>> {
    pts.par_iter().map(|&p| scalar_at(f, p)).collect()
}

pub fn interpolate_vector(f: &VectorField, pts: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let map = InterpolatedMap::new(f);
    pts.par_iter().map(|&p| map.eval(p).map(|(v, _)| v)).collect()
}

/// A vector field viewed as a smooth map through its bicubic interpolant.
pub struct InterpolatedMap<'a> {
    field: &'a VectorField,
}

impl<'a> InterpolatedMap<'a> {
    pub fn new(field: &'a VectorField) -> Self {
        InterpolatedMap { field }
    }

    /// Value and Jacobian of the interpolant at `p`.
    pub fn eval(&self, p: [f64; 2]) -> Result<([f64; 2], Mat2)> {
        let grid = self.field.grid();
        let (wx, wy) = windows(grid, p, false)?;
        let mut val = [0.0; 2];
        let mut jac = Mat2::default();
        for b in 0..4 {
            for a in 0..4 {
                let v = self.field.at(grid.index(wx.start + a, wy.start + b));
                if !(v[0].is_finite() && v[1].is_finite()) {
                    return Err(out_of_domain(p));
                }
                let w = wx.w[a] * wy.w[b];
                let wdx = wx.dw[a] * wy.w[b];
                let wdy = wx.w[a] * wy.dw[b];
                val[0] += w * v[0];
                val[1] += w * v[1];
                jac.a += wdx * v[0];
                jac.b += wdy * v[0];
                jac.c += wdx * v[1];
                jac.d += wdy * v[1];
            }
        }
        Ok((val, jac))
    }
}

/// Bucketed lookup of the node whose image is nearest to a target.
struct PreimageIndex {
    nodes: Vec<(usize, [f64; 2])>,
    origin: [f64; 2],
    cell: f64,
    side: usize,
    buckets: Vec<Vec<u32>>,
}

impl PreimageIndex {
    fn build(m: &VectorField) -> Result<Self> {
        let grid = m.grid();
        let nodes: Vec<(usize, [f64; 2])> = grid
            .mask_nodes()
            .into_iter()
            .map(|k| (k, m.at(k)))
            .filter(|(_, v)| v[0].is_finite() && v[1].is_finite())
            .collect();
        if nodes.is_empty() {
            return Err(Error::Domain("map has no finite samples inside its mask".into()));
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (_, v) in &nodes {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        let side = grid.n();
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let cell = extent / side as f64 * (1.0 + 1e-9);
        let mut buckets = vec![Vec::new(); side * side];
        for (idx, (_, v)) in nodes.iter().enumerate() {
            let (bi, bj) = Self::bucket_of(lo, cell, side, *v);
            buckets[bj * side + bi].push(idx as u32);
        }
        Ok(PreimageIndex {
            nodes,
            origin: lo,
            cell,
            side,
            buckets,
        })
    }

    fn bucket_of(origin: [f64; 2], cell: f64, side: usize, v: [f64; 2]) -> (usize, usize) {
        let f = |c: usize| (((v[c] - origin[c]) / cell).floor().max(0.0) as usize).min(side - 1);
        (f(0), f(1))
    }

    fn nearest(&self, target: [f64; 2]) -> usize {
        let (bi, bj) = Self::bucket_of(self.origin, self.cell, self.side, target);
        let mut best = (f64::INFINITY, 0usize);
        for ring in 0..self.side {
            // Anything beyond this ring is at least `(ring - 1) * cell` away.
            if best.0.is_finite() && (ring as f64 - 1.0) * self.cell > best.0.sqrt() {
                break;
            }
            let r = ring as isize;
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (x, y) = (bi as isize + di, bj as isize + dj);
                    if x < 0 || y < 0 || x >= self.side as isize || y >= self.side as isize {
                        continue;
                    }
                    for &idx in &self.buckets[y as usize * self.side + x as usize] {
                        let v = self.nodes[idx as usize].1;
                        let d = (v[0] - target[0]).powi(2) + (v[1] - target[1]).powi(2);
                        if d < best.0 || (d == best.0 && (idx as usize) < best.1) {
                            best = (d, idx as usize);
                        }
                    }
                }
            }
        }
        self.nodes[best.1].0
    }
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

fn newton_invert(
    map: &InterpolatedMap<'_>,
    seed: [f64; 2],
    target: [f64; 2],
    lipschitz_lo: f64,
) -> (f64, [f64; 2]) {
    let resid = |x: [f64; 2]| -> Option<([f64; 2], Mat2, f64)> {
        let (v, j) = map.eval(x).ok()?;
        let r = [target[0] - v[0], target[1] - v[1]];
        Some((r, j, norm(r)))
    };
    let Some((mut r, mut jac, mut rn)) = resid(seed) else {
        return (f64::INFINITY, seed);
    };
    let mut x = seed;
    let floor = 1e-15 * (1.0 + norm(target));
    for _ in 0..MAX_NEWTON {
        if rn <= floor {
            break;
        }
        let Some(inv) = jac.inverse() else { break };
        let mut step = inv.mul_vec(r);
        // The Jacobian lower bound limits how far the preimage can be.
        let cap = 2.0 * rn / lipschitz_lo;
        let len = norm(step);
        if len > cap {
            step = [step[0] * cap / len, step[1] * cap / len];
        }
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
            if let Some((tr, tj, tn)) = resid(trial) {
                if tn < rn {
                    accepted = Some((trial, tr, tj, tn));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((nx, nr, nj, nn)) => {
                x = nx;
                r = nr;
                jac = nj;
                rn = nn;
            }
            None => break,
        }
    }
    (rn, x)
}

/// Inverts a discrete bijection `m` at each target.
///
/// `lipschitz_lo` is a lower bound for the Jacobian of `m` (for the rotation
/// map this is `1/L2`). Only nodes inside the mask of `m` seed the search.
pub fn invert_map(
    m: &VectorField,
    targets: &[[f64; 2]],
    lipschitz_lo: f64,
) -> Result<Vec<[f64; 2]>> {
    if !(lipschitz_lo > 0.0 && lipschitz_lo.is_finite()) {
        return Err(Error::config(format!(
            "Jacobian lower bound must be positive, got {lipschitz_lo}"
        )));
    }
    let index = PreimageIndex::build(m)?;
    let map = InterpolatedMap::new(m);
    let grid = m.grid();
    let solved: Vec<(f64, [f64; 2])> = targets
        .par_iter()
        .map(|&t| newton_invert(&map, grid.coord(index.nearest(t)), t, lipschitz_lo))
        .collect();
    let worst = solved
        .iter()
        .zip(targets)
        .map(|((r, _), t)| (*r, *t))
        .fold((0.0, [0.0; 2]), |acc, (r, t)| if !(r <= acc.0) { (r, t) } else { acc });
    if !(worst.0 <= INVERSION_TOL) {
        return Err(Error::InversionFailure {
            worst_residual: worst.0,
            x: worst.1[0],
            y: worst.1[1],
        });
    }
    Ok(solved.into_iter().map(|(_, x)| x).collect())
}

/// `u_rho(x) = u(rho x) / rho^2` sampled on the same grid.
pub fn rescale_potential(u: &ScalarField, rho: f64) -> Result<ScalarField> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::config(format!("rescaling factor must lie in (0, 1], got {rho}")));
    }
    if rho == 1.0 {
        return Ok(u.clone());
    }
    let grid = *u.grid();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.coord(k);
            match scalar_at(u, [rho * x[0], rho * x[1]]) {
                Ok(v) => Ok(v / (rho * rho)),
                Err(e) if grid.in_mask(k) => Err(e),
                Err(_) => Ok(f64::NAN),
            }
        })
        .collect::<Result<_>>()?;
    ScalarField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::unit_disk(33).unwrap()
    }

    #[test]
    fn reproduces_quadratics_and_cubics() {
        let f = ScalarField::from_fn(grid(), |x| 1.0 + x[0] - 2.0 * x[0] * x[1] + x[1].powi(3));
        let pts = [[0.013, -0.77], [0.5, 0.5], [-0.99, 0.99], [0.0, 0.31]];
        for (p, v) in pts.iter().zip(interpolate(&f, &pts).unwrap()) {
            let exact = 1.0 + p[0] - 2.0 * p[0] * p[1] + p[1].powi(3);
            assert!((v - exact).abs() <= 1e-10, "{p:?}");
        }
    }

    #[test]
    fn node_points_return_stored_values() {
        let g = grid();
        let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() + x[1].exp());
        let ks = [g.center_node(), 17, 400, g.len() - 1];
        let pts: Vec<_> = ks.iter().map(|&k| g.coord(k)).collect();
        let v = interpolate(&f, &pts).unwrap();
        for (k, v) in ks.iter().zip(v) {
            assert_eq!(v, f.at(*k));
        }
    }

    #[test]
    fn out_of_domain_names_the_point() {
        let f = ScalarField::zeros(grid());
        match interpolate(&f, &[[1.5, 0.0]]) {
            Err(Error::OutOfDomain { x, y }) => assert_eq!((x, y), (1.5, 0.0)),
            other => panic!("unexpected {other:?}"),
        }
        let g = ScalarField::from_fn(grid(), |x| x[0]).restrict_to_mask();
        assert!(interpolate(&g, &[[0.98, 0.98]]).is_err());
    }

    #[test]
    fn jacobian_of_linear_map() {
        let m = VectorField::from_fn(grid(), |x| [2.0 * x[0] + x[1], -x[0] + 3.0 * x[1]]);
        let (v, j) = InterpolatedMap::new(&m).eval([0.1, -0.2]).unwrap();
        assert!((v[0] - 0.0).abs() < 1e-14 && (v[1] + 0.7).abs() < 1e-14);
        assert!(j.sub(&Mat2::new(2.0, 1.0, -1.0, 3.0)).max_abs() < 1e-12);
    }

    #[test]
    fn inverts_identity_and_scaling() {
        let id = VectorField::from_fn(grid(), |x| x);
        let x = invert_map(&id, &[[0.3, -0.2]], 1.0).unwrap();
        assert!((x[0][0] - 0.3).abs() < 1e-12 && (x[0][1] + 0.2).abs() < 1e-12);
        let twice = VectorField::from_fn(grid(), |x| [2.0 * x[0], 2.0 * x[1]]);
        let x = invert_map(&twice, &[[0.5, 0.5]], 2.0).unwrap();
        assert!((x[0][0] - 0.25).abs() < 1e-12 && (x[0][1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_lower_bound_and_unreachable_targets() {
        let id = VectorField::from_fn(grid(), |x| x);
        assert!(matches!(invert_map(&id, &[[0.0, 0.0]], 0.0), Err(Error::Config(_))));
        assert!(matches!(
            invert_map(&id, &[[5.0, 0.0]], 1.0),
            Err(Error::InversionFailure { .. })
        ));
    }

    #[test]
    fn rescaling_cases() {
        let g = grid();
        let u = ScalarField::from_fn(g, |x| x[0].sin() * x[1]);
        assert_eq!(rescale_potential(&u, 1.0).unwrap(), u);
        assert!(matches!(rescale_potential(&u, 0.0), Err(Error::Config(_))));
        assert!(rescale_potential(&u, 1.5).is_err());

        let q = ScalarField::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        for rho in [0.5, 0.3, 0.9] {
            let r = rescale_potential(&q, rho).unwrap();
            assert!(r.max_abs_diff(&q, 1.0) <= 1e-10);
        }
        let c = ScalarField::from_fn(g, |x| x[0].powi(3));
        let r = rescale_potential(&c, 0.5).unwrap();
        let half = ScalarField::from_fn(g, |x| 0.5 * x[0].powi(3));
        assert!(r.max_abs_diff(&half, 1.0) <= 1e-10);
    }
}
