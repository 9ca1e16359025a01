//! Conservative 9-point discretisation of `div(a grad w)`.
//!
//! The tensor `a = [[a11, b], [b, a22]]` is split nodewise as
//!
//! `(a11 - beta) e1 e1 + (a22 - beta) e2 e2
//!   + (beta + b)/2 d+ d+ + (beta - b)/2 d- d-`,  `d± = (1, ±1)`,
//!
//! and each direction contributes a face-flux difference whose face weight is
//! the average of the two endpoint coefficients. With
//! `|b| <= beta <= min(a11, a22)` every weight is non-negative, the matrix is
//! symmetric, and the discrete maximum principle holds. `beta` is the smooth
//! `sqrt(b^2 + tau^2)` with `tau` a quarter of the harmonic mean of
//! `a11, a22`, so the weights stay smooth where `b` changes sign (a kinked
//! split such as `a11 - |b|` loses an order of consistency there). Where
//! `beta` would exceed `min(a11, a22)` it is capped, and where even `|b|` does
//! the off-diagonal entry is clipped and the clip is counted.

use rayon::prelude::*;

use super::domain::Domain;
use super::linear::LinearOperator;
use crate::error::Result;
use crate::fields::SymMatField;
use crate::mat2::SymMat2;

/// Offsets of the four stencil directions, each followed by its reverse.
const DIRECTIONS: [[(isize, isize); 2]; 4] = [
    [(1, 0), (-1, 0)],
    [(0, 1), (0, -1)],
    [(1, 1), (-1, -1)],
    [(1, -1), (-1, 1)],
];

/// Directional weights `[x, y, (1,1), (1,-1)]` of one node, and whether the
/// off-diagonal entry had to be clipped.
fn split(a: &SymMat2) -> ([f64; 4], bool) {
    let m = a.xx.min(a.yy);
    let clipped = a.xy.abs() > m;
    let b = a.xy.clamp(-m, m);
    let tau = 0.5 * a.xx * a.yy / (a.xx + a.yy);
    let beta = b.hypot(tau).min(m);
    (
        [a.xx - beta, a.yy - beta, 0.5 * (beta + b), 0.5 * (beta - b)],
        clipped,
    )
}

/// `sqrt(det g) g^{-1}`, the coefficient of the Laplace–Beltrami operator in
/// divergence form.
pub fn beltrami_coefficient(g: &SymMat2) -> SymMat2 {
    g.adjugate().scale(1.0 / g.det().sqrt())
}

#[derive(Clone, Debug)]
pub(crate) struct FluxOperator<'d> {
    domain: &'d Domain,
    /// For each interior unknown: the eight neighbour nodes with weights.
    stencils: Vec<[(usize, f64); 8]>,
    diag: Vec<f64>,
    pub clip_events: usize,
}

impl<'d> FluxOperator<'d> {
    /// Operator for the tensor field `a`, which must be finite on the mask.
    pub fn new(domain: &'d Domain, a: &SymMatField) -> Result<Self> {
        let grid = domain.grid();
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let mut weights = vec![[0.0; 4]; grid.len()];
        let mut clip_events = 0;
        for &k in domain.interior().iter().chain(domain.ring()) {
            let (w, clipped) = split(&a.at(k));
            weights[k] = w;
            clip_events += usize::from(clipped && domain.slot(k) != Domain::NO_SLOT);
        }
        let stencils: Vec<[(usize, f64); 8]> = domain
            .interior()
            .par_iter()
            .map(|&k| {
                let mut s = [(0, 0.0); 8];
                for (d, pair) in DIRECTIONS.iter().enumerate() {
                    for (e, &(di, dj)) in pair.iter().enumerate() {
                        let m = grid.offset(k, di, dj).expect("interior stencil is on the grid");
                        s[2 * d + e] = (m, 0.5 * (weights[k][d] + weights[m][d]) * inv_h2);
                    }
                }
                s
            })
            .collect();
        let diag = stencils.iter().map(|s| s.iter().map(|&(_, w)| w).sum()).collect();
        Ok(FluxOperator {
            domain,
            stencils,
            diag,
            clip_events,
        })
    }

    /// `div(a grad w)` at interior unknown `i` for full-grid values `w`.
    pub fn divergence(&self, i: usize, w: &[f64]) -> f64 {
        let k = self.domain.interior()[i];
        self.stencils[i].iter().map(|&(m, wt)| wt * (w[m] - w[k])).sum()
    }

    /// Right-hand side contribution of the Dirichlet values in `boundary`.
    pub fn boundary_rhs(&self, boundary: &[f64]) -> Vec<f64> {
        self.stencils
            .par_iter()
            .map(|s| {
                s.iter()
                    .filter(|&&(m, _)| self.domain.slot(m) == Domain::NO_SLOT)
                    .map(|&(m, w)| w * boundary[m])
                    .sum()
            })
            .collect()
    }
}

/// The assembled operator is `-div(a grad .)` on the unknowns with zero
/// Dirichlet data, which is symmetric positive definite.
impl LinearOperator for FluxOperator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let dom = self.domain;
        y.par_iter_mut().enumerate().for_each(|(i, y)| {
            let mut acc = self.diag[i] * x[i];
            for &(m, w) in &self.stencils[i] {
                let j = dom.slot(m);
                if j != Domain::NO_SLOT {
                    acc -= w * x[j];
                }
            }
            *y = acc;
        });
    }

    fn diagonal(&self) -> Vec<f64> {
        self.diag.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_reassembles_the_tensor() {
        let a = SymMat2::new(2.0, -0.7, 1.5);
        let ([wx, wy, wp, wm], clipped) = split(&a);
        assert!(!clipped);
        // x-direction e1e1, y-direction e2e2, diagonals (1,±1)(1,±1)^T.
        let back = SymMat2::new(wx + wp + wm, wp - wm, wy + wp + wm);
        assert!([wx, wy, wp, wm].iter().all(|&w| w >= 0.0));
        assert!(back.sub(&a).max_abs() < 1e-15);
        assert!(split(&SymMat2::new(1.0, 2.0, 3.0)).1);
    }

    #[test]
    fn beltrami_coefficient_of_scaled_identity() {
        assert_eq!(beltrami_coefficient(&SymMat2::scalar(2.0)), SymMat2::IDENTITY);
    }
}
