//! Closed-form 2x2 matrix kernels.
//!
//! Everything here is explicit arithmetic: eigenvalues come from the
//! trace/discriminant formula and inverses from the adjugate, so results are
//! reproducible to the last bit and cheap enough to run at every grid node.

use serde::{Deserialize, Serialize};

/// Determinant magnitude below which an inverse is refused.
pub const DET_THRESHOLD: f64 = 1e-14;

/// Symmetric 2x2 matrix stored as its three independent entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

/// General 2x2 matrix, row-major `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };
    pub const IDENTITY: SymMat2 = SymMat2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat2 { xx, xy, yy }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        SymMat2 {
            xx: a,
            xy: 0.0,
            yy: b,
        }
    }

    pub fn scalar(t: f64) -> Self {
        SymMat2::diag(t, t)
    }

    /// Builds `R diag(l1, l2) R^T` with `R` the rotation by `angle`.
    pub fn from_eigen(l1: f64, l2: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        SymMat2 {
            xx: l1 * c * c + l2 * s * s,
            xy: (l1 - l2) * c * s,
            yy: l1 * s * s + l2 * c * c,
        }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let radius = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        (mean - radius, mean + radius)
    }

    pub fn spectral_norm(&self) -> f64 {
        let (lo, hi) = self.eigenvalues();
        lo.abs().max(hi.abs())
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }

    pub fn scale(&self, t: f64) -> Self {
        SymMat2::new(t * self.xx, t * self.xy, t * self.yy)
    }

    pub fn add(&self, o: &SymMat2) -> Self {
        SymMat2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(&self, o: &SymMat2) -> Self {
        SymMat2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    /// `H^2`, symmetric by construction.
    pub fn square(&self) -> Self {
        SymMat2 {
            xx: self.xx * self.xx + self.xy * self.xy,
            xy: self.xy * (self.xx + self.yy),
            yy: self.xy * self.xy + self.yy * self.yy,
        }
    }

    /// Adjugate `[[yy, -xy], [-xy, xx]]`.
    pub fn adjugate(&self) -> Self {
        SymMat2::new(self.yy, -self.xy, self.xx)
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.abs() < DET_THRESHOLD || !det.is_finite() {
            return None;
        }
        Some(self.adjugate().scale(1.0 / det))
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    pub fn to_mat(&self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn scalar(t: f64) -> Self {
        Mat2::new(t, 0.0, 0.0, t)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    pub fn scale(&self, t: f64) -> Mat2 {
        Mat2::new(t * self.a, t * self.b, t * self.c, t * self.d)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det.abs() < DET_THRESHOLD || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Mat2::new(self.d * inv, -self.b * inv, -self.c * inv, self.a * inv))
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn max_abs(&self) -> f64 {
        self.a
            .abs()
            .max(self.b.abs())
            .max(self.c.abs())
            .max(self.d.abs())
    }

    /// Symmetric part; exact when the matrix is already symmetric.
    pub fn symmetric_part(&self) -> SymMat2 {
        SymMat2::new(self.a, 0.5 * (self.b + self.c), self.d)
    }

    /// Largest singular value, closed form.
    pub fn operator_norm(&self) -> f64 {
        let ata = SymMat2::new(
            self.a * self.a + self.c * self.c,
            self.a * self.b + self.c * self.d,
            self.b * self.b + self.d * self.d,
        );
        ata.eigenvalues().1.max(0.0).sqrt()
    }
}

impl From<SymMat2> for Mat2 {
    fn from(m: SymMat2) -> Self {
        m.to_mat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_offdiagonal() {
        assert_eq!(SymMat2::diag(3.0, -1.0).eigenvalues(), (-1.0, 3.0));
        assert_eq!(SymMat2::new(0.0, 1.0, 0.0).eigenvalues(), (-1.0, 1.0));
    }

    #[test]
    fn from_eigen_round_trips() {
        let m = SymMat2::from_eigen(2.0, -0.5, 0.7);
        let (lo, hi) = m.eigenvalues();
        assert!((lo + 0.5).abs() < 1e-14);
        assert!((hi - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_refuses_singular() {
        assert!(SymMat2::diag(1.0, 0.0).inverse().is_none());
        let m = SymMat2::new(2.0, 1.0, 3.0);
        let p = m.to_mat().mul(&m.inverse().unwrap().to_mat());
        assert!(p.sub(&Mat2::IDENTITY).max_abs() < 1e-15);
    }

    #[test]
    fn square_matches_product() {
        let m = SymMat2::new(0.3, -1.2, 2.5);
        let p = m.to_mat().mul(&m.to_mat());
        assert!(p.sub(&m.square().to_mat()).max_abs() < 1e-14);
    }

    #[test]
    fn operator_norm_of_symmetric_is_spectral() {
        let m = SymMat2::new(1.0, 2.0, -3.0);
        assert!((m.to_mat().operator_norm() - m.spectral_norm()).abs() < 1e-13);
    }
}
