//! Closed-form 2x2 algebra checked against general dense linear algebra.

use std::f64::consts::FRAC_PI_2;

use lagrograph::geometry::{metric_of, phase_of};
use lagrograph::mat2::SymMat2;
use lagrograph::rotation::{hessian_pullback, hessian_pushforward};
use nalgebra::{Matrix2, SymmetricEigen};
use proptest::prelude::*;

fn dense(m: &SymMat2) -> Matrix2<f64> {
    Matrix2::new(m.xx, m.xy, m.xy, m.yy)
}

fn sorted_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let e = SymmetricEigen::new(*m).eigenvalues;
    (e[0].min(e[1]), e[0].max(e[1]))
}

fn max_entry_diff(a: &SymMat2, b: &Matrix2<f64>) -> f64 {
    (a.xx - b[(0, 0)])
        .abs()
        .max((a.xy - b[(0, 1)]).abs())
        .max((a.xy - b[(1, 0)]).abs())
        .max((a.yy - b[(1, 1)]).abs())
}

fn sym() -> impl Strategy<Value = SymMat2> {
    (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b, c)| SymMat2::new(a, b, c))
}

proptest! {
    #[test]
    fn closed_form_eigenvalues_match_dense_solver(m in sym()) {
        let (lo, hi) = m.eigenvalues();
        let (e_lo, e_hi) = sorted_eigenvalues(&dense(&m));
        let scale = 1.0 + m.max_abs();
        prop_assert!((lo - e_lo).abs() <= 1e-13 * scale && (hi - e_hi).abs() <= 1e-13 * scale);
    }

    #[test]
    fn phase_is_the_sum_of_eigenvalue_arctangents(m in sym()) {
        let (a, b) = sorted_eigenvalues(&dense(&m));
        prop_assert!((phase_of(&m) - (a.atan() + b.atan())).abs() <= 1e-13);
    }

    #[test]
    fn induced_metric_is_identity_plus_square(m in sym()) {
        let h = dense(&m);
        let g = Matrix2::identity() + h * h;
        prop_assert!(max_entry_diff(&metric_of(&m), &g) <= 1e-12 * (1.0 + g.abs().max()));
    }

    #[test]
    fn pushforward_matches_the_dense_mobius_formula(m in sym(), t in 0.01..1.0f64) {
        // Admissible angle: the largest eigenvalue stays below cot(delta).
        let bound = m.spectral_norm();
        let delta = t * (FRAC_PI_2 - bound.atan()) / 2.0;
        let (s, c) = delta.sin_cos();
        let a = dense(&m);
        let i = Matrix2::identity();
        let expected = (i * s + a * c) * (i * c - a * s).try_inverse().unwrap();
        let got = hessian_pushforward(&m, delta).unwrap();
        prop_assert!(max_entry_diff(&got, &expected) <= 1e-11 * (1.0 + expected.abs().max()));
        let back = hessian_pullback(&got, delta).unwrap();
        prop_assert!(back.sub(&m).max_abs() <= 1e-11 * (1.0 + bound));
    }
}
