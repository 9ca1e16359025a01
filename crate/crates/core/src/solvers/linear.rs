//! Matrix-free Krylov solvers with Jacobi preconditioning.
//!
//! Dot products are summed over fixed-size chunks and the chunk sums are
//! added sequentially, so results are bit-identical for any thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

pub(crate) trait LinearOperator: Sync {
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn diagonal(&self) -> Vec<f64>;
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += t x`.
fn axpy(t: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += t * x);
}

fn jacobi(diag: &[f64]) -> Result<Vec<f64>> {
    diag.iter()
        .map(|&d| {
            if d != 0.0 && d.is_finite() {
                Ok(1.0 / d)
            } else {
                Err(Error::LinearSolver(format!("zero or non-finite diagonal entry {d}")))
            }
        })
        .collect()
}

fn precondition(inv: &[f64], r: &[f64], z: &mut [f64]) {
    z.par_iter_mut()
        .zip(r.par_iter().zip(inv.par_iter()))
        .for_each(|(z, (r, m))| *z = r * m);
}

#[derive(Clone, Debug)]
pub(crate) struct LinearOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `|b - Ax| / |b|` after each iteration, starting
    /// with the initial guess.
    pub history: Vec<f64>,
}

fn residual(op: &impl LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    op.apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    r
}

/// Preconditioned conjugate gradients for symmetric positive definite `op`.
pub(crate) fn cg(op: &impl LinearOperator, b: &[f64], x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<LinearOutcome> {
    let inv = jacobi(&op.diagonal())?;
    let scale = norm(b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let mut r = residual(op, b, &x);
    let mut history = vec![norm(&r) / scale];
    if history[0] <= tol {
        return Ok(LinearOutcome { x, iterations: 0, history });
    }
    let mut z = vec![0.0; b.len()];
    precondition(&inv, &r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; b.len()];
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver(format!(
                "conjugate gradients met non-positive curvature {pap:e} at iteration {it}"
            )));
        }
        let a = rz / pap;
        axpy(a, &p, &mut x);
        axpy(-a, &ap, &mut r);
        let rel = norm(&r) / scale;
        history.push(rel);
        if rel <= tol {
            return Ok(LinearOutcome { x, iterations: it, history });
        }
        precondition(&inv, &r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(z.par_iter()).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::LinearSolver(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations (last {:e})",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Right-preconditioned BiCGSTAB for the nonsymmetric Newton systems.
pub(crate) fn bicgstab(
    op: &impl LinearOperator,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LinearOutcome> {
    let inv = jacobi(&op.diagonal())?;
    let n = b.len();
    let scale = norm(b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let mut r = residual(op, b, &x);
    let mut history = vec![norm(&r) / scale];
    if history[0] <= tol {
        return Ok(LinearOutcome { x, iterations: 0, history });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::LinearSolver(format!("BiCGSTAB breakdown at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(p, (r, v))| *p = r + beta * (*p - omega * v));
        precondition(&inv, &p, &mut y);
        op.apply(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(Error::LinearSolver(format!("BiCGSTAB breakdown at iteration {it}")));
        }
        alpha = rho / rv;
        s.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(s, (r, v))| *s = r - alpha * v);
        let s_rel = norm(&s) / scale;
        if s_rel <= tol {
            axpy(alpha, &y, &mut x);
            history.push(s_rel);
            return Ok(LinearOutcome { x, iterations: it, history });
        }
        precondition(&inv, &s, &mut z);
        op.apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        axpy(alpha, &y, &mut x);
        axpy(omega, &z, &mut x);
        r.par_iter_mut()
            .zip(s.par_iter().zip(t.par_iter()))
            .for_each(|(r, (s, t))| *r = s - omega * t);
        let rel = norm(&r) / scale;
        history.push(rel);
        if rel <= tol {
            return Ok(LinearOutcome { x, iterations: it, history });
        }
    }
    Err(Error::LinearSolver(format!(
        "BiCGSTAB did not reach {tol:e} in {max_iter} iterations (last {:e})",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}
