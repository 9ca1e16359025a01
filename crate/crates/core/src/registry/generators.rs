//! Closed-form test potentials with analytic gradients and Hessians.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField, SymMatField, VectorField};
use crate::mat2::SymMat2;

/// A potential known in closed form.
pub trait AnalyticPotential: Send + Sync {
    fn value(&self, x: [f64; 2]) -> f64;
    fn gradient(&self, x: [f64; 2]) -> [f64; 2];
    fn hessian(&self, x: [f64; 2]) -> SymMat2;
}

/// Parameters shared by the generators; each generator reads what it needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Matrix `M` of the quadratic part `x^T M x / 2`.
    pub m: Option<SymMat2>,
    /// Amplitude of the multiplicative perturbation.
    pub eps: f64,
    /// Polynomial coefficients keyed by exponent pair `(a, b)` of `x1^a x2^b`.
    pub coefficients: BTreeMap<(u32, u32), f64>,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            m: None,
            eps: 0.05,
            coefficients: BTreeMap::new(),
        }
    }
}

pub trait PotentialGenerator: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn build(&self, params: &GeneratorParams) -> Result<Box<dyn AnalyticPotential>>;
}

/// `x^T M x / 2`.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub m: SymMat2,
}

impl AnalyticPotential for Quadratic {
    fn value(&self, x: [f64; 2]) -> f64 {
        let mx = self.m.mul_vec(x);
        0.5 * (x[0] * mx[0] + x[1] * mx[1])
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        self.m.mul_vec(x)
    }
    fn hessian(&self, _: [f64; 2]) -> SymMat2 {
        self.m
    }
}

/// `(x^T M x / 2)(1 + eps sin x1)`.
#[derive(Clone, Copy, Debug)]
pub struct PerturbedQuadratic {
    pub m: SymMat2,
    pub eps: f64,
}

impl AnalyticPotential for PerturbedQuadratic {
    fn value(&self, x: [f64; 2]) -> f64 {
        Quadratic { m: self.m }.value(x) * (1.0 + self.eps * x[0].sin())
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let q = Quadratic { m: self.m }.value(x);
        let mx = self.m.mul_vec(x);
        let s = 1.0 + self.eps * x[0].sin();
        [mx[0] * s + q * self.eps * x[0].cos(), mx[1] * s]
    }
    fn hessian(&self, x: [f64; 2]) -> SymMat2 {
        let q = Quadratic { m: self.m }.value(x);
        let mx = self.m.mul_vec(x);
        let (sin, cos) = x[0].sin_cos();
        let s = 1.0 + self.eps * sin;
        let ec = self.eps * cos;
        SymMat2::new(
            self.m.xx * s + 2.0 * mx[0] * ec - q * self.eps * sin,
            self.m.xy * s + mx[1] * ec,
            self.m.yy * s,
        )
    }
}

/// `sum c_ab x1^a x2^b`.
#[derive(Clone, Debug)]
pub struct Polynomial {
    pub terms: Vec<((u32, u32), f64)>,
}

fn power(x: f64, n: i64) -> f64 {
    if n < 0 {
        0.0
    } else {
        x.powi(n as i32)
    }
}

impl AnalyticPotential for Polynomial {
    fn value(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|&((a, b), c)| c * power(x[0], a as i64) * power(x[1], b as i64))
            .sum()
    }
    fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &((a, b), c) in &self.terms {
            let (a, b) = (a as i64, b as i64);
            g[0] += c * a as f64 * power(x[0], a - 1) * power(x[1], b);
            g[1] += c * b as f64 * power(x[0], a) * power(x[1], b - 1);
        }
        g
    }
    fn hessian(&self, x: [f64; 2]) -> SymMat2 {
        let mut h = SymMat2::ZERO;
        for &((a, b), c) in &self.terms {
            let (a, b) = (a as i64, b as i64);
            let (af, bf) = (a as f64, b as f64);
            h.xx += c * af * (af - 1.0) * power(x[0], a - 2) * power(x[1], b);
            h.xy += c * af * bf * power(x[0], a - 1) * power(x[1], b - 1);
            h.yy += c * bf * (bf - 1.0) * power(x[0], a) * power(x[1], b - 2);
        }
        h
    }
}

struct QuadraticGenerator;
struct SaddleGenerator;
struct PerturbedQuadraticGenerator;
struct CustomCoefficientsGenerator;

/// Highest total degree accepted by the custom polynomial generator.
pub const MAX_CUSTOM_DEGREE: u32 = 6;

impl PotentialGenerator for QuadraticGenerator {
    fn name(&self) -> &'static str {
        "quadratic"
    }
    fn summary(&self) -> &'static str {
        "x^T M x / 2 (default M = I)"
    }
    fn build(&self, p: &GeneratorParams) -> Result<Box<dyn AnalyticPotential>> {
        Ok(Box::new(Quadratic {
            m: p.m.unwrap_or(SymMat2::IDENTITY),
        }))
    }
}

impl PotentialGenerator for SaddleGenerator {
    fn name(&self) -> &'static str {
        "saddle"
    }
    fn summary(&self) -> &'static str {
        "x^T M x / 2 with default M = diag(1, -1), zero phase"
    }
    fn build(&self, p: &GeneratorParams) -> Result<Box<dyn AnalyticPotential>> {
        Ok(Box::new(Quadratic {
            m: p.m.unwrap_or(SymMat2::diag(1.0, -1.0)),
        }))
    }
}

impl PotentialGenerator for PerturbedQuadraticGenerator {
    fn name(&self) -> &'static str {
        "perturbed_quadratic"
    }
    fn summary(&self) -> &'static str {
        "(x^T M x / 2)(1 + eps sin x1) (default M = I, eps = 0.05)"
    }
    fn build(&self, p: &GeneratorParams) -> Result<Box<dyn AnalyticPotential>> {
        if !p.eps.is_finite() {
            return Err(Error::config("eps must be finite"));
        }
        Ok(Box::new(PerturbedQuadratic {
            m: p.m.unwrap_or(SymMat2::IDENTITY),
            eps: p.eps,
        }))
    }
}

impl PotentialGenerator for CustomCoefficientsGenerator {
    fn name(&self) -> &'static str {
        "custom-coefficients"
    }
    fn summary(&self) -> &'static str {
        "sum of c_ab x1^a x2^b for a + b <= 6"
    }
    fn build(&self, p: &GeneratorParams) -> Result<Box<dyn AnalyticPotential>> {
        if p.coefficients.is_empty() {
            return Err(Error::config("custom-coefficients needs at least one coefficient"));
        }
        for (&(a, b), c) in &p.coefficients {
            if a + b > MAX_CUSTOM_DEGREE || !c.is_finite() {
                return Err(Error::config(format!(
                    "coefficient c{a}{b} = {c} is not a finite term of degree <= {MAX_CUSTOM_DEGREE}"
                )));
            }
        }
        Ok(Box::new(Polynomial {
            terms: p.coefficients.iter().map(|(&k, &v)| (k, v)).collect(),
        }))
    }
}

pub(crate) fn builtin() -> Vec<Box<dyn PotentialGenerator>> {
    vec![
        Box::new(QuadraticGenerator),
        Box::new(PerturbedQuadraticGenerator),
        Box::new(SaddleGenerator),
        Box::new(CustomCoefficientsGenerator),
    ]
}

/// A potential sampled on a grid together with its analytic derivatives.
#[derive(Clone, Debug)]
pub struct SampledPotential {
    pub u: ScalarField,
    pub du: VectorField,
    pub d2u: SymMatField,
    /// Largest Hessian spectral norm over the mask.
    pub lambda: f64,
}

/// Samples `p` on `grid`. With `lambda_bound`, fails if the analytic Hessian
/// exceeds it anywhere on the mask.
pub fn sample(p: &dyn AnalyticPotential, grid: Grid2D, lambda_bound: Option<f64>) -> Result<SampledPotential> {
    let coords: Vec<[f64; 2]> = (0..grid.len()).map(|k| grid.coord(k)).collect();
    let u = ScalarField::new(grid, coords.par_iter().map(|&x| p.value(x)).collect())?;
    let du = VectorField::new(grid, coords.par_iter().map(|&x| p.gradient(x)).collect())?;
    let d2u = SymMatField::new(grid, coords.par_iter().map(|&x| p.hessian(x)).collect())?;
    u.validate()?;
    let lambda = grid
        .mask_nodes()
        .into_iter()
        .map(|k| d2u.at(k).spectral_norm())
        .fold(0.0, f64::max);
    if let Some(bound) = lambda_bound {
        if lambda > bound {
            return Err(Error::Generation(format!(
                "Hessian eigenvalue of magnitude {lambda} exceeds the bound {bound}"
            )));
        }
    }
    Ok(SampledPotential { u, du, d2u, lambda })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_hessian(p: &dyn AnalyticPotential, x: [f64; 2]) -> SymMat2 {
        let e = 1e-5;
        let g = |dx: f64, dy: f64| p.gradient([x[0] + dx, x[1] + dy]);
        let (gxp, gxm, gyp, gym) = (g(e, 0.0), g(-e, 0.0), g(0.0, e), g(0.0, -e));
        SymMat2::new(
            (gxp[0] - gxm[0]) / (2.0 * e),
            0.5 * ((gxp[1] - gxm[1]) + (gyp[0] - gym[0])) / (2.0 * e),
            (gyp[1] - gym[1]) / (2.0 * e),
        )
    }

    fn fd_gradient(p: &dyn AnalyticPotential, x: [f64; 2]) -> [f64; 2] {
        let e = 1e-6;
        [
            (p.value([x[0] + e, x[1]]) - p.value([x[0] - e, x[1]])) / (2.0 * e),
            (p.value([x[0], x[1] + e]) - p.value([x[0], x[1] - e])) / (2.0 * e),
        ]
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        let potentials: Vec<Box<dyn AnalyticPotential>> = vec![
            Box::new(PerturbedQuadratic { m: SymMat2::new(1.0, 0.3, -0.5), eps: 0.2 }),
            Box::new(Polynomial { terms: vec![((3, 0), 1.0), ((1, 2), -3.0), ((2, 2), 0.5)] }),
        ];
        for p in &potentials {
            for x in [[0.3, -0.4], [-0.7, 0.1], [0.0, 0.9]] {
                let g = p.gradient(x);
                let fg = fd_gradient(p.as_ref(), x);
                assert!((g[0] - fg[0]).abs() < 1e-8 && (g[1] - fg[1]).abs() < 1e-8);
                assert!(p.hessian(x).sub(&fd_hessian(p.as_ref(), x)).max_abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lambda_bound_is_enforced() {
        let grid = Grid2D::unit_disk(33).unwrap();
        let q = Quadratic { m: SymMat2::diag(2.0, 0.5) };
        assert!(matches!(sample(&q, grid, Some(1.5)), Err(Error::Generation(_))));
        assert_eq!(sample(&q, grid, Some(2.0)).unwrap().lambda, 2.0);
    }
}
