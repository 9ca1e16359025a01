//! Numerical laboratory for two-dimensional Lagrangian gradient graphs.
//!
//! The crate samples potentials `u` on masked uniform grids and provides the
//! Lagrangian phase and induced metric, the rotation of the gradient graph
//! `{(x, Du(x))}` together with its constant budget and Hessian identities,
//! solvers for the special Lagrangian and Hamiltonian stationary equations,
//! and Hölder-norm estimators for the interior `C^{2,alpha}` estimate.

// Validation uses `!(x > 0.0)` and friends on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod mat2;
pub mod registry;
pub mod rng;
pub mod rotation;
pub mod solvers;

pub use error::{Error, Result};
