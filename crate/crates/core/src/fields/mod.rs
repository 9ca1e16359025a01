//! Sampled fields on a uniform square grid masked to a centred disk.
//!
//! Node `(i, j)` sits at `x = (2i - (n - 1)) w / (n - 1)` (and likewise for
//! `j`), so the grid is exactly symmetric about the origin. Storage is
//! row-major with `j` (the second coordinate) as the row index.

mod calculus;
mod interp;
mod io;

pub use calculus::{gradient, hessian};
pub use interp::{
    interpolate, interpolate_vector, invert_map, rescale_potential, InterpolatedMap,
};
pub use io::{read_field, write_field, AnyField, FieldHeader, FieldKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat2::SymMat2;

pub const MIN_NODES_PER_SIDE: usize = 17;

/// Relative slack used when deciding whether a node lies inside a disk.
const DISK_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    n_per_side: usize,
    half_width: f64,
    mask_radius: f64,
}

impl Grid2D {
    pub fn new(n_per_side: usize, half_width: f64, mask_radius: f64) -> Result<Self> {
        if n_per_side < MIN_NODES_PER_SIDE {
            return Err(Error::config(format!(
                "grid needs at least {MIN_NODES_PER_SIDE} nodes per side, got {n_per_side}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::config(format!("half width must be positive, got {half_width}")));
        }
        if !(mask_radius > 0.0 && mask_radius <= half_width) {
            return Err(Error::config(format!(
                "mask radius {mask_radius} must lie in (0, {half_width}]"
            )));
        }
        let grid = Grid2D {
            n_per_side,
            half_width,
            mask_radius,
        };
        if !(0..grid.len()).any(|k| grid.in_mask(k)) {
            return Err(Error::config("mask contains no grid node"));
        }
        Ok(grid)
    }

    /// Grid covering `[-1, 1]^2` masked to the unit disk.
    pub fn unit_disk(n_per_side: usize) -> Result<Self> {
        Grid2D::new(n_per_side, 1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n_per_side
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn mask_radius(&self) -> f64 {
        self.mask_radius
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_per_side - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n_per_side * self.n_per_side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn with_mask_radius(&self, mask_radius: f64) -> Result<Self> {
        Grid2D::new(self.n_per_side, self.half_width, mask_radius)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_per_side + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n_per_side, k / self.n_per_side)
    }

    #[inline]
    pub fn coord_1d(&self, i: usize) -> f64 {
        let m = (self.n_per_side - 1) as f64;
        (2.0 * i as f64 - m) * self.half_width / m
    }

    #[inline]
    pub fn coord(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        [self.coord_1d(i), self.coord_1d(j)]
    }

    /// Continuous index of a coordinate; node `i` maps to exactly `i` when the
    /// coordinate was produced by [`Grid2D::coord_1d`] up to rounding.
    #[inline]
    pub fn continuous_index(&self, x: f64) -> f64 {
        (x + self.half_width) / self.spacing()
    }

    pub fn in_disk(&self, k: usize, radius: f64) -> bool {
        let [x, y] = self.coord(k);
        x * x + y * y <= radius * radius * (1.0 + DISK_SLACK)
    }

    pub fn in_mask(&self, k: usize) -> bool {
        self.in_disk(k, self.mask_radius)
    }

    /// Node indices with `|x| <= radius`.
    pub fn disk_nodes(&self, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.in_disk(k, radius)).collect()
    }

    pub fn mask_nodes(&self) -> Vec<usize> {
        self.disk_nodes(self.mask_radius)
    }

    /// Neighbour at integer offset, if it lies on the grid.
    #[inline]
    pub fn offset(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = self.ij(k);
        let ni = i as isize + di;
        let nj = j as isize + dj;
        let n = self.n_per_side as isize;
        if ni < 0 || nj < 0 || ni >= n || nj >= n {
            None
        } else {
            Some(self.index(ni as usize, nj as usize))
        }
    }

    /// Node closest to the origin.
    pub fn center_node(&self) -> usize {
        let c = (self.n_per_side - 1) / 2;
        self.index(c, c)
    }

    /// Mirror image `-x` of node `k`; exact because the grid is symmetric.
    pub fn antipode(&self, k: usize) -> usize {
        let (i, j) = self.ij(k);
        let m = self.n_per_side - 1;
        self.index(m - i, m - j)
    }

    /// Every `stride`-th node, keeping the symmetric layout.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !(self.n_per_side - 1).is_multiple_of(stride) {
            return Err(Error::config(format!(
                "stride {stride} does not divide {} cells",
                self.n_per_side - 1
            )));
        }
        Grid2D::new(
            (self.n_per_side - 1) / stride + 1,
            self.half_width,
            self.mask_radius,
        )
    }
}

macro_rules! field_common {
    ($name:ident, $value:ty) => {
        impl $name {
            pub fn new(grid: Grid2D, values: Vec<$value>) -> Result<Self> {
                if values.len() != grid.len() {
                    return Err(Error::config(format!(
                        "expected {} node values, got {}",
                        grid.len(),
                        values.len()
                    )));
                }
                Ok($name { grid, values })
            }

            pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> $value) -> Self {
                let values = (0..grid.len()).map(|k| f(grid.coord(k))).collect();
                $name { grid, values }
            }

            pub fn grid(&self) -> &Grid2D {
                &self.grid
            }

            pub fn values(&self) -> &[$value] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [$value] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<$value> {
                self.values
            }

            #[inline]
            pub fn at(&self, k: usize) -> $value {
                self.values[k]
            }

            /// Same data with a different mask radius.
            pub fn with_mask_radius(&self, radius: f64) -> Result<Self> {
                Ok($name {
                    grid: self.grid.with_mask_radius(radius)?,
                    values: self.values.clone(),
                })
            }

            /// Restriction to every `stride`-th node.
            pub fn subsample(&self, stride: usize) -> Result<Self> {
                let coarse = self.grid.coarsen(stride)?;
                let values = (0..coarse.len())
                    .map(|k| {
                        let (i, j) = coarse.ij(k);
                        self.values[self.grid.index(i * stride, j * stride)]
                    })
                    .collect();
                Ok($name {
                    grid: coarse,
                    values,
                })
            }
        }
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    values: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymMatField {
    grid: Grid2D,
    values: Vec<SymMat2>,
}

field_common!(ScalarField, f64);
field_common!(VectorField, [f64; 2]);
field_common!(SymMatField, SymMat2);

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Fails if any unmasked node carries a non-finite value.
    pub fn validate(&self) -> Result<()> {
        match (0..self.grid.len()).find(|&k| self.grid.in_mask(k) && !self.values[k].is_finite()) {
            Some(k) => Err(Error::Domain(format!("non-finite value at unmasked node {k}"))),
            None => Ok(()),
        }
    }

    /// Copy with every node outside the mask set to NaN.
    pub fn restrict_to_mask(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.grid.len() {
            if !self.grid.in_mask(k) {
                out.values[k] = f64::NAN;
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Largest `|a - b|` over nodes inside `radius` where both are finite.
    pub fn max_abs_diff(&self, other: &ScalarField, radius: f64) -> f64 {
        self.grid
            .disk_nodes(radius)
            .into_iter()
            .filter(|&k| self.values[k].is_finite() && other.values[k].is_finite())
            .map(|k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }
}

impl VectorField {
    pub fn validate(&self) -> Result<()> {
        match (0..self.grid.len()).find(|&k| {
            self.grid.in_mask(k) && !(self.values[k][0].is_finite() && self.values[k][1].is_finite())
        }) {
            Some(k) => Err(Error::Domain(format!("non-finite vector at unmasked node {k}"))),
            None => Ok(()),
        }
    }
}

impl SymMatField {
    pub fn constant(grid: Grid2D, m: SymMat2) -> Self {
        SymMatField {
            grid,
            values: vec![m; grid.len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (0..self.grid.len()).find(|&k| self.grid.in_mask(k) && !self.values[k].is_finite()) {
            Some(k) => Err(Error::Domain(format!("non-finite matrix at unmasked node {k}"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_symmetry() {
        let g = Grid2D::new(33, 0.7, 0.5).unwrap();
        assert_eq!(g.spacing(), 2.0 * 0.7 / 32.0);
        assert_eq!(g.coord(g.center_node()), [0.0, 0.0]);
        for k in [0, 5, 100, 700] {
            let a = g.coord(k);
            let b = g.coord(g.antipode(k));
            assert_eq!(a, [-b[0], -b[1]]);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid2D::new(16, 1.0, 1.0), Err(Error::Config(_))));
        assert!(Grid2D::new(17, 1.0, 1.5).is_err());
        assert!(Grid2D::new(17, 1.0, 0.0).is_err());
        assert!(Grid2D::new(17, -1.0, 0.5).is_err());
    }

    #[test]
    fn unit_disk_contains_axis_endpoints() {
        let g = Grid2D::unit_disk(65).unwrap();
        let k = g.index(64, 32);
        assert_eq!(g.coord(k), [1.0, 0.0]);
        assert!(g.in_mask(k));
        assert!(!g.in_mask(g.index(64, 33)));
    }

    #[test]
    fn subsample_keeps_nodes() {
        let g = Grid2D::unit_disk(65).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let c = f.subsample(2).unwrap();
        assert_eq!(c.grid().n(), 33);
        for k in 0..c.grid().len() {
            let x = c.grid().coord(k);
            assert!((c.at(k) - (x[0] + 10.0 * x[1])).abs() < 1e-15);
        }
    }
}
