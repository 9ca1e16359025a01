//! Split of the masked disk into interior unknowns and the Dirichlet ring.

use crate::error::{Error, Result};
use crate::fields::Grid2D;

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Interior nodes are mask nodes whose full 9-point neighbourhood lies in
/// the mask; the remaining mask nodes form the ring carrying boundary data.
#[derive(Clone, Debug)]
pub struct Domain {
    grid: Grid2D,
    interior: Vec<usize>,
    ring: Vec<usize>,
    slot: Vec<usize>,
}

impl Domain {
    pub const NO_SLOT: usize = usize::MAX;

    pub fn new(grid: Grid2D) -> Result<Self> {
        let mut interior = Vec::new();
        let mut ring = Vec::new();
        let mut slot = vec![Self::NO_SLOT; grid.len()];
        for k in grid.mask_nodes() {
            let inside = NEIGHBOURS
                .iter()
                .all(|&(di, dj)| grid.offset(k, di, dj).is_some_and(|m| grid.in_mask(m)));
            if inside {
                slot[k] = interior.len();
                interior.push(k);
            } else {
                ring.push(k);
            }
        }
        if interior.is_empty() {
            return Err(Error::config("mask has no interior node with a full 9-point stencil"));
        }
        Ok(Domain {
            grid,
            interior,
            ring,
            slot,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn ring(&self) -> &[usize] {
        &self.ring
    }

    /// Unknown index of node `k`, or [`Domain::NO_SLOT`].
    #[inline]
    pub fn slot(&self, k: usize) -> usize {
        self.slot[k]
    }

    /// Interior nodes at least `cells` grid steps (in the max norm) from any
    /// ring node.
    pub fn deep_interior(&self, cells: usize) -> Vec<usize> {
        let c = cells as isize;
        self.interior
            .iter()
            .copied()
            .filter(|&k| {
                (-c..=c).all(|dj| {
                    (-c..=c).all(|di| {
                        self.grid
                            .offset(k, di, dj)
                            .is_some_and(|m| self.slot[m] != Self::NO_SLOT)
                    })
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_separates_interior_from_exterior() {
        let g = Grid2D::unit_disk(33).unwrap();
        let d = Domain::new(g).unwrap();
        assert_eq!(d.interior().len() + d.ring().len(), g.mask_nodes().len());
        for &k in d.interior() {
            for (di, dj) in NEIGHBOURS {
                assert!(g.in_mask(g.offset(k, di, dj).unwrap()));
            }
        }
        assert!(d.deep_interior(1).len() < d.interior().len());
    }
}
