//! Hölder seminorm estimation over node pairs.
//!
//! Small node sets are scanned exhaustively. Larger ones use a deterministic
//! pair sample: every node paired with the node nearest the ball centre,
//! every node paired with its mirror image, and a seeded random sample
//! stratified by dyadic pair distance. The best sampled pairs are then
//! refined by a short greedy local search over neighbouring nodes.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField, SymMatField};
use crate::rng;

pub const MIN_PAIR_BUDGET: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolderSampling {
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for HolderSampling {
    fn default() -> Self {
        HolderSampling {
            pair_budget: 200_000,
            seed: 0x5eed,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("Hölder exponent must lie in (0, 1], got {alpha}")))
    }
}

fn ball_nodes(grid: &Grid2D, radius: f64, finite: impl Fn(usize) -> bool) -> Result<Vec<usize>> {
    let nodes: Vec<usize> = grid.disk_nodes(radius).into_iter().filter(|&k| finite(k)).collect();
    if nodes.len() < 2 {
        return Err(Error::Domain(format!(
            "ball of radius {radius} holds {} usable nodes; need at least 2",
            nodes.len()
        )));
    }
    Ok(nodes)
}

fn quotient(grid: &Grid2D, alpha: f64, p: usize, q: usize, diff: f64) -> f64 {
    let a = grid.coord(p);
    let b = grid.coord(q);
    diff / (a[0] - b[0]).hypot(a[1] - b[1]).powf(alpha)
}

fn exhaustive_max<D>(grid: &Grid2D, nodes: &[usize], alpha: f64, diff: &D) -> f64
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let p = nodes[i];
            nodes[i + 1..]
                .iter()
                .map(|&q| quotient(grid, alpha, p, q, diff(p, q)))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn sampled_pairs(grid: &Grid2D, nodes: &[usize], radius: f64, sampling: &HolderSampling) -> Vec<(usize, usize)> {
    let mut member = vec![false; grid.len()];
    for &k in nodes {
        member[k] = true;
    }
    let centre = *nodes
        .iter()
        .min_by(|&&a, &&b| {
            let [ax, ay] = grid.coord(a);
            let [bx, by] = grid.coord(b);
            (ax * ax + ay * ay).total_cmp(&(bx * bx + by * by))
        })
        .expect("nonempty");
    let mut pairs: Vec<(usize, usize)> = nodes.iter().filter(|&&q| q != centre).map(|&q| (centre, q)).collect();
    pairs.extend(
        nodes
            .iter()
            .map(|&p| (p, grid.antipode(p)))
            .filter(|&(p, q)| p < q && member[q]),
    );

    let h = grid.spacing();
    let strata = (1..)
        .take_while(|k| h * 2f64.powi(k - 1) <= 2.0 * radius)
        .count()
        .max(1);
    let per = sampling.pair_budget.saturating_sub(pairs.len()).max(strata) / strata;
    let mut rng = rng::stream(sampling.seed, "holder-pairs");
    for k in 0..strata {
        let lo = h * 2f64.powi(k as i32);
        let hi = 2.0 * lo;
        let mut taken = 0;
        for _ in 0..4 * per {
            if taken == per {
                break;
            }
            let p = nodes[rng.gen_range(0..nodes.len())];
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let len = rng.gen_range(lo..hi);
            let x = grid.coord(p);
            let ti = grid.continuous_index(x[0] + len * angle.cos()).round();
            let tj = grid.continuous_index(x[1] + len * angle.sin()).round();
            let last = (grid.n() - 1) as f64;
            if !(0.0..=last).contains(&ti) || !(0.0..=last).contains(&tj) {
                continue;
            }
            let q = grid.index(ti as usize, tj as usize);
            if q != p && member[q] {
                pairs.push((p, q));
                taken += 1;
            }
        }
    }
    pairs
}

fn seminorm_over<D>(grid: &Grid2D, nodes: &[usize], radius: f64, alpha: f64, sampling: &HolderSampling, diff: D) -> f64
where
    D: Fn(usize, usize) -> f64 + Sync,
{
    let all_pairs = nodes.len() * (nodes.len() - 1) / 2;
    if all_pairs <= sampling.pair_budget {
        return exhaustive_max(grid, nodes, alpha, &diff);
    }
    let mut member = vec![false; grid.len()];
    for &k in nodes {
        member[k] = true;
    }
    let q = |p: usize, r: usize| quotient(grid, alpha, p, r, diff(p, r));
    let mut scored: Vec<(f64, (usize, usize))> = sampled_pairs(grid, nodes, radius, sampling)
        .par_iter()
        .map(|&(p, r)| (q(p, r), (p, r)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.dedup_by_key(|e| e.1);
    scored
        .par_iter()
        .take(CLIMB_SEEDS)
        .map(|&(v, pair)| climb(grid, &member, v, pair, &q))
        .reduce(|| 0.0, f64::max)
}

/// Number of best sampled pairs refined by local search.
const CLIMB_SEEDS: usize = 32;
const CLIMB_STEPS: usize = 256;

/// Greedy local ascent: moves either endpoint to a neighbouring node while the
/// quotient improves. Only ever raises the estimate, which stays a lower
/// bound of the true maximum over the node set.
fn climb(
    grid: &Grid2D,
    member: &[bool],
    mut best: f64,
    (mut p, mut r): (usize, usize),
    q: &(impl Fn(usize, usize) -> f64 + Sync),
) -> f64 {
    const MOVES: [(isize, isize); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
    for _ in 0..CLIMB_STEPS {
        let mut improved = false;
        for end in 0..2 {
            for (di, dj) in MOVES {
                let moved = if end == 0 { p } else { r };
                let Some(m) = grid.offset(moved, di, dj) else { continue };
                let (a, b) = if end == 0 { (m, r) } else { (p, m) };
                if a == b || !member[m] {
                    continue;
                }
                let v = q(a, b);
                if v > best {
                    best = v;
                    (p, r) = (a, b);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}

fn check_budget(sampling: &HolderSampling) -> Result<()> {
    if sampling.pair_budget < MIN_PAIR_BUDGET {
        return Err(Error::config(format!(
            "pair budget {} is below the minimum {MIN_PAIR_BUDGET}",
            sampling.pair_budget
        )));
    }
    Ok(())
}

/// `[f]_{alpha}` over the nodes of the disk of `radius`.
pub fn holder_seminorm(f: &ScalarField, radius: f64, alpha: f64, sampling: &HolderSampling) -> Result<f64> {
    check_alpha(alpha)?;
    check_budget(sampling)?;
    let grid = f.grid();
    let v = f.values();
    let nodes = ball_nodes(grid, radius, |k| v[k].is_finite())?;
    Ok(seminorm_over(grid, &nodes, radius, alpha, sampling, |p, q| (v[p] - v[q]).abs()))
}

/// Matrix version; differences are measured in the operator norm.
pub fn holder_seminorm_matrix(h: &SymMatField, radius: f64, alpha: f64, sampling: &HolderSampling) -> Result<f64> {
    check_alpha(alpha)?;
    check_budget(sampling)?;
    let grid = h.grid();
    let v = h.values();
    let nodes = ball_nodes(grid, radius, |k| v[k].is_finite())?;
    Ok(seminorm_over(grid, &nodes, radius, alpha, sampling, |p, q| v[p].sub(&v[q]).spectral_norm()))
}

/// Every pair, regardless of size. Intended for cross-checks on small grids.
pub fn holder_seminorm_exhaustive(f: &ScalarField, radius: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let grid = f.grid();
    let v = f.values();
    let nodes = ball_nodes(grid, radius, |k| v[k].is_finite())?;
    Ok(exhaustive_max(grid, &nodes, alpha, &|p, q| (v[p] - v[q]).abs()))
}

fn extent(grid: &Grid2D, nodes: &[usize]) -> f64 {
    nodes
        .iter()
        .map(|&k| {
            let x = grid.coord(k);
            x[0].hypot(x[1])
        })
        .fold(grid.spacing(), f64::max)
}

/// Scalar seminorm over an arbitrary node set; zero when fewer than two
/// nodes carry finite values.
pub(crate) fn scalar_seminorm_on(f: &ScalarField, nodes: &[usize], alpha: f64, sampling: &HolderSampling) -> f64 {
    let grid = f.grid();
    let v = f.values();
    let nodes: Vec<usize> = nodes.iter().copied().filter(|&k| v[k].is_finite()).collect();
    if nodes.len() < 2 {
        return 0.0;
    }
    seminorm_over(grid, &nodes, extent(grid, &nodes), alpha, sampling, |p, q| (v[p] - v[q]).abs())
}

pub(crate) fn matrix_seminorm_on(h: &SymMatField, nodes: &[usize], alpha: f64, sampling: &HolderSampling) -> f64 {
    let grid = h.grid();
    let v = h.values();
    let nodes: Vec<usize> = nodes.iter().copied().filter(|&k| v[k].is_finite()).collect();
    if nodes.len() < 2 {
        return 0.0;
    }
    seminorm_over(grid, &nodes, extent(grid, &nodes), alpha, sampling, |p, q| {
        v[p].sub(&v[q]).spectral_norm()
    })
}
