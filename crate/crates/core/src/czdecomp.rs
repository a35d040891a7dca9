//! Calderon-Zygmund stopping cubes at one height and across the heights
//! a^k, with the sparse sets they induce.

use serde::Serialize;

use crate::dyadic::DyadicGrid;
use crate::error::{Error, Result};
use crate::lpvar::PointFunction;
use crate::operators::{cube_averages, superlevel_set};
use crate::space::{FiniteSpace, PointId};
use crate::weights::Weight;

#[derive(Clone, Debug, Serialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    /// sigma-average of |f| over the whole space.
    pub lambda0: f64,
    /// Maximal cubes with sigma-average above lambda, in traversal order.
    pub cubes: Vec<usize>,
    /// max over the cubes of average / lambda; 0 when there are none.
    pub achieved_ccz: f64,
    /// The cubes' union equals {M^D_sigma f > lambda}.
    pub exact_cover: bool,
    /// Every cube's parent has average <= lambda.
    pub maximal: bool,
}

fn top_cube(grid: &DyadicGrid) -> usize {
    grid.levels().last().expect("grids have levels")[0]
}

fn stopping_cubes(grid: &DyadicGrid, avg: &[f64], lambda: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![top_cube(grid)];
    while let Some(q) = stack.pop() {
        if avg[q] > lambda {
            out.push(q);
        } else {
            stack.extend(grid.cube(q).children.iter().rev());
        }
    }
    out
}

fn decompose(
    space: &FiniteSpace,
    grid: &DyadicGrid,
    f: &PointFunction,
    sigma: Option<&Weight>,
    avg: &[f64],
    lambda: f64,
) -> Result<CzDecomposition> {
    let lambda0 = avg[top_cube(grid)];
    if !(lambda > 0.0) {
        return Err(Error::InvalidHeight(lambda));
    }
    if lambda <= lambda0 {
        return Err(Error::HeightBelowThreshold { lambda, threshold: lambda0 });
    }
    let cubes = stopping_cubes(grid, avg, lambda);
    let achieved_ccz = cubes.iter().map(|&q| avg[q] / lambda).fold(0.0, f64::max);
    let maximal = cubes.iter().all(|&q| grid.cube(q).parent.is_none_or(|p| avg[p] <= lambda));
    let mut union: Vec<PointId> = cubes.iter().flat_map(|&q| grid.cube(q).members.iter().copied()).collect();
    union.sort_unstable();
    let exact_cover = union == superlevel_set(space, grid, f, sigma, lambda)?;
    Ok(CzDecomposition { lambda, lambda0, cubes, achieved_ccz, exact_cover, maximal })
}

/// Maximal cubes at height lambda, which must exceed the global average.
pub fn cz_at_height(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>, lambda: f64) -> Result<CzDecomposition> {
    let (avg, _) = cube_averages(space, grid, f, sigma)?;
    decompose(space, grid, f, sigma, &avg, lambda)
}

/// max sigma(parent)/sigma(child): every CZ cube's average is at most this
/// multiple of its height, so it bounds the CZ constant.
pub fn cz_grid_bound(space: &FiniteSpace, grid: &DyadicGrid, sigma: Option<&Weight>) -> Result<f64> {
    let (_, mass) = cube_averages(space, grid, &PointFunction::zeros(space.n()), sigma)?;
    Ok(grid
        .cubes()
        .iter()
        .filter_map(|q| q.parent.map(|p| mass[p] / mass[q.id]))
        .fold(1.0, f64::max))
}

/// Supremum over all heights lambda > lambda0 of the CZ ratio average/lambda.
/// A cube Q is a CZ cube exactly for A(Q) <= lambda < avg(Q), where A(Q) is
/// the largest average over its strict ancestors, so the supremum is
/// max avg(Q)/A(Q) over cubes with avg(Q) > A(Q); 1 when no cube qualifies.
pub fn measured_ccz(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>) -> Result<f64> {
    let (avg, _) = cube_averages(space, grid, f, sigma)?;
    let mut ancestor_max = vec![0.0f64; grid.cubes().len()];
    let mut best: f64 = 1.0;
    for ids in grid.levels().iter().rev() {
        for &q in ids {
            if let Some(p) = grid.cube(q).parent {
                let a = ancestor_max[p].max(avg[p]);
                ancestor_max[q] = a;
                if avg[q] > a {
                    best = best.max(avg[q] / a);
                }
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseLevel {
    pub k: i32,
    pub lambda: f64,
    pub cubes: Vec<usize>,
    /// E^k_j = Q^k_j minus the superlevel set at a^{k+1}, aligned with `cubes`.
    pub sparse_sets: Vec<Vec<PointId>>,
    /// sigma(E^k_j) / sigma(Q^k_j), aligned with `cubes`.
    pub thickness: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SparseFamily {
    pub a: f64,
    pub lambda0: f64,
    pub levels: Vec<SparseLevel>,
    pub achieved_ccz: f64,
    pub disjoint: bool,
    /// min thickness over all cubes (1 when there are none).
    pub min_thickness: f64,
    /// min thickness >= (a - C_CZ)/a.
    pub thick: bool,
    pub exact_cover: bool,
    pub maximal: bool,
}

impl SparseFamily {
    pub fn all_hold(&self) -> bool {
        self.disjoint && self.thick && self.exact_cover && self.maximal
    }
}

/// CZ cubes at every height a^k above the global average and below the
/// largest cube average, their sparse sets, and the exact checks.
pub fn sparse_family(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>, a: f64) -> Result<SparseFamily> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::BaseTooSmall { a, ccz: 1.0 });
    }
    let (avg, mass) = cube_averages(space, grid, f, sigma)?;
    let lambda0 = avg[top_cube(grid)];
    let peak = avg.iter().copied().fold(0.0, f64::max);
    let mut levels = Vec::new();
    let mut decs = Vec::new();
    if peak > 0.0 {
        let mut k = if lambda0 > 0.0 { (lambda0.ln() / a.ln()).floor() as i32 } else { (peak.ln() / a.ln()).floor() as i32 };
        while a.powi(k) <= lambda0 {
            k += 1;
        }
        while a.powi(k) < peak {
            decs.push((k, decompose(space, grid, f, sigma, &avg, a.powi(k))?));
            k += 1;
        }
    }
    let achieved_ccz = decs.iter().map(|(_, d)| d.achieved_ccz).fold(0.0, f64::max);
    if !decs.is_empty() && a <= achieved_ccz {
        return Err(Error::BaseTooSmall { a, ccz: achieved_ccz });
    }
    let n = space.n();
    let mut owner = vec![false; n];
    let mut disjoint = true;
    let mut min_thickness: f64 = 1.0;
    for i in 0..decs.len() {
        let mut above = vec![false; n];
        if let Some((_, next)) = decs.get(i + 1) {
            for &q in &next.cubes {
                for &x in &grid.cube(q).members {
                    above[x] = true;
                }
            }
        }
        let (k, d) = &decs[i];
        let mut sets = Vec::with_capacity(d.cubes.len());
        let mut thickness = Vec::with_capacity(d.cubes.len());
        for &q in &d.cubes {
            let e: Vec<PointId> = grid.cube(q).members.iter().copied().filter(|&x| !above[x]).collect();
            for &x in &e {
                if owner[x] {
                    disjoint = false;
                }
                owner[x] = true;
            }
            let sv = |x: PointId| sigma.map_or(1.0, |w| w.at(x)) * space.mass(x);
            let t = e.iter().map(|&x| sv(x)).sum::<f64>() / mass[q];
            min_thickness = min_thickness.min(t);
            thickness.push(t);
            sets.push(e);
        }
        levels.push(SparseLevel { k: *k, lambda: d.lambda, cubes: d.cubes.clone(), sparse_sets: sets, thickness });
    }
    Ok(SparseFamily {
        a,
        lambda0,
        thick: min_thickness >= (a - achieved_ccz) / a,
        exact_cover: decs.iter().all(|(_, d)| d.exact_cover),
        maximal: decs.iter().all(|(_, d)| d.maximal),
        levels,
        achieved_ccz,
        disjoint,
        min_thickness,
    })
}
