//! Uncentered Hardy-Littlewood and (weighted, truncated) dyadic maximal
//! operators with their weak and strong type checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::DyadicGrid;
use crate::error::{Error, Result};
use crate::exponents::max_with_index;
use crate::lpvar::{check_len, PointFunction};
use crate::space::{FiniteSpace, PointId};
use crate::weights::Weight;

/// Uncentered maximal function over all distinct balls, in O(n^2): for each
/// center the prefix averages along its distance order are suffix-maximized,
/// so a point at ball level k about c sees the best ball about c holding it.
pub fn hl_maximal(space: &FiniteSpace, f: &PointFunction) -> Result<PointFunction> {
    check_len(space, f.len())?;
    let n = space.n();
    let idx = space.ball_index();
    let abs = f.abs();
    let per_center: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let order = &idx.order[c];
            let mut avgs = Vec::with_capacity(idx.cuts[c].len());
            let (mut s, mut m, mut i) = (0.0, 0.0, 0);
            for &cut in &idx.cuts[c] {
                while i < cut {
                    let y = order[i];
                    s += abs[y] * space.mass(y);
                    m += space.mass(y);
                    i += 1;
                }
                avgs.push(s / m);
            }
            for k in (0..avgs.len().saturating_sub(1)).rev() {
                avgs[k] = avgs[k].max(avgs[k + 1]);
            }
            avgs
        })
        .collect();
    let out = (0..n)
        .into_par_iter()
        .map(|x| (0..n).map(|c| per_center[c][idx.level[c][x]]).fold(0.0, f64::max))
        .collect();
    Ok(PointFunction::new(out))
}

/// Reference evaluation: for each point, the largest average over the
/// canonical balls containing it.
pub fn hl_maximal_reference(space: &FiniteSpace, f: &PointFunction) -> Result<PointFunction> {
    check_len(space, f.len())?;
    let abs = f.abs();
    let mut out = vec![0.0f64; space.n()];
    for b in space.canonical_balls() {
        let s: f64 = b.members.iter().map(|&y| abs[y] * space.mass(y)).sum();
        let avg = s / space.measure(&b.members);
        for &x in &b.members {
            out[x] = out[x].max(avg);
        }
    }
    Ok(PointFunction::new(out))
}

fn sigma_values(space: &FiniteSpace, sigma: Option<&Weight>) -> Result<Vec<f64>> {
    match sigma {
        Some(w) => {
            check_len(space, w.len())?;
            Ok(w.values().to_vec())
        }
        None => Ok(vec![1.0; space.n()]),
    }
}

/// Per cube: (sigma-average of |f|, sigma(Q)), indexed by cube id.
pub fn cube_averages(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(space, f.len())?;
    check_len(space, grid.n())?;
    let sv = sigma_values(space, sigma)?;
    let abs = f.abs();
    Ok(grid
        .cubes()
        .par_iter()
        .map(|q| {
            let (mut s, mut m) = (0.0, 0.0);
            for &y in &q.members {
                let w = sv[y] * space.mass(y);
                s += abs[y] * w;
                m += w;
            }
            (s / m, m)
        })
        .unzip())
}

fn dyadic_max_upto(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>, levels: usize) -> Result<PointFunction> {
    let (avg, _) = cube_averages(space, grid, f, sigma)?;
    let out = (0..space.n())
        .into_par_iter()
        .map(|x| {
            (0..levels)
                .filter_map(|l| grid.owner(grid.bottom() + l as i32, x).ok().flatten())
                .map(|q| avg[q])
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(PointFunction::new(out))
}

/// M^D_sigma f(x): the largest sigma-average of |f| over cubes holding x.
pub fn dyadic_maximal(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>) -> Result<PointFunction> {
    dyadic_max_upto(space, grid, f, sigma, grid.num_levels())
}

/// The same supremum restricted to generations k <= nmax.
pub fn truncated_dyadic_maximal(
    space: &FiniteSpace,
    grid: &DyadicGrid,
    f: &PointFunction,
    sigma: Option<&Weight>,
    nmax: i32,
) -> Result<PointFunction> {
    grid.level(nmax)?;
    dyadic_max_upto(space, grid, f, sigma, (nmax - grid.bottom()) as usize + 1)
}

/// {x : M^D_sigma f(x) > lambda}, sorted.
pub fn superlevel_set(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>, lambda: f64) -> Result<Vec<PointId>> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidHeight(lambda));
    }
    let m = dyadic_maximal(space, grid, f, sigma)?;
    Ok((0..space.n()).filter(|&x| m.values[x] > lambda).collect())
}

fn weighted_measure(space: &FiniteSpace, sv: &[f64], pts: impl Iterator<Item = PointId>) -> f64 {
    pts.map(|x| sv[x] * space.mass(x)).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakReport {
    /// max of lambda sigma({M > lambda}) / int |f| dsigma.
    pub worst_ratio: f64,
    pub worst_lambda: f64,
    pub lambdas_tested: usize,
}

/// Weak (1,1) ratio of the dyadic maximal operator. Without explicit
/// heights, every distinct value v of M^D_sigma f is tested in the limit
/// form v sigma({M >= v}), the supremum of lambda sigma({M > lambda}) over
/// lambda below v, and also at v minus half the gap to the next lower value.
pub fn weak11_check(
    space: &FiniteSpace,
    grid: &DyadicGrid,
    f: &PointFunction,
    sigma: Option<&Weight>,
    lambdas: Option<&[f64]>,
) -> Result<WeakReport> {
    let sv = sigma_values(space, sigma)?;
    let m = dyadic_maximal(space, grid, f, sigma)?;
    let abs = f.abs();
    let total: f64 = (0..space.n()).map(|x| abs[x] * sv[x] * space.mass(x)).sum();
    let mut worst = (0.0, 0.0);
    let mut count = 0;
    let mut consider = |lam: f64, set_measure: f64| {
        count += 1;
        let r = if total > 0.0 { lam * set_measure / total } else { 0.0 };
        if r > worst.0 {
            worst = (r, lam);
        }
    };
    match lambdas {
        Some(ls) => {
            for &lam in ls {
                if !(lam > 0.0) {
                    return Err(Error::InvalidHeight(lam));
                }
                consider(lam, weighted_measure(space, &sv, (0..space.n()).filter(|&x| m.values[x] > lam)));
            }
        }
        None => {
            let mut vals: Vec<f64> = m.values.iter().copied().filter(|&v| v > 0.0).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for (i, &v) in vals.iter().enumerate() {
                let at_least = weighted_measure(space, &sv, (0..space.n()).filter(|&x| m.values[x] >= v));
                consider(v, at_least);
                let below = if i == 0 { 0.0 } else { vals[i - 1] };
                consider(v - 0.5 * (v - below), at_least);
            }
        }
    }
    Ok(WeakReport { worst_ratio: worst.0, worst_lambda: worst.1, lambdas_tested: count })
}

/// ||M^D_sigma f||_{L^p(sigma)} / ||f||_{L^p(sigma)} (0 for f = 0).
pub fn strongpp_check(space: &FiniteSpace, grid: &DyadicGrid, f: &PointFunction, sigma: Option<&Weight>, p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidLebesgueExponent(p));
    }
    let sv = sigma_values(space, sigma)?;
    let m = dyadic_maximal(space, grid, f, sigma)?;
    let abs = f.abs();
    let lp = |v: &[f64]| (0..space.n()).map(|x| v[x].powf(p) * sv[x] * space.mass(x)).sum::<f64>().powf(1.0 / p);
    let den = lp(&abs);
    Ok(if den > 0.0 { lp(&m.values) / den } else { 0.0 })
}

/// The strong (p,p) acceptance bound 2p/(p-1).
pub fn strongpp_bound(p: f64) -> f64 {
    2.0 * p / (p - 1.0)
}

/// max over x of Mf(x) / sum_i M^{D_i} f(x) and the attaining point; points
/// where f's maximal functions all vanish are skipped.
pub fn domination_check(space: &FiniteSpace, grids: &[DyadicGrid], f: &PointFunction) -> Result<(f64, PointId)> {
    if grids.is_empty() {
        return Err(Error::Config("domination check needs at least one grid".into()));
    }
    let m = hl_maximal(space, f)?;
    let mut sum = vec![0.0; space.n()];
    for g in grids {
        let md = dyadic_maximal(space, g, f, None)?;
        for (s, v) in sum.iter_mut().zip(&md.values) {
            *s += v;
        }
    }
    let (c, x) = (0..space.n())
        .filter(|&x| m.values[x] > 0.0)
        .map(|x| (m.values[x] / sum[x], x))
        .fold((0.0, 0), max_with_index);
    Ok((c, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{adjacent_family, build_grid, DyadicCube};
    use crate::space::{generate_space, MassRule, SpaceSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> FiniteSpace {
        generate_space(&SpaceSpec::EuclideanGrid { dim: 1, side: n, spacing: 1.0, mass: MassRule::Uniform }).unwrap()
    }

    fn random_f(n: usize, seed: u64) -> PointFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointFunction::new((0..n).map(|_| rng.random_range(-3.0..3.0)).collect())
    }

    /// Grid {X} over the singleton level.
    fn two_level(space: &FiniteSpace) -> DyadicGrid {
        let n = space.n();
        let mut cubes = vec![DyadicCube {
            id: 0,
            generation: 1,
            center: 0,
            members: (0..n).collect(),
            parent: None,
            children: (1..=n).collect(),
        }];
        for x in 0..n {
            cubes.push(DyadicCube { id: x + 1, generation: 0, center: x, members: vec![x], parent: Some(0), children: vec![] });
        }
        DyadicGrid::from_parts(n, 1e6, 0, 0, cubes, vec![(1..=n).collect(), vec![0]], 1.0, 0.0).unwrap()
    }

    #[test]
    fn constant_function() {
        let s = line(10);
        let f = PointFunction::new(vec![-2.5; 10]);
        let m = hl_maximal(&s, &f).unwrap();
        assert!(m.values.iter().all(|&v| (v - 2.5).abs() < 1e-14));
        let g = build_grid(&s, None, 0).unwrap();
        let md = dyadic_maximal(&s, &g, &f, None).unwrap();
        assert!(md.values.iter().all(|&v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn spike_closed_form() {
        // On the unit line the balls are the windows [c - j, c + j] clipped
        // to the line; Mf(x) is one over the smallest such window holding x
        // and the spike.
        let n = 9i64;
        let s = line(n as usize);
        let spike = 2i64;
        let mut f = vec![0.0; n as usize];
        f[spike as usize] = 1.0;
        let m = hl_maximal(&s, &PointFunction::new(f)).unwrap();
        for x in 0..n {
            let mut smallest = n;
            for c in 0..n {
                for j in 0..n {
                    let (lo, hi) = ((c - j).max(0), (c + j).min(n - 1));
                    if lo <= x.min(spike) && hi >= x.max(spike) {
                        smallest = smallest.min(hi - lo + 1);
                    }
                }
            }
            let expect = 1.0 / smallest as f64;
            assert!((m.values[x as usize] - expect).abs() < 1e-14, "x={x}: {} vs {expect}", m.values[x as usize]);
        }
    }

    #[test]
    fn fast_path_matches_reference() {
        for spec in ["power:n=30,gamma=2", "cantor:depth=4,ratio=0.25", "grid:dim=2,side=5,spacing=1,mass=geometric,ratio=1.3"] {
            let s = generate_space(&spec.parse().unwrap()).unwrap();
            for seed in 0..5 {
                let f = random_f(s.n(), seed);
                let a = hl_maximal(&s, &f).unwrap();
                let b = hl_maximal_reference(&s, &f).unwrap();
                for (x, y) in a.values.iter().zip(&b.values) {
                    assert!((x - y).abs() <= 1e-12 * y.max(1.0));
                }
            }
        }
    }

    #[test]
    fn indicator_lower_bound() {
        let s = line(12);
        let e = [3usize, 4, 5];
        let m = hl_maximal(&s, &PointFunction::indicator(12, &e)).unwrap();
        for b in s.canonical_balls() {
            if e.iter().all(|x| b.members.contains(x)) {
                for &x in &b.members {
                    assert!(m.values[x] >= 3.0 / s.measure(&b.members) - 1e-15);
                }
            }
        }
    }

    #[test]
    fn two_level_grid_maximal() {
        let s = line(6);
        let g = two_level(&s);
        let f = random_f(6, 3);
        let avg = f.abs().iter().sum::<f64>() / 6.0;
        let md = dyadic_maximal(&s, &g, &f, None).unwrap();
        for x in 0..6 {
            assert_eq!(md.values[x], f.values[x].abs().max(avg));
        }
    }

    #[test]
    fn dyadic_bounded_by_sandwich_times_hl() {
        let s = line(32);
        let g = build_grid(&s, None, 0).unwrap();
        // Each cube sits inside a ball B with mu(B)/mu(Q) at most this factor.
        let factor = g
            .cubes()
            .iter()
            .map(|q| {
                let r = g.achieved_cd() * g.d0().powi(q.generation);
                s.measure(&s.ball(q.center, r)) / s.measure(&q.members)
            })
            .fold(1.0, f64::max);
        for seed in 0..20 {
            let f = random_f(32, seed);
            let m = hl_maximal(&s, &f).unwrap();
            let md = dyadic_maximal(&s, &g, &f, None).unwrap();
            for x in 0..32 {
                assert!(md.values[x] <= factor * m.values[x] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn truncation_is_monotone() {
        let s = generate_space(&"power:n=20,gamma=2".parse().unwrap()).unwrap();
        let g = build_grid(&s, None, 2).unwrap();
        let f = random_f(20, 4);
        let bottom = truncated_dyadic_maximal(&s, &g, &f, None, g.bottom()).unwrap();
        assert_eq!(bottom.values, f.abs());
        let mut prev = bottom;
        for k in g.bottom() + 1..=g.top() {
            let t = truncated_dyadic_maximal(&s, &g, &f, None, k).unwrap();
            assert!(t.values.iter().zip(&prev.values).all(|(a, b)| a >= b));
            prev = t;
        }
        assert_eq!(prev, dyadic_maximal(&s, &g, &f, None).unwrap());
        assert!(truncated_dyadic_maximal(&s, &g, &f, None, g.top() + 1).is_err());
    }

    #[test]
    fn superlevel_extremes() {
        let s = line(16);
        let g = build_grid(&s, None, 0).unwrap();
        let f = random_f(16, 1);
        let m = dyadic_maximal(&s, &g, &f, None).unwrap();
        let top = m.values.iter().copied().fold(0.0, f64::max);
        assert!(superlevel_set(&s, &g, &f, None, top).unwrap().is_empty());
        assert_eq!(superlevel_set(&s, &g, &f, None, 0.0).unwrap().len(), 16);
    }

    #[test]
    fn weak_type_cases() {
        let s = line(8);
        let g = two_level(&s);
        assert_eq!(weak11_check(&s, &g, &PointFunction::zeros(8), None, None).unwrap().worst_ratio, 0.0);
        let f = PointFunction::indicator(8, &[3]);
        let lam = 1.0 - 1e-9;
        let r = weak11_check(&s, &g, &f, None, Some(&[lam])).unwrap();
        assert!((r.worst_ratio - lam).abs() < 1e-15);
    }

    #[test]
    fn strong_type_constant_and_random() {
        let s = line(64);
        let g = build_grid(&s, None, 0).unwrap();
        assert!((strongpp_check(&s, &g, &PointFunction::new(vec![3.0; 64]), None, 2.0).unwrap() - 1.0).abs() < 1e-12);
        for seed in 0..50 {
            let r = strongpp_check(&s, &g, &random_f(64, seed), None, 2.0).unwrap();
            assert!(r <= 4.0);
        }
        assert!(strongpp_check(&s, &g, &random_f(64, 0), None, 1.0).is_err());
    }

    #[test]
    fn domination_on_line() {
        let s = line(32);
        let fam = adjacent_family(&s, None, &[0, 1, 2]).unwrap();
        let (c, _) = domination_check(&s, &fam.grids, &PointFunction::new(vec![1.0; 32])).unwrap();
        assert!(c <= 1.0 + 1e-12);
        let (c, _) = domination_check(&s, &fam.grids, &random_f(32, 5)).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn maximal_operator_laws(seed in 0u64..10_000, c in -4.0f64..4.0) {
            let s = generate_space(&"power:n=14,gamma=1.5".parse().unwrap()).unwrap();
            let f = random_f(14, seed);
            let g = random_f(14, seed + 1);
            let mf = hl_maximal(&s, &f).unwrap();
            let mg = hl_maximal(&s, &g).unwrap();
            let sum = PointFunction::new(f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect());
            let msum = hl_maximal(&s, &sum).unwrap();
            let scaled = hl_maximal(&s, &PointFunction::new(f.values.iter().map(|v| c * v).collect())).unwrap();
            let bigger = PointFunction::new(f.values.iter().map(|v| 2.0 * v.abs() + 0.5).collect());
            let mb = hl_maximal(&s, &bigger).unwrap();
            for x in 0..14 {
                prop_assert!(msum.values[x] <= (mf.values[x] + mg.values[x]) * (1.0 + 1e-12));
                prop_assert!((scaled.values[x] - c.abs() * mf.values[x]).abs() <= 1e-12 * mf.values[x].max(1.0));
                prop_assert!(mf.values[x] >= f.values[x].abs() * (1.0 - 1e-15));
                prop_assert!(mb.values[x] >= mf.values[x]);
            }
        }

        #[test]
        fn dyadic_weak_type_constant_one(seed in 0u64..10_000) {
            let s = line(24);
            let g = build_grid(&s, None, seed % 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = Weight::new((0..24).map(|_| rng.random_range(0.2..5.0)).collect()).unwrap();
            let f = random_f(24, seed);
            let r = weak11_check(&s, &g, &f, Some(&sigma), None).unwrap();
            prop_assert!(r.worst_ratio <= 1.0 + 1e-12);
            let md = dyadic_maximal(&s, &g, &f, Some(&sigma)).unwrap();
            for x in 0..24 {
                prop_assert!(md.values[x] >= f.values[x].abs() * (1.0 - 1e-15));
            }
        }
    }
}
