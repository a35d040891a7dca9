//! Weights, the variable Muckenhoupt constant on balls and dyadic cubes, and
//! the A_inf-type diagnostics derived from it.

use std::f64::consts::E;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicGrid;
use crate::error::{Error, Result};
use crate::exponents::{max_with_index, ExponentFunction};
use crate::lpvar::{check_len, restricted_norm};
use crate::space::{Ball, FiniteSpace, PointId};

/// Strictly positive, finite point values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightFile", into = "WeightFile")]
pub struct Weight {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    values: Vec<f64>,
}

impl TryFrom<WeightFile> for Weight {
    type Error = Error;
    fn try_from(f: WeightFile) -> Result<Self> {
        Weight::new(f.values)
    }
}

impl From<Weight> for WeightFile {
    fn from(w: Weight) -> Self {
        WeightFile { values: w.values }
    }
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidWeight { index, value });
            }
        }
        Ok(Weight { values })
    }

    pub fn unit(n: usize) -> Self {
        Weight { values: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, x: PointId) -> f64 {
        self.values[x]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Weight::new(self.values.iter().map(|v| c * v).collect())
    }

    pub fn inverse(&self) -> Self {
        Weight { values: self.values.iter().map(|v| 1.0 / v).collect() }
    }

    /// W(E) = sum over E of w mu.
    pub fn measure(&self, space: &FiniteSpace, pts: &[PointId]) -> f64 {
        pts.iter().map(|&x| self.values[x] * space.mass(x)).sum()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// W = w^{p(.)} and sigma = w^{-p'(.)}.
pub fn derived_weights(p: &ExponentFunction, w: &Weight) -> Result<(Weight, Weight)> {
    if !p.is_finite() {
        return Err(Error::InfiniteExponent);
    }
    if p.p_minus() <= 1.0 {
        return Err(Error::ExponentNotAboveOne(p.p_minus()));
    }
    if p.len() != w.len() {
        return Err(Error::LengthMismatch { expected: p.len(), actual: w.len() });
    }
    let pc = p.conjugate();
    let big = w.values.iter().enumerate().map(|(x, v)| v.powf(p.at(x))).collect();
    let sigma = w.values.iter().enumerate().map(|(x, v)| v.powf(-pc.at(x))).collect();
    Ok((Weight::new(big)?, Weight::new(sigma)?))
}

fn check_weight(space: &FiniteSpace, p: &ExponentFunction, w: &Weight) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::InfiniteExponent);
    }
    check_len(space, p.len())?;
    check_len(space, w.len())
}

/// ||w chi_S||_{p(.)} ||w^{-1} chi_S||_{p'(.)} / mu(S).
pub fn apq_ratio(space: &FiniteSpace, p: &ExponentFunction, pc: &ExponentFunction, w: &[f64], winv: &[f64], set: &[PointId]) -> f64 {
    restricted_norm(space, p, w, set) * restricted_norm(space, pc, winv, set) / space.measure(set)
}

/// The variable Muckenhoupt constant over a ball family (canonical balls by
/// default) and the attaining ball.
pub fn apq_constant(space: &FiniteSpace, p: &ExponentFunction, w: &Weight, balls: Option<&[Ball]>) -> Result<(f64, Ball)> {
    check_weight(space, p, w)?;
    let balls = balls.unwrap_or_else(|| space.canonical_balls());
    if balls.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let pc = p.conjugate();
    let winv = w.inverse();
    let (value, idx) = balls
        .par_iter()
        .enumerate()
        .map(|(i, b)| (apq_ratio(space, p, &pc, &w.values, &winv.values, &b.members), i))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), max_with_index);
    Ok((value, balls[idx].clone()))
}

/// Per-ball ratios in canonical order, for dumps.
pub fn apq_per_ball(space: &FiniteSpace, p: &ExponentFunction, w: &Weight) -> Result<Vec<(Ball, f64)>> {
    check_weight(space, p, w)?;
    let pc = p.conjugate();
    let winv = w.inverse();
    Ok(space
        .canonical_balls()
        .par_iter()
        .map(|b| (b.clone(), apq_ratio(space, p, &pc, &w.values, &winv.values, &b.members)))
        .collect())
}

/// The same product ratio with dyadic cubes in place of balls; returns the
/// constant and the attaining cube id.
pub fn apq_constant_dyadic(space: &FiniteSpace, grid: &DyadicGrid, p: &ExponentFunction, w: &Weight) -> Result<(f64, usize)> {
    check_weight(space, p, w)?;
    let pc = p.conjugate();
    let winv = w.inverse();
    Ok(grid
        .cubes()
        .par_iter()
        .map(|q| (apq_ratio(space, p, &pc, &w.values, &winv.values, &q.members), q.id))
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), max_with_index))
}

/// Classical A_q constant of a weight v over the canonical balls:
/// max of avg(v) avg(v^{-1/(q-1)})^{q-1}.
pub fn classical_ap_constant(space: &FiniteSpace, v: &Weight, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::InvalidLebesgueExponent(q));
    }
    check_len(space, v.len())?;
    let dual: Vec<f64> = v.values.iter().map(|x| x.powf(-1.0 / (q - 1.0))).collect();
    Ok(space
        .canonical_balls()
        .par_iter()
        .map(|b| {
            let m = space.measure(&b.members);
            let a = v.measure(space, &b.members) / m;
            let s: f64 = b.members.iter().map(|&x| dual[x] * space.mass(x)).sum::<f64>() / m;
            a * s.powf(q - 1.0)
        })
        .reduce(|| 0.0, f64::max))
}

/// (ball, subset) pairs for the A_inf and norm-bound scans: for every
/// canonical ball B, the smaller balls about its center, for every member y
/// the largest canonical ball about y inside B, and `random_per_ball`
/// uniform random nonempty subsets drawn from a fixed seed.
pub fn subset_samples(space: &FiniteSpace, random_per_ball: usize, seed: u64) -> Vec<(Vec<PointId>, Vec<PointId>)> {
    let idx = space.ball_index();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut inside = vec![false; space.n()];
    for b in space.canonical_balls() {
        for &x in &b.members {
            inside[x] = true;
        }
        let mut subs: Vec<Vec<PointId>> = Vec::new();
        for k in 0..idx.cuts[b.center].len() {
            let m = idx.members(b.center, k);
            if m.len() >= b.members.len() {
                break;
            }
            subs.push(m.to_vec());
        }
        for &y in &b.members {
            let mut best: Option<&[PointId]> = None;
            for k in 0..idx.cuts[y].len() {
                let m = idx.members(y, k);
                if m.iter().all(|&z| inside[z]) {
                    best = Some(m);
                } else {
                    break;
                }
            }
            if let Some(m) = best {
                if m.len() < b.members.len() {
                    subs.push(m.to_vec());
                }
            }
        }
        for _ in 0..random_per_ball {
            let mut e: Vec<PointId> = b.members.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            if e.is_empty() {
                e.push(b.members[rng.random_range(0..b.members.len())]);
            }
            subs.push(e);
        }
        subs.push(b.members.clone());
        for x in &b.members {
            inside[*x] = false;
        }
        for mut e in subs {
            e.sort_unstable();
            out.push((b.members.clone(), e));
        }
    }
    out
}

pub fn default_exponent_grid(p_plus: f64) -> Vec<f64> {
    vec![1.0 / p_plus, 0.5, 0.25, 0.125]
}

#[derive(Clone, Debug, Serialize)]
pub struct AinftyReport {
    /// Doubling constant of the measure W dmu.
    pub w_doubling: f64,
    /// (eps, smallest C2) with mu(E)/mu(B) <= C2 (W(E)/W(B))^eps.
    pub eps_fits: Vec<(f64, f64)>,
    /// (delta, smallest C1) with W(E)/W(B) <= C1 (mu(E)/mu(B))^delta.
    pub delta_fits: Vec<(f64, f64)>,
    pub best_eps: (f64, f64),
    pub best_delta: (f64, f64),
    pub pairs: usize,
}

pub fn ainfty_diagnostics(
    space: &FiniteSpace,
    big_w: &Weight,
    samples: &[(Vec<PointId>, Vec<PointId>)],
    exponents: &[f64],
) -> Result<AinftyReport> {
    check_len(space, big_w.len())?;
    if exponents.is_empty() {
        return Err(Error::Config("empty exponent grid".into()));
    }
    let w_doubling = space.doubling_constant_for(
        &big_w.values.iter().enumerate().map(|(x, v)| v * space.mass(x)).collect::<Vec<_>>(),
        None,
    );
    let k = exponents.len();
    let (eps_c, delta_c) = samples
        .par_iter()
        .map(|(b, e)| {
            let mu = space.measure(e) / space.measure(b);
            let ww = big_w.measure(space, e) / big_w.measure(space, b);
            let eps: Vec<f64> = exponents.iter().map(|&t| mu / ww.powf(t)).collect();
            let del: Vec<f64> = exponents.iter().map(|&t| ww / mu.powf(t)).collect();
            (eps, del)
        })
        .reduce(
            || (vec![1.0; k], vec![1.0; k]),
            |(a1, a2), (b1, b2)| {
                (
                    a1.iter().zip(&b1).map(|(x, y)| x.max(*y)).collect(),
                    a2.iter().zip(&b2).map(|(x, y)| x.max(*y)).collect(),
                )
            },
        );
    let eps_fits: Vec<(f64, f64)> = exponents.iter().copied().zip(eps_c).collect();
    let delta_fits: Vec<(f64, f64)> = exponents.iter().copied().zip(delta_c).collect();
    let best = |fits: &[(f64, f64)]| *fits.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty grid");
    Ok(AinftyReport {
        w_doubling,
        best_eps: best(&eps_fits),
        best_delta: best(&delta_fits),
        eps_fits,
        delta_fits,
        pairs: samples.len(),
    })
}

/// Worst [mu(E)/mu(B)] / [||w chi_E|| / ||w chi_B||] over the sample pairs.
pub fn normbound_check(
    space: &FiniteSpace,
    p: &ExponentFunction,
    w: &Weight,
    samples: &[(Vec<PointId>, Vec<PointId>)],
) -> Result<f64> {
    check_weight(space, p, w)?;
    Ok(samples
        .par_iter()
        .map(|(b, e)| {
            let mu = space.measure(e) / space.measure(b);
            let nr = restricted_norm(space, p, &w.values, e) / restricted_norm(space, p, &w.values, b);
            mu / nr
        })
        .reduce(|| 0.0, f64::max))
}

/// max over canonical balls of ||w chi_B||^{p_-(B) - p_+(B)}, with the witness.
pub fn fracexp_check(space: &FiniteSpace, p: &ExponentFunction, w: &Weight) -> Result<(f64, Ball)> {
    check_weight(space, p, w)?;
    let balls = space.canonical_balls();
    let (v, i) = balls
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = p.extrema(&b.members).expect("balls are nonempty");
            (restricted_norm(space, p, &w.values, &b.members).powf(lo - hi), i)
        })
        .reduce(|| (f64::NEG_INFINITY, usize::MAX), max_with_index);
    Ok((v, balls[i].clone()))
}

#[derive(Clone, Debug, Serialize)]
pub struct NormVsMeasureReport {
    /// Number of balls with ||w chi_B|| >= 1.
    pub qualifying: usize,
    /// max and min of ||w chi_B|| / W(B)^{1/p_inf}; `None` when no ball qualifies.
    pub max_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
}

pub fn norm_vs_w_measure_check(space: &FiniteSpace, p: &ExponentFunction, w: &Weight) -> Result<NormVsMeasureReport> {
    check_weight(space, p, w)?;
    let big: Vec<f64> = w.values.iter().enumerate().map(|(x, v)| v.powf(p.at(x))).collect();
    let ratios: Vec<f64> = space
        .canonical_balls()
        .par_iter()
        .filter_map(|b| {
            let nb = restricted_norm(space, p, &w.values, &b.members);
            (nb >= 1.0).then(|| {
                let wb: f64 = b.members.iter().map(|&x| big[x] * space.mass(x)).sum();
                nb / wb.powf(1.0 / p.p_inf())
            })
        })
        .collect();
    Ok(NormVsMeasureReport {
        qualifying: ratios.len(),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        min_ratio: ratios.iter().copied().reduce(f64::min),
    })
}

/// [1]_{A_{p(.)}} for an exponent with p_- > 1.
pub fn unit_weight_constant(space: &FiniteSpace, p: &ExponentFunction) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::InfiniteExponent);
    }
    if p.p_minus() <= 1.0 {
        return Err(Error::ExponentNotAboveOne(p.p_minus()));
    }
    Ok(apq_constant(space, p, &Weight::unit(space.n()), None)?.0)
}

/// Weight families shipped for experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Unit,
    /// (d(x0, .) + delta/2)^a, delta the smallest positive distance from x0.
    Power { a: f64 },
    /// `high` on the ball of radius `fraction * diam` about x0, `low` elsewhere.
    TwoLevel { low: f64, high: f64, fraction: f64 },
    /// exp(U(-spread, spread)) pointwise.
    LogUniform { spread: f64, seed: u64 },
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let mut vals = std::collections::HashMap::new();
        for kv in body.split(',').filter(|t| !t.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| Error::InvalidSpec(format!("cannot parse `{k}`")))?;
            vals.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, d: f64| vals.get(k).copied().unwrap_or(d);
        match kind {
            "unit" => Ok(WeightSpec::Unit),
            "power" => Ok(WeightSpec::Power { a: get("a", 0.25) }),
            "two_level" | "two-level" => Ok(WeightSpec::TwoLevel {
                low: get("low", 1.0),
                high: get("high", 4.0),
                fraction: get("fraction", 0.25),
            }),
            "log_uniform" | "log-uniform" => Ok(WeightSpec::LogUniform {
                spread: get("spread", 1.0),
                seed: get("seed", 0.0) as u64,
            }),
            other => Err(Error::InvalidSpec(format!("unknown weight kind `{other}`"))),
        }
    }
}

pub fn generate_weight(space: &FiniteSpace, spec: &WeightSpec, base_point: PointId) -> Result<Weight> {
    space.check_point(base_point)?;
    let n = space.n();
    let d = |x: PointId| space.d(base_point, x);
    match *spec {
        WeightSpec::Unit => Ok(Weight::unit(n)),
        WeightSpec::Power { a } => {
            let delta = (0..n).map(d).filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
            let shift = if delta.is_finite() { 0.5 * delta } else { 1.0 };
            Weight::new((0..n).map(|x| (d(x) + shift).powf(a)).collect())
        }
        WeightSpec::TwoLevel { low, high, fraction } => {
            let r = fraction * space.diameter();
            Weight::new((0..n).map(|x| if d(x) < r { high } else { low }).collect())
        }
        WeightSpec::LogUniform { spread, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Weight::new((0..n).map(|_| E.powf(rng.random_range(-spread..=spread))).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{generate_exponent, ExponentSpec};
    use crate::space::{generate_space, MassRule, SpaceSpec};

    fn unit_line(n: usize) -> FiniteSpace {
        generate_space(&SpaceSpec::EuclideanGrid { dim: 1, side: n, spacing: 1.0 / n as f64, mass: MassRule::Uniform })
            .unwrap()
    }

    #[test]
    fn derived_weight_values() {
        let p = ExponentFunction::constant(3, 2.0).unwrap();
        let (big, sigma) = derived_weights(&p, &Weight::unit(3)).unwrap();
        assert_eq!(big.values(), &[1.0; 3]);
        assert_eq!(sigma.values(), &[1.0; 3]);
        let p = ExponentFunction::constant(1, 2.0).unwrap();
        let (big, sigma) = derived_weights(&p, &Weight::new(vec![2.0]).unwrap()).unwrap();
        assert_eq!((big.at(0), sigma.at(0)), (4.0, 0.25));
        let p = ExponentFunction::constant(1, 3.0).unwrap();
        let (big, sigma) = derived_weights(&p, &Weight::new(vec![8.0]).unwrap()).unwrap();
        assert!((big.at(0) - 512.0).abs() < 1e-9);
        assert!((sigma.at(0) - 8f64.powf(-1.5)).abs() < 1e-15);
        let p = ExponentFunction::new(vec![1.0, 2.0], 2.0, 0).unwrap();
        assert!(matches!(derived_weights(&p, &Weight::unit(2)), Err(Error::ExponentNotAboveOne(_))));
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(Weight::new(vec![1.0, 0.0]).is_err());
        assert!(Weight::new(vec![f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<Weight>("{\"values\":[1.0,-2.0]}").is_err());
    }

    #[test]
    fn unit_weight_at_p_two_is_one() {
        let s = unit_line(16);
        let p = ExponentFunction::constant(16, 2.0).unwrap();
        let (c, _) = apq_constant(&s, &p, &Weight::unit(16), None).unwrap();
        assert!((c - 1.0).abs() < 1e-8);
        assert!((unit_weight_constant(&s, &ExponentFunction::constant(16, 3.0).unwrap()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constant_exponent_matches_classical_constant() {
        // For constant p, [w]_{A_p(.)}^p equals the classical A_p constant of w^p.
        let s = unit_line(24);
        for (seed, q) in [(1u64, 2.0), (2, 3.0), (3, 1.5)] {
            let w = generate_weight(&s, &WeightSpec::LogUniform { spread: 1.5, seed }, 0).unwrap();
            let p = ExponentFunction::constant(24, q).unwrap();
            let (c, _) = apq_constant(&s, &p, &w, None).unwrap();
            let wp = Weight::new(w.values().iter().map(|v| v.powf(q)).collect()).unwrap();
            let classical = classical_ap_constant(&s, &wp, q).unwrap();
            assert!((c.powf(q) / classical - 1.0).abs() < 1e-7, "{c} {classical}");
        }
    }

    #[test]
    fn out_of_range_power_weight_blows_up() {
        let constants: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let s = unit_line(n);
                let p = ExponentFunction::constant(n, 2.0).unwrap();
                let w = generate_weight(&s, &WeightSpec::Power { a: 1.5 }, 0).unwrap();
                apq_constant(&s, &p, &w, None).unwrap().0
            })
            .collect();
        assert!(constants[0] < constants[1] && constants[1] < constants[2], "{constants:?}");
        assert!(constants[2] > 2.0 * constants[0]);
    }

    #[test]
    fn scale_and_duality_invariance() {
        let s = unit_line(20);
        let p = generate_exponent(&s, &ExponentSpec::Ramp { p_inf: 2.0, c: 0.8 }, 0).unwrap();
        let w = generate_weight(&s, &WeightSpec::Power { a: 0.3 }, 0).unwrap();
        let (c, _) = apq_constant(&s, &p, &w, None).unwrap();
        let (c2, _) = apq_constant(&s, &p, &w.scaled(17.0).unwrap(), None).unwrap();
        let (c3, _) = apq_constant(&s, &p.conjugate(), &w.inverse(), None).unwrap();
        assert!((c - c2).abs() <= 1e-8 * c);
        assert!((c - c3).abs() <= 1e-8 * c);
    }

    #[test]
    fn dyadic_constant_with_single_cube_matches_full_space() {
        let s = unit_line(1);
        let grid = crate::dyadic::build_grid(&s, None, 0).unwrap();
        let p = ExponentFunction::constant(1, 2.0).unwrap();
        let w = Weight::new(vec![3.0]).unwrap();
        let (c, _) = apq_constant_dyadic(&s, &grid, &p, &w).unwrap();
        let full = apq_ratio(&s, &p, &p.conjugate(), w.values(), w.inverse().values(), &[0]);
        assert!((c - full).abs() < 1e-12);
    }

    #[test]
    fn ainfty_trivial_cases() {
        let s = unit_line(12);
        let samples = subset_samples(&s, 4, 9);
        let r = ainfty_diagnostics(&s, &Weight::unit(12), &samples, &default_exponent_grid(2.0)).unwrap();
        for &(_, c) in r.eps_fits.iter().chain(&r.delta_fits) {
            assert!(c <= 1.0 + 1e-12, "{r:?}");
        }
        let full = vec![(s.all_points(), s.all_points())];
        let w = generate_weight(&s, &WeightSpec::Power { a: 0.5 }, 0).unwrap();
        let r = ainfty_diagnostics(&s, &w, &full, &[0.5]).unwrap();
        assert!((r.eps_fits[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ainfty_fit_for_apq_weight() {
        let s = unit_line(32);
        let p = generate_exponent(&s, &ExponentSpec::Ramp { p_inf: 2.0, c: 0.5 }, 0).unwrap();
        let w = generate_weight(&s, &WeightSpec::Power { a: 0.25 }, 0).unwrap();
        let (big, _) = derived_weights(&p, &w).unwrap();
        let r = ainfty_diagnostics(&s, &big, &subset_samples(&s, 8, 1), &default_exponent_grid(p.p_plus())).unwrap();
        assert!(r.eps_fits[0].1.is_finite() && r.eps_fits[0].1 < 10.0, "{r:?}");
        assert!(r.w_doubling < 10.0);
    }

    #[test]
    fn normbound_within_four_times_apq() {
        let s = unit_line(16);
        let samples = subset_samples(&s, 8, 3);
        let p = ExponentFunction::constant(16, 2.0).unwrap();
        let one = normbound_check(&s, &p, &Weight::unit(16), &samples).unwrap();
        assert!(one <= 4.0 * unit_weight_constant(&s, &p).unwrap());
        let p = generate_exponent(&s, &ExponentSpec::Sinusoid { mid: 2.5, amplitude: 0.5, frequency: 1.0 }, 0).unwrap();
        let w = generate_weight(&s, &WeightSpec::Power { a: 0.2 }, 0).unwrap();
        let worst = normbound_check(&s, &p, &w, &samples).unwrap();
        let (apq, _) = apq_constant(&s, &p, &w, None).unwrap();
        assert!(worst <= 4.0 * apq, "{worst} {apq}");
        let same = vec![(s.all_points(), s.all_points())];
        assert!((normbound_check(&s, &p, &w, &same).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fracexp_and_norm_vs_measure() {
        let s = unit_line(16);
        let p = ExponentFunction::constant(16, 2.0).unwrap();
        let w = generate_weight(&s, &WeightSpec::Power { a: 0.3 }, 0).unwrap();
        assert_eq!(fracexp_check(&s, &p, &w).unwrap().0, 1.0);
        let big_w = w.scaled(10.0).unwrap();
        let r = norm_vs_w_measure_check(&s, &p, &big_w).unwrap();
        assert!(r.qualifying > 0);
        assert!((r.max_ratio.unwrap() - 1.0).abs() < 1e-8 && (r.min_ratio.unwrap() - 1.0).abs() < 1e-8);
        let tiny = Weight::new(vec![1e-3; 16]).unwrap();
        let r = norm_vs_w_measure_check(&s, &p, &tiny).unwrap();
        assert_eq!((r.qualifying, r.max_ratio), (0, None));
    }

    #[test]
    fn unit_constant_under_refinement() {
        let ramp: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let s = unit_line(n);
                let p = generate_exponent(&s, &ExponentSpec::Ramp { p_inf: 2.0, c: 1.0 }, 0).unwrap();
                unit_weight_constant(&s, &p).unwrap()
            })
            .collect();
        assert!(ramp.iter().all(|&c| c < 2.0), "{ramp:?}");
    }

    #[test]
    fn generators_and_parsing() {
        let s = unit_line(8);
        let w = generate_weight(&s, &"two_level:low=1,high=5,fraction=0.3".parse().unwrap(), 0).unwrap();
        assert_eq!(w.at(0), 5.0);
        assert_eq!(w.at(7), 1.0);
        let w = generate_weight(&s, &WeightSpec::Power { a: 1.0 }, 0).unwrap();
        assert!((w.at(0) - 1.0 / 16.0).abs() < 1e-15);
        assert!("nope".parse::<WeightSpec>().is_err());
    }
}
