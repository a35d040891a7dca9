//! The modular and Luxemburg norm of L^{p(.)} on a finite space, and the
//! norm/modular inequalities that the rest of the crate leans on.

use std::f64::consts::E;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::ExponentFunction;
use crate::space::{FiniteSpace, PointId};

/// Default absolute tolerance for Luxemburg norm bisection.
pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
/// exp(709) is the last finite power of e in f64.
const LOG_OVERFLOW: f64 = 709.0;

/// A real function on the points of a space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFunction {
    pub values: Vec<f64>,
}

impl PointFunction {
    pub fn new(values: Vec<f64>) -> Self {
        PointFunction { values }
    }

    pub fn zeros(n: usize) -> Self {
        PointFunction { values: vec![0.0; n] }
    }

    pub fn indicator(n: usize, set: &[PointId]) -> Self {
        let mut values = vec![0.0; n];
        for &x in set {
            values[x] = 1.0;
        }
        PointFunction { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.abs()).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

impl From<Vec<f64>> for PointFunction {
    fn from(values: Vec<f64>) -> Self {
        PointFunction { values }
    }
}

/// One nonzero point of a modular sum: |f(x)|, p(x), mu({x}).
#[derive(Clone, Copy, Debug)]
struct Term {
    ln_abs: f64,
    abs: f64,
    p: f64,
    mass: f64,
}

/// The support of `values` on `region`, prepared for repeated modular evaluation.
#[derive(Clone, Debug)]
pub struct ModularTerms {
    terms: Vec<Term>,
}

impl ModularTerms {
    pub fn new(space: &FiniteSpace, p: &ExponentFunction, values: &[f64], region: &[PointId]) -> Self {
        let terms = region
            .iter()
            .filter_map(|&x| {
                let a = values[x].abs();
                (a > 0.0).then(|| Term { ln_abs: a.ln(), abs: a, p: p.at(x), mass: space.mass(x) })
            })
            .collect();
        ModularTerms { terms }
    }

    pub fn whole(space: &FiniteSpace, p: &ExponentFunction, values: &[f64]) -> Self {
        let terms = values
            .iter()
            .enumerate()
            .filter_map(|(x, &v)| {
                let a = v.abs();
                (a > 0.0).then(|| Term { ln_abs: a.ln(), abs: a, p: p.at(x), mass: space.mass(x) })
            })
            .collect();
        ModularTerms { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// rho(f / lambda); +inf on overflow.
    pub fn rho(&self, lambda: f64) -> f64 {
        let ln_l = lambda.ln();
        let mut sum = 0.0;
        let mut sup: f64 = 0.0;
        for t in &self.terms {
            if t.p.is_infinite() {
                sup = sup.max(t.abs / lambda);
            } else {
                let e = t.p * (t.ln_abs - ln_l);
                if e > LOG_OVERFLOW {
                    return f64::INFINITY;
                }
                sum += e.exp() * t.mass;
            }
        }
        sum + sup
    }

    /// (min, max) of the exponent over the support, ignoring infinite values,
    /// and whether any infinite exponent is present.
    fn exponent_range(&self) -> (f64, f64, bool) {
        let mut lo = f64::INFINITY;
        let mut hi = 1.0f64;
        let mut has_inf = false;
        for t in &self.terms {
            if t.p.is_infinite() {
                has_inf = true;
            } else {
                lo = lo.min(t.p);
                hi = hi.max(t.p);
            }
        }
        (lo, hi, has_inf)
    }

    /// inf { lambda > 0 : rho(f/lambda) <= 1 } by bisection.
    ///
    /// The bracket comes from the norm/modular sandwich; bisection stops at
    /// width `tol * min(1, lambda)`, i.e. absolute accuracy `tol` and relative
    /// accuracy `tol` below one.
    pub fn norm(&self, tol: f64) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let m = self.rho(1.0);
        let (pm, pp, has_inf) = self.exponent_range();
        let (mut lo, mut hi) = if !has_inf && m.is_finite() && m > 0.0 {
            let (a, b) = (m.powf(1.0 / pm), m.powf(1.0 / pp));
            (a.min(b) * (1.0 - 1e-9), a.max(b) * (1.0 + 1e-9))
        } else {
            (1.0, 1.0)
        };
        while self.rho(lo) <= 1.0 {
            lo *= 0.5;
        }
        while self.rho(hi) > 1.0 {
            hi *= 2.0;
        }
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= tol * hi.min(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.rho(mid) <= 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// rho_{p(.)}(f): the finite-exponent sum plus the sup of |f| where p = inf.
pub fn modular(space: &FiniteSpace, p: &ExponentFunction, f: &PointFunction) -> f64 {
    ModularTerms::whole(space, p, &f.values).rho(1.0)
}

pub fn luxemburg_norm(space: &FiniteSpace, p: &ExponentFunction, f: &PointFunction, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    check_len(space, f.len())?;
    check_len(space, p.len())?;
    Ok(ModularTerms::whole(space, p, &f.values).norm(tol))
}

/// ||values * chi_region||_{p(.)} at the default tolerance.
pub fn restricted_norm(space: &FiniteSpace, p: &ExponentFunction, values: &[f64], region: &[PointId]) -> f64 {
    ModularTerms::new(space, p, values, region).norm(DEFAULT_TOL)
}

pub(crate) fn check_len(space: &FiniteSpace, len: usize) -> Result<()> {
    if len == space.n() {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected: space.n(), actual: len })
    }
}

/// (integral of |fg|, 4 ||f||_{p(.)} ||g||_{p'(.)}).
pub fn holder_pairing(space: &FiniteSpace, p: &ExponentFunction, f: &PointFunction, g: &PointFunction) -> Result<(f64, f64)> {
    check_len(space, f.len())?;
    check_len(space, g.len())?;
    let lhs = (0..space.n()).map(|x| (f.values[x] * g.values[x]).abs() * space.mass(x)).sum();
    let nf = luxemburg_norm(space, p, f, DEFAULT_TOL)?;
    let ng = luxemburg_norm(space, &p.conjugate(), g, DEFAULT_TOL)?;
    Ok((lhs, 4.0 * nf * ng))
}

/// The norm/modular relations evaluated on one function.
#[derive(Clone, Debug, Serialize)]
pub struct BridgeReport {
    pub modular: f64,
    pub norm: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// rho <= 1 implies ||f|| <= 1.
    pub unit_modular_gives_unit_norm: bool,
    /// rho <= C2 with C2 >= 1 implies ||f|| <= C2^{1/p_-}.
    pub modular_bound_gives_norm_bound: bool,
    /// ||f|| <= C1 implies rho <= (C1 + 1)^{p_+}.
    pub norm_bound_gives_modular_bound: bool,
    /// ||f|| <= 1 implies rho <= 1.
    pub unit_norm_gives_unit_modular: bool,
    /// rho(f / ||f||), 1 for nonzero f.
    pub unity: f64,
    /// ||f||^{p_+} <= rho <= ||f||^{p_-} below one, reversed above.
    pub sandwich_holds: bool,
}

impl BridgeReport {
    pub fn all_hold(&self, unity_tol: f64) -> bool {
        self.unit_modular_gives_unit_norm
            && self.modular_bound_gives_norm_bound
            && self.norm_bound_gives_modular_bound
            && self.unit_norm_gives_unit_modular
            && self.sandwich_holds
            && (self.norm == 0.0 || (self.unity - 1.0).abs() <= unity_tol)
    }
}

pub fn norm_modular_bridge(space: &FiniteSpace, p: &ExponentFunction, f: &PointFunction) -> Result<BridgeReport> {
    if !p.is_finite() {
        return Err(Error::InfiniteExponent);
    }
    check_len(space, f.len())?;
    let terms = ModularTerms::whole(space, p, &f.values);
    let m = terms.rho(1.0);
    let norm = terms.norm(DEFAULT_TOL);
    let (pm, pp) = (p.p_minus(), p.p_plus());
    // The computed norm is an upper bracket accurate to DEFAULT_TOL (relative
    // below one), so comparisons against it carry that much slack.
    let slack = 1.0 + 1e-8;
    let unit_modular_gives_unit_norm = m > 1.0 || norm <= slack;
    let modular_bound_gives_norm_bound = m < 1.0 || norm <= m.powf(1.0 / pm) * slack;
    let norm_bound_gives_modular_bound = m <= (norm + 1.0).powf(pp) * slack;
    let unit_norm_gives_unit_modular = norm > 1.0 || m <= slack;
    let unity = if norm > 0.0 { terms.rho(norm) } else { 0.0 };
    let (lo, hi) = if norm <= 1.0 { (norm.powf(pp), norm.powf(pm)) } else { (norm.powf(pm), norm.powf(pp)) };
    let sandwich_slack = 1e-6;
    let sandwich_holds = m >= lo * (1.0 - sandwich_slack) && m <= hi * (1.0 + sandwich_slack);
    Ok(BridgeReport {
        modular: m,
        norm,
        p_minus: pm,
        p_plus: pp,
        unit_modular_gives_unit_norm,
        modular_bound_gives_norm_bound,
        norm_bound_gives_modular_bound,
        unit_norm_gives_unit_modular,
        unity,
        sandwich_holds,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TransferVariant {
    /// 0 <= r - s <= C0 / log(e + d(x0, .)) on the region; any f.
    OneSided,
    /// |r - s| <= C0 / log(e + d(x0, .)) and |f| <= 1.
    TwoSided,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferReport {
    pub lhs: f64,
    pub rhs: f64,
    /// The multiplier e^{C0 t}.
    pub constant: f64,
    /// Smallest C0 satisfying the gap condition on the region.
    pub c0: f64,
    pub variant: TransferVariant,
}

impl TransferReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12)
    }
}

/// Evaluates both sides of
/// sum_G |f|^s mu <= C sum_G |f|^r mu + sum_G (e + d(x0, .))^{-t s_-(G)} mu
/// with C = e^{C0 t}.
pub fn transfer_inequality_check(
    space: &FiniteSpace,
    x0: PointId,
    s: &ExponentFunction,
    r: &ExponentFunction,
    t: f64,
    f: &PointFunction,
    region: &[PointId],
) -> Result<TransferReport> {
    space.check_point(x0)?;
    check_len(space, f.len())?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(t >= 1.0) {
        return Err(Error::Config(format!("t must be >= 1, got {t}")));
    }
    let weight = |y: PointId| (E + space.d(x0, y)).ln();
    let mut c0: f64 = 0.0;
    let mut one_sided = true;
    for &y in region {
        let (sy, ry) = (s.at(y), r.at(y));
        if !sy.is_finite() || !ry.is_finite() {
            return Err(Error::GapConditionViolated(y));
        }
        if ry < sy {
            one_sided = false;
        }
        c0 = c0.max((ry - sy).abs() * weight(y));
    }
    let variant = if one_sided {
        TransferVariant::OneSided
    } else {
        if let Some(&y) = region.iter().find(|&&y| f.values[y].abs() > 1.0) {
            return Err(Error::FunctionExceedsOne(y));
        }
        TransferVariant::TwoSided
    };
    let s_minus = s.extrema(region)?.0;
    let pow = |a: f64, e: f64| if a == 0.0 { 0.0 } else { a.powf(e) };
    let lhs: f64 = region.iter().map(|&y| pow(f.values[y].abs(), s.at(y)) * space.mass(y)).sum();
    let main: f64 = region.iter().map(|&y| pow(f.values[y].abs(), r.at(y)) * space.mass(y)).sum();
    let tail: f64 = region
        .iter()
        .map(|&y| (E + space.d(x0, y)).powf(-t * s_minus) * space.mass(y))
        .sum();
    let constant = (c0 * t).exp();
    Ok(TransferReport { lhs, rhs: constant * main + tail, constant, c0, variant })
}
