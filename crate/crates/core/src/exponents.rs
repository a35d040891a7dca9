//! Exponent functions p(.) with values in [1, inf], their conjugates and the
//! log-Hölder diagnostics.

use std::f64::consts::E;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::space::{Ball, FiniteSpace, PointId};

/// Pointwise conjugate with 1 <-> inf.
pub fn conjugate_value(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// An exponent function on a finite space. The conjugate values are computed
/// once at construction and carried alongside, so [`Self::conjugate`] is an
/// exact involution.
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentFunction {
    values: Vec<f64>,
    conj: Vec<f64>,
    p_inf: f64,
    p_inf_conj: f64,
    base_point: PointId,
}

impl ExponentFunction {
    pub fn new(values: Vec<f64>, p_inf: f64, base_point: PointId) -> Result<Self> {
        for (index, &v) in values.iter().enumerate() {
            if v.is_nan() || v < 1.0 {
                return Err(Error::InvalidExponent { index, value: v });
            }
        }
        if p_inf.is_nan() || p_inf < 1.0 {
            return Err(Error::InvalidExponent { index: usize::MAX, value: p_inf });
        }
        if !values.is_empty() && base_point >= values.len() {
            return Err(Error::PointOutOfRange(base_point));
        }
        let conj = values.iter().map(|&v| conjugate_value(v)).collect();
        Ok(ExponentFunction { values, conj, p_inf, p_inf_conj: conjugate_value(p_inf), base_point })
    }

    /// p_inf defaults to the value at the point farthest from the base point.
    pub fn with_default_p_inf(space: &FiniteSpace, values: Vec<f64>, base_point: PointId) -> Result<Self> {
        space.check_point(base_point)?;
        let far = farthest_from(space, base_point);
        let p_inf = values.get(far).copied().ok_or(Error::LengthMismatch {
            expected: space.n(),
            actual: values.len(),
        })?;
        Self::new(values, p_inf, base_point)
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n], p, 0)
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

    pub fn p_inf(&self) -> f64 {
        self.p_inf
    }

    pub fn base_point(&self) -> PointId {
        self.base_point
    }

    pub fn with_base_point(&self, base_point: PointId) -> Result<Self> {
        if base_point >= self.values.len() {
            return Err(Error::PointOutOfRange(base_point));
        }
        let mut out = self.clone();
        out.base_point = base_point;
        Ok(out)
    }

    pub fn with_p_inf(&self, p_inf: f64) -> Result<Self> {
        Self::new(self.values.clone(), p_inf, self.base_point)
    }

    pub fn conjugate(&self) -> Self {
        ExponentFunction {
            values: self.conj.clone(),
            conj: self.values.clone(),
            p_inf: self.p_inf_conj,
            p_inf_conj: self.p_inf,
            base_point: self.base_point,
        }
    }

    /// Exact (min, max) over `region`.
    pub fn extrema(&self, region: &[PointId]) -> Result<(f64, f64)> {
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let mut lo = f64::INFINITY;
        let mut hi = 1.0f64;
        for &x in region {
            let v = *self.values.get(x).ok_or(Error::PointOutOfRange(x))?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    pub fn p_minus(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn p_plus(&self) -> f64 {
        self.values.iter().copied().fold(1.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InfiniteExponent)
        }
    }

    /// (X_1, X_inf, X_*): the points where p = 1, p = inf, 1 < p < inf.
    pub fn partition_sets(&self) -> (Vec<PointId>, Vec<PointId>, Vec<PointId>) {
        let mut ones = Vec::new();
        let mut infs = Vec::new();
        let mut star = Vec::new();
        for (x, &v) in self.values.iter().enumerate() {
            if v == 1.0 {
                ones.push(x);
            } else if v.is_infinite() {
                infs.push(x);
            } else {
                star.push(x);
            }
        }
        (ones, infs, star)
    }

    /// Smallest C0 with |p(x)-p(y)| <= C0 / log(1/d(x,y)) over pairs with
    /// 0 < d(x,y) < 1/2.
    pub fn lh0_constant(&self, space: &FiniteSpace) -> Result<f64> {
        self.lh0_constant_on(space, &space.all_points())
    }

    pub fn lh0_constant_on(&self, space: &FiniteSpace, pts: &[PointId]) -> Result<f64> {
        self.require_finite()?;
        Ok(pts
            .par_iter()
            .enumerate()
            .map(|(i, &x)| {
                pts[i + 1..]
                    .iter()
                    .filter_map(|&y| {
                        let d = space.d(x, y);
                        (d > 0.0 && d < 0.5).then(|| (self.values[x] - self.values[y]).abs() * (1.0 / d).ln())
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max))
    }

    /// Smallest C_inf with |p(x) - p_inf| <= C_inf / log(e + d(x0, x)).
    pub fn lhinf_constant(&self, space: &FiniteSpace) -> Result<f64> {
        self.lhinf_constant_on(space, &space.all_points())
    }

    pub fn lhinf_constant_on(&self, space: &FiniteSpace, pts: &[PointId]) -> Result<f64> {
        self.require_finite()?;
        Ok(pts
            .iter()
            .map(|&x| (self.values[x] - self.p_inf).abs() * (E + space.d(self.base_point, x)).ln())
            .fold(0.0, f64::max))
    }

    /// max over canonical balls of mu(B)^{p_-(B) - p_+(B)} and the attaining ball.
    pub fn oscillation_bound_scan(&self, space: &FiniteSpace) -> Result<(f64, Ball)> {
        self.require_finite()?;
        let balls = space.canonical_balls();
        let (value, idx) = balls
            .par_iter()
            .enumerate()
            .map(|(i, b)| {
                let (lo, hi) = self.extrema(&b.members).expect("balls are nonempty");
                (space.measure(&b.members).powf(lo - hi), i)
            })
            .reduce(|| (f64::NEG_INFINITY, usize::MAX), max_with_index);
        Ok((value, balls[idx].clone()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ExponentFile {
            values: self.values.iter().map(|&v| ExpValue(v)).collect(),
            p_inf: ExpValue(self.p_inf),
            base_point: self.base_point,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ExponentFile = serde_json::from_str(text)?;
        Self::new(f.values.into_iter().map(|v| v.0).collect(), f.p_inf.0, f.base_point)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Max reduction that keeps the smallest index among ties, so parallel
/// scans pick the same witness regardless of scheduling.
pub(crate) fn max_with_index(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

pub(crate) fn farthest_from(space: &FiniteSpace, x0: PointId) -> PointId {
    (0..space.n())
        .map(|y| (space.d(x0, y), y))
        .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
        .1
}

/// A number that serializes infinity as the string "inf".
#[derive(Clone, Copy, Debug)]
struct ExpValue(f64);

impl Serialize for ExpValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExpValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ExpValue(v)),
            Raw::Str(s) if s == "inf" => Ok(ExpValue(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected number or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ExponentFile {
    values: Vec<ExpValue>,
    p_inf: ExpValue,
    #[serde(default)]
    base_point: PointId,
}

/// The exponent families shipped for experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExponentSpec {
    Constant { value: f64 },
    /// p(x) = p_inf + c / log(e + d(x0, x)).
    Ramp { p_inf: f64, c: f64 },
    /// p(x) = mid + amplitude * sin(2 pi frequency d(x0, x) / diam).
    Sinusoid { mid: f64, amplitude: f64, frequency: f64 },
    /// low on d(x0, .) < threshold * diam, high elsewhere; not log-Hölder
    /// under refinement.
    Step { low: f64, high: f64, threshold: f64 },
}

impl FromStr for ExponentSpec {
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
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("cannot parse `{k}`")))?;
            vals.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, default: f64| vals.get(k).copied().unwrap_or(default);
        match kind {
            "constant" => Ok(ExponentSpec::Constant { value: get("value", 2.0) }),
            "ramp" => Ok(ExponentSpec::Ramp { p_inf: get("p_inf", 2.0), c: get("c", 0.5) }),
            "sinusoid" => Ok(ExponentSpec::Sinusoid {
                mid: get("mid", 2.0),
                amplitude: get("amplitude", 0.5),
                frequency: get("frequency", 1.0),
            }),
            "step" => Ok(ExponentSpec::Step {
                low: get("low", 1.5),
                high: get("high", 3.0),
                threshold: get("threshold", 0.5),
            }),
            other => Err(Error::InvalidSpec(format!("unknown exponent kind `{other}`"))),
        }
    }
}

pub fn generate_exponent(space: &FiniteSpace, spec: &ExponentSpec, base_point: PointId) -> Result<ExponentFunction> {
    space.check_point(base_point)?;
    let diam = space.diameter().max(f64::MIN_POSITIVE);
    let dist = |x: PointId| space.d(base_point, x);
    let n = space.n();
    match *spec {
        ExponentSpec::Constant { value } => ExponentFunction::new(vec![value; n], value, base_point),
        ExponentSpec::Ramp { p_inf, c } => {
            let values = (0..n).map(|x| p_inf + c / (E + dist(x)).ln()).collect();
            ExponentFunction::new(values, p_inf, base_point)
        }
        ExponentSpec::Sinusoid { mid, amplitude, frequency } => {
            let values = (0..n)
                .map(|x| mid + amplitude * (std::f64::consts::TAU * frequency * dist(x) / diam).sin())
                .collect();
            ExponentFunction::with_default_p_inf(space, values, base_point)
        }
        ExponentSpec::Step { low, high, threshold } => {
            let values = (0..n).map(|x| if dist(x) < threshold * diam { low } else { high }).collect();
            ExponentFunction::with_default_p_inf(space, values, base_point)
        }
    }
}
