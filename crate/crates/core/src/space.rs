//! Finite spaces of homogeneous type: a point set with a quasi-metric table
//! and strictly positive point masses, plus the ball, doubling and
//! lower-mass queries that everything else is built on.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PointId = usize;

/// How point masses are assigned on generated Euclidean grids. Masses are
/// always scaled by the cell volume `spacing^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum MassRule {
    Uniform,
    /// mass_i = cell * ratio^i along the row-major point order; the
    /// exponentially growing negative control for doubling scans.
    Geometric { ratio: f64 },
    /// mass = cell * (|x| + spacing/2)^exponent, |x| the distance to the origin.
    Power { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    EuclideanGrid {
        dim: usize,
        side: usize,
        spacing: f64,
        #[serde(default = "uniform_rule")]
        mass: MassRule,
    },
    /// d(x, y) = |x - y|^gamma over the 1-D grid {0, spacing, ..., (n-1) spacing}.
    PowerMetric { n: usize, spacing: f64, gamma: f64 },
    /// The 2^depth endpoints of the gaps removed at the last stage of a
    /// Cantor construction with the given contraction ratio.
    Cantor { depth: u32, ratio: f64 },
    Explicit { path: PathBuf },
}

fn uniform_rule() -> MassRule {
    MassRule::Uniform
}

impl SpaceSpec {
    /// The same family at resolution `n`, keeping the geometric extent fixed.
    pub fn at_resolution(&self, n: usize) -> Result<SpaceSpec> {
        if n == 0 {
            return Err(Error::InvalidSpec("resolution must be positive".into()));
        }
        match self {
            SpaceSpec::EuclideanGrid { dim, side, spacing, mass } => {
                let extent = *side as f64 * spacing;
                Ok(SpaceSpec::EuclideanGrid {
                    dim: *dim,
                    side: n,
                    spacing: extent / n as f64,
                    mass: mass.clone(),
                })
            }
            SpaceSpec::PowerMetric { n: old, spacing, gamma } => {
                let extent = *old as f64 * spacing;
                Ok(SpaceSpec::PowerMetric { n, spacing: extent / n as f64, gamma: *gamma })
            }
            SpaceSpec::Cantor { ratio, .. } => {
                if !n.is_power_of_two() {
                    return Err(Error::InvalidSpec(format!(
                        "cantor resolution must be a power of two, got {n}"
                    )));
                }
                Ok(SpaceSpec::Cantor { depth: n.trailing_zeros(), ratio: *ratio })
            }
            SpaceSpec::Explicit { .. } => {
                Err(Error::InvalidSpec("explicit spaces cannot be refined".into()))
            }
        }
    }
}

fn kv_pairs(body: &str) -> Result<Vec<(String, String)>> {
    body.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidSpec(format!("cannot parse `{key}` value `{v}`")))
}

/// Parses compact specs such as `grid:dim=1,side=16,spacing=1`,
/// `power:n=16,gamma=2`, `cantor:depth=3,ratio=0.3333` or `explicit:path=x.json`.
impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return Ok(serde_json::from_str(s)?);
        }
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let pairs = kv_pairs(body)?;
        let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        match kind {
            "grid" | "line" => {
                let dim = get("dim").map(|v| parse_num("dim", v)).transpose()?.unwrap_or(1);
                let side = parse_num("side", get("side").or(get("n")).unwrap_or("8"))?;
                let spacing = get("spacing").map(|v| parse_num("spacing", v)).transpose()?.unwrap_or(1.0);
                let mass = match get("mass").unwrap_or("uniform") {
                    "uniform" => MassRule::Uniform,
                    "geometric" => MassRule::Geometric {
                        ratio: parse_num("ratio", get("ratio").unwrap_or("2"))?,
                    },
                    "power" => MassRule::Power {
                        exponent: parse_num("exponent", get("exponent").unwrap_or("1"))?,
                    },
                    other => return Err(Error::InvalidSpec(format!("unknown mass rule `{other}`"))),
                };
                Ok(SpaceSpec::EuclideanGrid { dim, side, spacing, mass })
            }
            "power" => Ok(SpaceSpec::PowerMetric {
                n: parse_num("n", get("n").unwrap_or("8"))?,
                spacing: get("spacing").map(|v| parse_num("spacing", v)).transpose()?.unwrap_or(1.0),
                gamma: parse_num("gamma", get("gamma").unwrap_or("2"))?,
            }),
            "cantor" => Ok(SpaceSpec::Cantor {
                depth: parse_num("depth", get("depth").unwrap_or("3"))?,
                ratio: get("ratio").map(|v| parse_num("ratio", v)).transpose()?.unwrap_or(1.0 / 3.0),
            }),
            "explicit" => Ok(SpaceSpec::Explicit {
                path: PathBuf::from(
                    get("path").ok_or_else(|| Error::InvalidSpec("explicit needs path=".into()))?,
                ),
            }),
            other => Err(Error::InvalidSpec(format!("unknown space kind `{other}`"))),
        }
    }
}

/// A ball of the canonical family: `members` is exactly `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: PointId,
    pub radius: f64,
    pub members: Vec<PointId>,
}

/// Per-center distance orderings. Every distinct ball about `c` is a prefix
/// of `order[c]`; `cuts[c]` lists the prefix lengths, smallest first.
#[derive(Debug)]
pub struct BallIndex {
    pub order: Vec<Vec<PointId>>,
    pub cuts: Vec<Vec<usize>>,
    pub radii: Vec<Vec<f64>>,
    /// `level[c][y]`: index of the smallest ball about `c` containing `y`.
    pub level: Vec<Vec<usize>>,
}

impl BallIndex {
    fn build(space: &FiniteSpace) -> Self {
        let n = space.n();
        let per_center: Vec<_> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut order: Vec<PointId> = (0..n).collect();
                order.sort_by(|&a, &b| space.d(c, a).total_cmp(&space.d(c, b)).then(a.cmp(&b)));
                let mut cuts = Vec::new();
                let mut radii = Vec::new();
                let mut level = vec![0usize; n];
                let mut i = 0;
                while i < n {
                    let d = space.d(c, order[i]);
                    let mut j = i;
                    while j < n && space.d(c, order[j]) == d {
                        level[order[j]] = cuts.len();
                        j += 1;
                    }
                    let radius = if j < n {
                        0.5 * (d + space.d(c, order[j]))
                    } else if d > 0.0 {
                        2.0 * d
                    } else {
                        1.0
                    };
                    cuts.push(j);
                    radii.push(radius);
                    i = j;
                }
                (order, cuts, radii, level)
            })
            .collect();
        let mut idx = BallIndex {
            order: Vec::with_capacity(n),
            cuts: Vec::with_capacity(n),
            radii: Vec::with_capacity(n),
            level: Vec::with_capacity(n),
        };
        for (o, c, r, l) in per_center {
            idx.order.push(o);
            idx.cuts.push(c);
            idx.radii.push(r);
            idx.level.push(l);
        }
        idx
    }

    pub fn members(&self, center: PointId, k: usize) -> &[PointId] {
        &self.order[center][..self.cuts[center][k]]
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceFile {
    n: usize,
    /// Row-major strict lower triangle: d(1,0), d(2,0), d(2,1), ...
    dist: Vec<f64>,
    mass: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a0_declared: Option<f64>,
}

pub struct FiniteSpace {
    n: usize,
    dist: Vec<f64>,
    mass: Vec<f64>,
    a0_declared: Option<f64>,
    balls: OnceLock<BallIndex>,
    distinct: OnceLock<Vec<Ball>>,
}

impl fmt::Debug for FiniteSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteSpace")
            .field("n", &self.n)
            .field("a0_declared", &self.a0_declared)
            .finish_non_exhaustive()
    }
}

impl Clone for FiniteSpace {
    fn clone(&self) -> Self {
        FiniteSpace {
            n: self.n,
            dist: self.dist.clone(),
            mass: self.mass.clone(),
            a0_declared: self.a0_declared,
            balls: OnceLock::new(),
            distinct: OnceLock::new(),
        }
    }
}

impl FiniteSpace {
    /// Builds a space from a full row-major `n x n` distance table.
    pub fn new(dist: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        let n = mass.len();
        if dist.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, actual: dist.len() });
        }
        for (index, &m) in mass.iter().enumerate() {
            if !(m > 0.0 && m.is_finite()) {
                return Err(Error::InvalidMass { index, value: m });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                let bad = !d.is_finite() || d < 0.0 || (i == j) != (d == 0.0);
                if bad {
                    return Err(Error::InvalidDistance { i, j, value: d });
                }
                if d != dist[j * n + i] {
                    return Err(Error::AsymmetricDistance(i, j));
                }
            }
        }
        Ok(FiniteSpace {
            n,
            dist,
            mass,
            a0_declared: None,
            balls: OnceLock::new(),
            distinct: OnceLock::new(),
        })
    }

    pub fn with_declared_a0(mut self, a0: f64) -> Self {
        self.a0_declared = Some(a0);
        self
    }

    /// Builds a space from point coordinates under the Euclidean metric.
    pub fn from_points(points: &[Vec<f64>], mass: Vec<f64>) -> Result<Self> {
        Self::from_points_with(points, mass, |a, b| euclid(a, b))
    }

    fn from_points_with(
        points: &[Vec<f64>],
        mass: Vec<f64>,
        metric: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<Self> {
        let n = points.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = metric(&points[i], &points[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::new(dist, mass)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self, x: PointId, y: PointId) -> f64 {
        self.dist[x * self.n + y]
    }

    #[inline]
    pub fn mass(&self, x: PointId) -> f64 {
        self.mass[x]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn a0_declared(&self) -> Option<f64> {
        self.a0_declared
    }

    pub fn all_points(&self) -> Vec<PointId> {
        (0..self.n).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist.iter().copied().filter(|&d| d > 0.0).min_by(f64::total_cmp)
    }

    pub fn check_point(&self, x: PointId) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::PointOutOfRange(x))
        }
    }

    /// The points `y` with `d(center, y) < r`, in increasing index order.
    pub fn ball(&self, center: PointId, r: f64) -> Vec<PointId> {
        assert!(r > 0.0, "ball radius must be positive");
        (0..self.n).filter(|&y| self.d(center, y) < r).collect()
    }

    pub fn measure(&self, pts: &[PointId]) -> f64 {
        pts.iter().map(|&x| self.mass[x]).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn ball_index(&self) -> &BallIndex {
        self.balls.get_or_init(|| BallIndex::build(self))
    }

    /// Every distinct set `B(x, r)`, listed once, center-major. On a finite
    /// space this realizes the supremum over all balls.
    pub fn canonical_balls(&self) -> &[Ball] {
        self.distinct.get_or_init(|| {
            let idx = self.ball_index();
            let mut seen: HashSet<Vec<PointId>> = HashSet::new();
            let mut out = Vec::new();
            for c in 0..self.n {
                for (k, &radius) in idx.radii[c].iter().enumerate() {
                    let mut members = idx.members(c, k).to_vec();
                    members.sort_unstable();
                    if seen.insert(members.clone()) {
                        out.push(Ball { center: c, radius, members });
                    }
                }
            }
            out
        })
    }

    /// Sorted realized positive distances with the midpoints between
    /// consecutive values inserted.
    pub fn default_radii(&self) -> Vec<f64> {
        let mut ds: Vec<f64> = self.dist.iter().copied().filter(|&d| d > 0.0).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        let mut out = Vec::with_capacity(2 * ds.len());
        for (i, &d) in ds.iter().enumerate() {
            if i > 0 {
                out.push(0.5 * (ds[i - 1] + d));
            }
            out.push(d);
        }
        out
    }

    fn realized_distances(&self) -> Vec<f64> {
        let mut ds: Vec<f64> = self.dist.iter().copied().filter(|&d| d > 0.0).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup();
        ds
    }

    /// Cumulative ball masses about each center, as (sorted distances, prefix masses).
    fn radial_profiles(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.radial_profiles_for(&self.mass)
    }

    fn radial_profiles_for(&self, mass: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let idx = self.ball_index();
        (0..self.n)
            .map(|c| {
                let ds: Vec<f64> = idx.order[c].iter().map(|&y| self.d(c, y)).collect();
                let mut acc = 0.0;
                let cum = idx.order[c]
                    .iter()
                    .map(|&y| {
                        acc += mass[y];
                        acc
                    })
                    .collect();
                (ds, cum)
            })
            .collect()
    }

    /// Smallest A0 with d(x,y) <= A0 (d(x,z) + d(z,y)) over all nondegenerate triples.
    pub fn quasimetric_constant(&self) -> f64 {
        let n = self.n;
        (0..n)
            .into_par_iter()
            .map(|x| {
                let mut worst: f64 = 1.0;
                for y in (x + 1)..n {
                    let dxy = self.d(x, y);
                    for z in 0..n {
                        if z == x || z == y {
                            continue;
                        }
                        worst = worst.max(dxy / (self.d(x, z) + self.d(z, y)));
                    }
                }
                worst
            })
            .reduce(|| 1.0, f64::max)
    }

    /// max over centers and radii of mu(B(x,2r)) / mu(B(x,r)); `None` scans
    /// [`Self::default_radii`].
    pub fn doubling_constant(&self, radii: Option<&[f64]>) -> f64 {
        self.doubling_constant_for(&self.mass, radii)
    }

    /// Doubling constant of the measure with point masses `mass` (for
    /// instance a weighted measure W dmu) over this space's balls.
    pub fn doubling_constant_for(&self, mass: &[f64], radii: Option<&[f64]>) -> f64 {
        let owned;
        let radii = match radii {
            Some(r) => r,
            None => {
                owned = self.default_radii();
                &owned
            }
        };
        let profiles = self.radial_profiles_for(mass);
        profiles
            .par_iter()
            .map(|(ds, cum)| {
                let ball_mass = |r: f64| cum[ds.partition_point(|&d| d < r) - 1];
                radii
                    .iter()
                    .filter(|&&r| r > 0.0)
                    .map(|&r| ball_mass(2.0 * r) / ball_mass(r))
                    .fold(1.0, f64::max)
            })
            .reduce(|| 1.0, f64::max)
    }

    /// Largest C with mu(B(y,r)) / mu(B(x,R)) >= C (r/R)^{log2 C_mu} for all
    /// centers x, realized radii 0 < r < R and y in B(x,R).
    pub fn lower_mass_check(&self) -> LowerMassReport {
        let c_mu = self.doubling_constant(None);
        let exponent = c_mu.log2();
        let radii = self.realized_distances();
        let m = radii.len();
        if m < 2 {
            return LowerMassReport { constant: 1.0, exponent, witness: None };
        }
        let profiles = self.radial_profiles();
        // q[y][i] = mu(B(y, r_i)) / r_i^s, prefix-minimized over i.
        let prefmin: Vec<Vec<(f64, usize)>> = profiles
            .par_iter()
            .map(|(ds, cum)| {
                let mut best = (f64::INFINITY, 0);
                let mut out = Vec::with_capacity(m);
                for (i, &r) in radii.iter().enumerate() {
                    out.push(best);
                    let q = cum[ds.partition_point(|&d| d < r) - 1] / r.powf(exponent);
                    if q < best.0 {
                        best = (q, i);
                    }
                }
                out
            })
            .collect();
        let best = (0..self.n)
            .into_par_iter()
            .map(|x| {
                let (ds, cum) = &profiles[x];
                let order = &self.ball_index().order[x];
                let mut local = (f64::INFINITY, None);
                for (i, &big) in radii.iter().enumerate().skip(1) {
                    let len = ds.partition_point(|&d| d < big);
                    let scale = big.powf(exponent) / cum[len - 1];
                    for &y in &order[..len] {
                        let (q, j) = prefmin[y][i];
                        let cand = q * scale;
                        if cand < local.0 {
                            local = (
                                cand,
                                Some(LowerMassWitness { x, big_radius: big, y, small_radius: radii[j] }),
                            );
                        }
                    }
                }
                local
            })
            .reduce(
                || (f64::INFINITY, None),
                |a, b| if b.0 < a.0 || (b.0 == a.0 && witness_key(&b.1) < witness_key(&a.1)) { b } else { a },
            );
        LowerMassReport { constant: best.0, exponent, witness: best.1 }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut lower = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 1..self.n {
            for j in 0..i {
                lower.push(self.d(i, j));
            }
        }
        let file = SpaceFile { n: self.n, dist: lower, mass: self.mass.clone(), a0_declared: self.a0_declared };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpaceFile = serde_json::from_str(text)?;
        let n = file.n;
        let expected = n * n.saturating_sub(1) / 2;
        if file.dist.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: file.dist.len() });
        }
        if file.mass.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: file.mass.len() });
        }
        let mut dist = vec![0.0; n * n];
        let mut it = file.dist.into_iter();
        for i in 1..n {
            for j in 0..i {
                let d = it.next().expect("length checked");
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let space = FiniteSpace::new(dist, file.mass)?;
        Ok(match file.a0_declared {
            Some(a0) => space.with_declared_a0(a0),
            None => space,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn witness_key(w: &Option<LowerMassWitness>) -> (usize, usize) {
    w.as_ref().map_or((usize::MAX, usize::MAX), |w| (w.x, w.y))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerMassWitness {
    pub x: PointId,
    pub big_radius: f64,
    pub y: PointId,
    pub small_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LowerMassReport {
    pub constant: f64,
    /// log2 of the doubling constant used in the scan.
    pub exponent: f64,
    pub witness: Option<LowerMassWitness>,
}

pub fn generate_space(spec: &SpaceSpec) -> Result<FiniteSpace> {
    match spec {
        SpaceSpec::EuclideanGrid { dim, side, spacing, mass } => {
            if *dim == 0 || *side == 0 || !(*spacing > 0.0) {
                return Err(Error::InvalidSpec("grid needs dim, side >= 1 and spacing > 0".into()));
            }
            let total = side
                .checked_pow(*dim as u32)
                .filter(|&t| t <= 1 << 16)
                .ok_or_else(|| Error::InvalidSpec("grid too large".into()))?;
            let cell = spacing.powi(*dim as i32);
            let mut points = Vec::with_capacity(total);
            for idx in 0..total {
                let mut rem = idx;
                let mut coords = vec![0.0; *dim];
                for c in coords.iter_mut().rev() {
                    *c = (rem % side) as f64 * spacing;
                    rem /= side;
                }
                points.push(coords);
            }
            let masses = points
                .iter()
                .enumerate()
                .map(|(i, p)| match mass {
                    MassRule::Uniform => cell,
                    MassRule::Geometric { ratio } => cell * ratio.powi(i as i32),
                    MassRule::Power { exponent } => {
                        let r = p.iter().map(|c| c * c).sum::<f64>().sqrt();
                        cell * (r + 0.5 * spacing).powf(*exponent)
                    }
                })
                .collect();
            Ok(FiniteSpace::from_points(&points, masses)?.with_declared_a0(1.0))
        }
        SpaceSpec::PowerMetric { n, spacing, gamma } => {
            if !(*gamma >= 1.0) {
                return Err(Error::InvalidGamma(*gamma));
            }
            if *n == 0 || !(*spacing > 0.0) {
                return Err(Error::InvalidSpec("power metric needs n >= 1 and spacing > 0".into()));
            }
            let points: Vec<Vec<f64>> = (0..*n).map(|i| vec![i as f64 * spacing]).collect();
            let g = *gamma;
            let space = FiniteSpace::from_points_with(&points, vec![*spacing; *n], |a, b| {
                (a[0] - b[0]).abs().powf(g)
            })?;
            Ok(space.with_declared_a0(2f64.powf(g - 1.0)))
        }
        SpaceSpec::Cantor { depth, ratio } => {
            if *depth == 0 || *depth > 12 || !(*ratio > 0.0 && *ratio < 0.5) {
                return Err(Error::InvalidSpec("cantor needs 1 <= depth <= 12 and 0 < ratio < 1/2".into()));
            }
            let mut intervals = vec![(0.0f64, 1.0f64)];
            for _ in 1..*depth {
                intervals = intervals
                    .into_iter()
                    .flat_map(|(a, len)| [(a, len * ratio), (a + len - len * ratio, len * ratio)])
                    .collect();
            }
            let points: Vec<Vec<f64>> = intervals
                .iter()
                .flat_map(|&(a, len)| [vec![a + len * ratio], vec![a + len - len * ratio]])
                .collect();
            let n = points.len();
            Ok(FiniteSpace::from_points(&points, vec![1.0 / n as f64; n])?.with_declared_a0(1.0))
        }
        SpaceSpec::Explicit { path } => FiniteSpace::load(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> FiniteSpace {
        generate_space(&SpaceSpec::EuclideanGrid { dim: 1, side: n, spacing: 1.0, mass: MassRule::Uniform })
            .unwrap()
    }

    fn power(n: usize, gamma: f64) -> FiniteSpace {
        generate_space(&SpaceSpec::PowerMetric { n, spacing: 1.0, gamma }).unwrap()
    }

    #[test]
    fn power_metric_squares_distances() {
        let s = power(3, 2.0);
        assert_eq!(s.d(0, 2), 4.0);
        assert_eq!(s.d(0, 1), 1.0);
        assert_eq!(s.d(1, 2), 1.0);
        assert_eq!(s.a0_declared(), Some(2.0));
    }

    #[test]
    fn unit_grid_distances_and_masses() {
        let s = line(3);
        assert_eq!(s.d(0, 2), 2.0);
        assert!(s.masses().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn cantor_depth_two_siblings() {
        // Gaps removed at stage two: (1/9, 2/9) and (7/9, 8/9).
        let s = generate_space(&SpaceSpec::Cantor { depth: 2, ratio: 1.0 / 3.0 }).unwrap();
        assert_eq!(s.n(), 4);
        let by_hand: [f64; 4] = [1.0 / 9.0, 2.0 / 9.0, 7.0 / 9.0, 8.0 / 9.0];
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.d(i, j) - (by_hand[i] - by_hand[j]).abs()).abs() < 1e-15);
            }
        }
        assert!((s.d(0, 1) - 1.0 / 9.0).abs() < 1e-15);
        assert!((s.d(2, 3) - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            generate_space(&SpaceSpec::PowerMetric { n: 3, spacing: 1.0, gamma: 0.5 }),
            Err(Error::InvalidGamma(_))
        ));
        assert!(matches!(
            FiniteSpace::new(vec![0.0, 1.0, 2.0, 0.0], vec![1.0, 1.0]),
            Err(Error::AsymmetricDistance(..))
        ));
        assert!(matches!(
            FiniteSpace::new(vec![0.0, -1.0, -1.0, 0.0], vec![1.0, 1.0]),
            Err(Error::InvalidDistance { .. })
        ));
        assert!(matches!(
            FiniteSpace::new(vec![0.0, 1.0, 1.0, 0.0], vec![1.0, 0.0]),
            Err(Error::InvalidMass { index: 1, .. })
        ));
    }

    #[test]
    fn balls_use_strict_inequality() {
        let s = line(3);
        assert_eq!(s.ball(1, 1.5), vec![0, 1, 2]);
        assert_eq!(s.ball(0, 1.0), vec![0]);
        assert_eq!(power(3, 2.0).ball(0, 2.0), vec![0, 1]);
    }

    #[test]
    fn measure_sums_masses() {
        let s = FiniteSpace::new(vec![0.0; 0], vec![]).unwrap();
        assert_eq!(s.measure(&[]), 0.0);
        assert_eq!(line(5).measure(&[0, 1, 2, 3, 4]), 5.0);
        let pts: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let s = FiniteSpace::from_points(&pts, vec![1.0, 0.5, 0.25]).unwrap();
        assert_eq!(s.measure(&[0, 2]), 1.25);
    }

    #[test]
    fn quasimetric_constants() {
        assert_eq!(line(10).quasimetric_constant(), 1.0);
        // Brute force over all triples of a squared-distance line gives
        // (a+b)^2 <= 2(a^2+b^2), tight at a = b.
        assert_eq!(power(9, 2.0).quasimetric_constant(), 2.0);
        assert_eq!(line(2).quasimetric_constant(), 1.0);
    }

    #[test]
    fn doubling_constants() {
        let one = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(one.doubling_constant(None), 1.0);
        assert_eq!(line(32).doubling_constant(None), 3.0);

        let geometric = |n| {
            generate_space(&SpaceSpec::EuclideanGrid {
                dim: 1,
                side: n,
                spacing: 1.0,
                mass: MassRule::Geometric { ratio: 2.0 },
            })
            .unwrap()
            .doubling_constant(None)
        };
        let (a, b, c) = (geometric(8), geometric(16), geometric(32));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn lower_mass_bound() {
        let one = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(one.lower_mass_check().constant, 1.0);
        let r = line(16).lower_mass_check();
        assert!(r.constant > 0.0);
        let w = r.witness.clone().unwrap();
        let s = line(16);
        let lhs = s.measure(&s.ball(w.y, w.small_radius)) / s.measure(&s.ball(w.x, w.big_radius));
        let rhs = (w.small_radius / w.big_radius).powf(r.exponent);
        assert!((lhs / rhs - r.constant).abs() <= 1e-12 * r.constant);

        let refined: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| {
                generate_space(&SpaceSpec::EuclideanGrid {
                    dim: 1,
                    side: n,
                    spacing: 1.0 / n as f64,
                    mass: MassRule::Uniform,
                })
                .unwrap()
                .lower_mass_check()
                .constant
            })
            .collect();
        let lo = refined.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.1, "{refined:?}");
    }

    #[test]
    fn canonical_balls_are_distinct_and_exact() {
        let s = power(7, 2.0);
        let balls = s.canonical_balls();
        let mut seen = HashSet::new();
        for b in balls {
            assert_eq!(s.ball(b.center, b.radius), b.members);
            assert!(seen.insert(b.members.clone()));
        }
        // Every ball at every realized radius shows up.
        for c in 0..s.n() {
            for r in s.default_radii() {
                assert!(seen.contains(&s.ball(c, r)));
            }
        }
    }

    #[test]
    fn json_roundtrip_and_spec_parsing() {
        let s = power(5, 1.5);
        let back = FiniteSpace::from_json(&s.to_json().unwrap()).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s.d(i, j), back.d(i, j));
            }
        }
        assert_eq!(back.a0_declared(), s.a0_declared());
        let spec: SpaceSpec = "power:n=16,gamma=2".parse().unwrap();
        assert_eq!(spec, SpaceSpec::PowerMetric { n: 16, spacing: 1.0, gamma: 2.0 });
        let spec: SpaceSpec = "grid:dim=2,side=8".parse().unwrap();
        assert_eq!(generate_space(&spec).unwrap().n(), 64);
        assert!("blob:n=3".parse::<SpaceSpec>().is_err());
    }

    #[test]
    fn refinement_keeps_extent() {
        let spec = SpaceSpec::EuclideanGrid { dim: 1, side: 16, spacing: 1.0 / 16.0, mass: MassRule::Uniform };
        let s = generate_space(&spec.at_resolution(64).unwrap()).unwrap();
        assert_eq!(s.n(), 64);
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
    }
}
