//! Hierarchical dyadic grids built from nested greedy nets, their verifier,
//! and finite families of grids covering every ball.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Ball, FiniteSpace, PointId};

const MAX_LEVELS: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicCube {
    pub id: usize,
    pub generation: i32,
    pub center: PointId,
    /// Sorted point ids.
    pub members: Vec<PointId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicGrid {
    n: usize,
    d0: f64,
    seed: u64,
    achieved_cd: f64,
    achieved_eps: f64,
    bottom: i32,
    cubes: Vec<DyadicCube>,
    /// Cube ids per generation, index 0 is the bottom generation.
    levels: Vec<Vec<usize>>,
    /// owner[level][x] = id of the cube holding x, `usize::MAX` if none.
    owner: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct LevelFile {
    generation: i32,
    cubes: Vec<DyadicCube>,
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    n: usize,
    d0: f64,
    seed: u64,
    achieved_cd: f64,
    achieved_eps: f64,
    levels: Vec<LevelFile>,
}

impl Serialize for DyadicGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(l, ids)| LevelFile {
                generation: self.bottom + l as i32,
                cubes: ids.iter().map(|&i| self.cubes[i].clone()).collect(),
            })
            .collect();
        GridFile {
            n: self.n,
            d0: self.d0,
            seed: self.seed,
            achieved_cd: self.achieved_cd,
            achieved_eps: self.achieved_eps,
            levels,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DyadicGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = GridFile::deserialize(d)?;
        let bottom = f.levels.first().map(|l| l.generation).unwrap_or(0);
        let mut cubes = Vec::new();
        let mut levels = Vec::new();
        for l in f.levels {
            levels.push(l.cubes.iter().map(|c| c.id).collect());
            cubes.extend(l.cubes);
        }
        cubes.sort_by_key(|c| c.id);
        DyadicGrid::from_parts(f.n, f.d0, f.seed, bottom, cubes, levels, f.achieved_cd, f.achieved_eps)
            .map_err(serde::de::Error::custom)
    }
}

impl DyadicGrid {
    /// Assembles a grid without checking the dyadic properties; only ids,
    /// generations, and point ranges are validated. `verify_grid` decides
    /// whether the result is a dyadic grid.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        d0: f64,
        seed: u64,
        bottom: i32,
        cubes: Vec<DyadicCube>,
        levels: Vec<Vec<usize>>,
        achieved_cd: f64,
        achieved_eps: f64,
    ) -> Result<Self> {
        if !(d0 > 1.0 && d0.is_finite()) {
            return Err(Error::InvalidD0(d0));
        }
        if levels.is_empty() {
            return Err(Error::Config("grid has no levels".into()));
        }
        let bad = |m: String| Err(Error::Config(m));
        for (i, c) in cubes.iter().enumerate() {
            if c.id != i {
                return bad(format!("cube ids must be 0..{}, found {}", cubes.len(), c.id));
            }
            if c.members.is_empty() || c.members.iter().any(|&x| x >= n) {
                return bad(format!("cube {i} has empty or out-of-range members"));
            }
            if c.center >= n {
                return bad(format!("cube {i} has out-of-range center"));
            }
            if c.parent.iter().chain(&c.children).any(|&j| j >= cubes.len()) {
                return bad(format!("cube {i} links to an unknown cube"));
            }
        }
        let mut seen = vec![false; cubes.len()];
        let mut owner = Vec::with_capacity(levels.len());
        for (l, ids) in levels.iter().enumerate() {
            let mut own = vec![usize::MAX; n];
            for &i in ids {
                if i >= cubes.len() || seen[i] || cubes[i].generation != bottom + l as i32 {
                    return bad(format!("cube {i} listed inconsistently at level {l}"));
                }
                seen[i] = true;
                for &x in &cubes[i].members {
                    if own[x] == usize::MAX {
                        own[x] = i;
                    }
                }
            }
            owner.push(own);
        }
        if seen.iter().any(|s| !s) {
            return bad("a cube belongs to no level".into());
        }
        Ok(DyadicGrid { n, d0, seed, achieved_cd, achieved_eps, bottom, cubes, levels, owner })
    }

    /// The one-level grid {X} at the smallest generation whose inner ball
    /// already covers X.
    pub fn trivial(space: &FiniteSpace, d0: f64) -> Result<Self> {
        if !(d0 > 1.0 && d0.is_finite()) {
            return Err(Error::InvalidD0(d0));
        }
        let k = top_generation(space.diameter(), d0);
        let cube = DyadicCube {
            id: 0,
            generation: k,
            center: medoid(space, &space.all_points()),
            members: space.all_points(),
            parent: None,
            children: vec![],
        };
        DyadicGrid::from_parts(space.n(), d0, 0, k, vec![cube], vec![vec![0]], 1.0, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d0(&self) -> f64 {
        self.d0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn achieved_cd(&self) -> f64 {
        self.achieved_cd
    }

    pub fn achieved_eps(&self) -> f64 {
        self.achieved_eps
    }

    pub fn bottom(&self) -> i32 {
        self.bottom
    }

    pub fn top(&self) -> i32 {
        self.bottom + self.levels.len() as i32 - 1
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn cube(&self, id: usize) -> &DyadicCube {
        &self.cubes[id]
    }

    fn level_index(&self, k: i32) -> Result<usize> {
        if k < self.bottom || k > self.top() {
            return Err(Error::GenerationOutOfRange { requested: k, bottom: self.bottom, top: self.top() });
        }
        Ok((k - self.bottom) as usize)
    }

    /// Cube ids of generation k.
    pub fn level(&self, k: i32) -> Result<&[usize]> {
        Ok(&self.levels[self.level_index(k)?])
    }

    /// Cube ids by level, bottom first.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    /// The generation-k cube holding x.
    pub fn owner(&self, k: i32, x: PointId) -> Result<Option<usize>> {
        let o = self.owner[self.level_index(k)?][x];
        Ok((o != usize::MAX).then_some(o))
    }

    /// Smallest cube containing every point of `set`, or `None` if the top
    /// level does not cover it.
    pub fn smallest_cube_containing(&self, set: &[PointId]) -> Option<usize> {
        let first = *set.first()?;
        self.owner.iter().find_map(|own| {
            let q = own[first];
            (q != usize::MAX && set.iter().all(|&x| own[x] == q)).then_some(q)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

fn top_generation(diam: f64, d0: f64) -> i32 {
    if diam <= 0.0 {
        return 0;
    }
    let mut k = (diam.ln() / d0.ln()).floor() as i32;
    while d0.powi(k) <= diam {
        k += 1;
    }
    while k > i32::MIN + 1 && d0.powi(k - 1) > diam {
        k -= 1;
    }
    k
}

/// Mass-weighted medoid, ties to the smaller index.
pub fn medoid(space: &FiniteSpace, pts: &[PointId]) -> PointId {
    let mut best = (f64::INFINITY, usize::MAX);
    for &x in pts {
        let c: f64 = pts.iter().map(|&y| space.mass(y) * space.d(x, y)).sum();
        if c < best.0 || (c == best.0 && x < best.1) {
            best = (c, x);
        }
    }
    best.1
}

/// A0-based default: max(2, 8 A0^2).
pub fn default_d0(space: &FiniteSpace) -> f64 {
    let a0 = space.a0_declared().unwrap_or_else(|| space.quasimetric_constant());
    (8.0 * a0 * a0).max(2.0)
}

struct RawCube {
    net_center: PointId,
    members: Vec<PointId>,
    parent: Option<usize>,
}

/// Builds a grid with the top-level net seeded by the medoid of X.
pub fn build_grid(space: &FiniteSpace, d0: Option<f64>, seed: u64) -> Result<DyadicGrid> {
    build_grid_with_top(space, d0, seed, None)
}

/// Builds a grid whose top-level net is seeded by `top_center` (the medoid
/// when `None`).
pub fn build_grid_with_top(space: &FiniteSpace, d0: Option<f64>, seed: u64, top_center: Option<PointId>) -> Result<DyadicGrid> {
    let d0 = d0.unwrap_or_else(|| default_d0(space));
    if !(d0 > 1.0 && d0.is_finite()) {
        return Err(Error::InvalidD0(d0));
    }
    let n = space.n();
    if n == 0 {
        return Err(Error::EmptyRegion);
    }
    let all = space.all_points();
    let top_net = match top_center {
        Some(c) => {
            space.check_point(c)?;
            c
        }
        None => medoid(space, &all),
    };
    let mut perm: Vec<PointId> = all.clone();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rank = vec![0usize; n];
    for (r, &x) in perm.iter().enumerate() {
        rank[x] = r;
    }

    // Nested nets, coarsest first, at scales d0^k for k = k_top, k_top - 1, ...
    // Each level keeps the previous net and adds points greedily in order of
    // distance from the top center; a new net point hangs below its nearest
    // previous net point, and a cube is the set of descendants.
    let k_top = top_generation(space.diameter(), d0);
    let mut order = all.clone();
    order.sort_by(|&a, &b| space.d(top_net, a).total_cmp(&space.d(top_net, b)).then(rank[a].cmp(&rank[b])));
    let mut nets: Vec<Vec<PointId>> = vec![vec![top_net]];
    let mut parent_of: Vec<Vec<usize>> = vec![vec![]];
    let mut in_net = vec![false; n];
    in_net[top_net] = true;
    let mut k = k_top;
    while nets.last().expect("nonempty").len() < n {
        if nets.len() >= MAX_LEVELS {
            return Err(Error::GridConstruction {
                scale: d0.powi(k),
                reason: format!("more than {MAX_LEVELS} levels before reaching singletons"),
            });
        }
        k -= 1;
        let s = d0.powi(k);
        if s == 0.0 {
            return Err(Error::GridConstruction { scale: s, reason: "scale underflow".into() });
        }
        let prev = nets.last().expect("nonempty");
        let mut net = prev.clone();
        for &y in &order {
            if !in_net[y] && net.iter().all(|&z| space.d(y, z) >= s) {
                net.push(y);
                in_net[y] = true;
            }
        }
        let parents: Vec<usize> = net
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if i < prev.len() {
                    return i;
                }
                let mut best = 0;
                for (j, &c) in prev.iter().enumerate().skip(1) {
                    let (dc, db) = (space.d(z, c), space.d(z, prev[best]));
                    if dc < db || (dc == db && c < prev[best]) {
                        best = j;
                    }
                }
                best
            })
            .collect();
        nets.push(net);
        parent_of.push(parents);
    }
    let num = nets.len();
    let mut members: Vec<Vec<Vec<PointId>>> = vec![Vec::new(); num];
    members[num - 1] = nets[num - 1].iter().map(|&z| vec![z]).collect();
    for l in (1..num).rev() {
        let mut up = vec![Vec::new(); nets[l - 1].len()];
        for (i, m) in members[l].iter().enumerate() {
            up[parent_of[l][i]].extend_from_slice(m);
        }
        for m in &mut up {
            m.sort_unstable();
        }
        members[l - 1] = up;
    }
    // Cubes of each level ordered by parent position, then by smallest member.
    let mut raw: Vec<Vec<RawCube>> = Vec::with_capacity(num);
    let mut pos: Vec<usize> = vec![0];
    raw.push(vec![RawCube { net_center: top_net, members: members[0][0].clone(), parent: None }]);
    for l in 1..num {
        let mut idx: Vec<usize> = (0..nets[l].len()).collect();
        idx.sort_by_key(|&i| (pos[parent_of[l][i]], members[l][i][0]));
        let mut next_pos = vec![0; idx.len()];
        let mut level = Vec::with_capacity(idx.len());
        for (p, &i) in idx.iter().enumerate() {
            next_pos[i] = p;
            level.push(RawCube { net_center: nets[l][i], members: std::mem::take(&mut members[l][i]), parent: Some(pos[parent_of[l][i]]) });
        }
        raw.push(level);
        pos = next_pos;
    }

    // Published centers: the point deepest inside its cube, i.e. the one
    // farthest from the complement; the medoid on the top cube.
    let mut centers: Vec<Vec<PointId>> = Vec::with_capacity(num);
    let mut depth_min: Vec<f64> = Vec::with_capacity(num);
    for (l, level) in raw.iter().enumerate() {
        if l == 0 {
            centers.push(vec![medoid(space, &all)]);
            depth_min.push(f64::INFINITY);
            continue;
        }
        let mut own = vec![0usize; n];
        for (ci, c) in level.iter().enumerate() {
            for &x in &c.members {
                own[x] = ci;
            }
        }
        let depth: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|x| (0..n).filter(|&y| own[y] != own[x]).map(|y| space.d(x, y)).fold(f64::INFINITY, f64::min))
            .collect();
        let mut cs = Vec::with_capacity(level.len());
        let mut m = f64::INFINITY;
        for c in level {
            let mut best = c.net_center;
            for &x in &c.members {
                let tie_wins = best != c.net_center && rank[x] < rank[best];
                if depth[x] > depth[best] || (depth[x] == depth[best] && tie_wins) {
                    best = x;
                }
            }
            m = m.min(depth[best]);
            cs.push(best);
        }
        centers.push(cs);
        depth_min.push(m);
    }

    // Generation labels: construction level l (scale exponent k_top - l) is
    // published as generation k_top - l + shift, with shift chosen so every
    // inner ball B(center, d0^generation) lies inside its cube.
    let mut shift = 0i32;
    for (l, &m) in depth_min.iter().enumerate() {
        if m.is_finite() {
            let kl = k_top - l as i32;
            shift = shift.min((m.ln() / d0.ln()).floor() as i32 - kl);
        }
    }
    let fits = |shift: i32| depth_min.iter().enumerate().all(|(l, &m)| d0.powi(k_top - l as i32 + shift) <= m);
    while !fits(shift) {
        shift -= 1;
    }
    while shift < 0 && fits(shift + 1) {
        shift += 1;
    }

    let mut cubes: Vec<DyadicCube> = Vec::new();
    let mut ids: Vec<Vec<usize>> = Vec::with_capacity(num);
    for (l, level) in raw.iter().enumerate() {
        let generation = k_top - l as i32 + shift;
        let mut lv = Vec::with_capacity(level.len());
        for (ci, c) in level.iter().enumerate() {
            let id = cubes.len();
            let parent = c.parent.map(|pi| ids[l - 1][pi]);
            if let Some(p) = parent {
                cubes[p].children.push(id);
            }
            cubes.push(DyadicCube {
                id,
                generation,
                center: centers[l][ci],
                members: {
                    let mut m = c.members.clone();
                    m.sort_unstable();
                    m
                },
                parent,
                children: vec![],
            });
            lv.push(id);
        }
        ids.push(lv);
    }
    ids.reverse();
    let bottom = k_top - (num as i32 - 1) + shift;
    let (cd, eps) = measured_constants(space, d0, &cubes);
    DyadicGrid::from_parts(n, d0, seed, bottom, cubes, ids, cd, eps)
}

/// (C_d, eps) measured from the cubes: the smallest C_d with every cube
/// inside the open ball of radius C_d d0^k about its center (at least 1),
/// and the smallest child/parent mass ratio (1 without children).
fn measured_constants(space: &FiniteSpace, d0: f64, cubes: &[DyadicCube]) -> (f64, f64) {
    let mut cd: f64 = 1.0;
    let mut eps: f64 = 1.0;
    for q in cubes {
        let s = d0.powi(q.generation);
        let far = q.members.iter().map(|&y| space.d(q.center, y)).fold(0.0, f64::max);
        if far / s >= cd {
            cd = (far / s).next_up();
        }
        if let Some(p) = q.parent {
            eps = eps.min(space.measure(&q.members) / space.measure(&cubes[p].members));
        }
    }
    (cd, eps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub property: u8,
    pub name: String,
    pub pass: bool,
    pub witness_point: Option<PointId>,
    pub witness_cube: Option<usize>,
    pub detail: Option<String>,
}

impl PropertyCheck {
    fn ok(property: u8, name: &str) -> Self {
        PropertyCheck { property, name: name.into(), pass: true, witness_point: None, witness_cube: None, detail: None }
    }

    fn fail(&mut self, point: Option<PointId>, cube: Option<usize>, detail: String) {
        if self.pass {
            self.pass = false;
            self.witness_point = point;
            self.witness_cube = cube;
            self.detail = Some(detail);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub checks: Vec<PropertyCheck>,
    pub achieved_cd: f64,
    pub achieved_eps: f64,
}

impl GridReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn property(&self, p: u8) -> &PropertyCheck {
        &self.checks[(p - 1) as usize]
    }
}

/// Exhaustive check of the five grid properties. Property 5 uses the grid's
/// recorded C_d; the report also carries C_d and eps recomputed from scratch.
pub fn verify_grid(space: &FiniteSpace, grid: &DyadicGrid) -> GridReport {
    let n = space.n();
    let mut partition = PropertyCheck::ok(1, "partition");
    let mut nesting = PropertyCheck::ok(2, "nesting");
    let mut parents = PropertyCheck::ok(3, "parents");
    let mut mass = PropertyCheck::ok(4, "child mass");
    let mut sandwich = PropertyCheck::ok(5, "sandwich");
    if grid.n != n {
        partition.fail(None, None, format!("grid has {} points, space has {n}", grid.n));
        return GridReport {
            checks: vec![partition, nesting, parents, mass, sandwich],
            achieved_cd: f64::NAN,
            achieved_eps: f64::NAN,
        };
    }
    let levels = &grid.levels;
    for (l, ids) in levels.iter().enumerate() {
        let mut count = vec![0usize; n];
        for &i in ids {
            for &x in &grid.cubes[i].members {
                count[x] += 1;
            }
        }
        if let Some(x) = (0..n).find(|&x| count[x] != 1) {
            partition.fail(Some(x), None, format!("point {x} lies in {} cubes of generation {}", count[x], grid.bottom + l as i32));
        }
    }
    for l in 0..levels.len().saturating_sub(1) {
        let up = &grid.owner[l + 1];
        for &i in &levels[l] {
            let q = &grid.cubes[i];
            let host = up[q.members[0]];
            if let Some(&x) = q.members.iter().find(|&&x| up[x] != host) {
                nesting.fail(Some(x), Some(i), format!("cube {i} meets two cubes of the next generation at point {x}"));
            }
        }
    }
    let top = levels.len() - 1;
    for (l, ids) in levels.iter().enumerate() {
        for &i in ids {
            let q = &grid.cubes[i];
            if l < top {
                match q.parent {
                    None => parents.fail(None, Some(i), format!("cube {i} has no parent")),
                    Some(p) => {
                        let pc = &grid.cubes[p];
                        if pc.generation != q.generation + 1 || !pc.children.contains(&i) {
                            parents.fail(None, Some(i), format!("cube {i} and its parent {p} are not linked"));
                        } else if let Some(&x) = q.members.iter().find(|x| pc.members.binary_search(x).is_err()) {
                            parents.fail(Some(x), Some(i), format!("point {x} of cube {i} is outside its parent {p}"));
                        }
                    }
                }
            } else if q.parent.is_some() {
                parents.fail(None, Some(i), format!("top cube {i} has a parent"));
            }
            if l > 0 && q.children.is_empty() {
                parents.fail(None, Some(i), format!("cube {i} has no children"));
            }
            if let Some(p) = q.parent {
                let ratio = space.measure(&q.members) / space.measure(&grid.cubes[p].members);
                if !(ratio >= grid.achieved_eps && ratio > 0.0) {
                    mass.fail(None, Some(i), format!("mass ratio {ratio} below recorded eps {}", grid.achieved_eps));
                }
            }
            let s = grid.d0.powi(q.generation);
            let mut inside = vec![false; n];
            for &x in &q.members {
                inside[x] = true;
            }
            if let Some(y) = (0..n).find(|&y| space.d(q.center, y) < s && !inside[y]) {
                sandwich.fail(Some(y), Some(i), format!("inner ball of cube {i} contains outside point {y}"));
            }
            let outer = grid.achieved_cd * s;
            if let Some(&y) = q.members.iter().find(|&&y| space.d(q.center, y) >= outer) {
                sandwich.fail(Some(y), Some(i), format!("point {y} of cube {i} lies outside the outer ball"));
            }
        }
    }
    let (achieved_cd, achieved_eps) = measured_constants(space, grid.d0, &grid.cubes);
    GridReport { checks: vec![partition, nesting, parents, mass, sandwich], achieved_cd, achieved_eps }
}

#[derive(Clone, Debug)]
pub struct AdjacentFamily {
    pub grids: Vec<DyadicGrid>,
    /// max over canonical balls B of min over grids of mu(Q)/mu(B), Q the
    /// smallest cube containing B.
    pub covering_factor: f64,
    pub worst_ball: Ball,
    /// For the worst ball: (grid index, cube id).
    pub worst_cover: (usize, usize),
}

/// Largest number of top-center candidates.
const MAX_TOP_CANDIDATES: usize = 64;
/// Largest number of candidate combinations scored jointly before falling
/// back to adding grids one at a time.
const MAX_JOINT_COMBINATIONS: usize = 100_000;

/// Scale ratio used by `adjacent_family` when none is given: max(2, 2 A0).
pub fn default_family_d0(space: &FiniteSpace) -> f64 {
    let a0 = space.a0_declared().unwrap_or_else(|| space.quasimetric_constant());
    (2.0 * a0).max(2.0)
}

/// Per ball: (mu(Q)/mu(B), cube id) for the smallest cube Q of `g` containing B.
fn ball_covers(space: &FiniteSpace, g: &DyadicGrid, balls: &[Ball]) -> Vec<(f64, usize)> {
    balls
        .iter()
        .map(|b| match g.smallest_cube_containing(&b.members) {
            Some(q) => (space.measure(&g.cube(q).members) / space.measure(&b.members), q),
            None => (f64::INFINITY, 0),
        })
        .collect()
}

/// (max, sum) over balls of the best factor among the given cover vectors.
fn family_score(covers: &[&[(f64, usize)]]) -> (f64, f64) {
    let len = covers[0].len();
    (0..len).fold((0.0f64, 0.0), |(m, s), i| {
        let r = covers.iter().map(|c| c[i].0).fold(f64::INFINITY, f64::min);
        (m.max(r), s + r)
    })
}

fn better(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Next k-combination of 0..n in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// One grid per seed, all at the same scale ratio. Grid 0 seeds its top net at
/// the medoid; the other grids seed theirs at candidate points chosen to
/// minimize the covering factor of the family, then the sum of per-ball
/// factors. Candidates are the points in order of distance from the medoid,
/// thinned to at most 64. All candidate combinations are scored when there
/// are at most 100000 of them; otherwise grids are added one at a time.
pub fn adjacent_family(space: &FiniteSpace, d0: Option<f64>, seeds: &[u64]) -> Result<AdjacentFamily> {
    if seeds.is_empty() {
        return Err(Error::Config("adjacent family needs at least one seed".into()));
    }
    let d0v = d0.unwrap_or_else(|| default_family_d0(space));
    if !(d0v > 1.0 && d0v.is_finite()) {
        return Err(Error::InvalidD0(d0v));
    }
    let all = space.all_points();
    let m = medoid(space, &all);
    let mut cand = all.clone();
    cand.sort_by(|&a, &b| space.d(m, a).total_cmp(&space.d(m, b)).then(a.cmp(&b)));
    let stride = cand.len().div_ceil(MAX_TOP_CANDIDATES);
    let cand: Vec<PointId> = cand.into_iter().step_by(stride).collect();
    let balls = space.canonical_balls();

    let first = build_grid_with_top(space, Some(d0v), seeds[0], Some(m))?;
    let first_covers = ball_covers(space, &first, balls);
    let extra = seeds.len() - 1;
    let mut grids = vec![first];
    let mut chosen_covers = vec![first_covers];
    if extra > 0 && binomial(cand.len(), extra) <= MAX_JOINT_COMBINATIONS {
        let built: Vec<Vec<(DyadicGrid, Vec<(f64, usize)>)>> = seeds[1..]
            .iter()
            .map(|&seed| {
                cand.par_iter()
                    .map(|&y| {
                        let g = build_grid_with_top(space, Some(d0v), seed, Some(y))?;
                        let c = ball_covers(space, &g, balls);
                        Ok((g, c))
                    })
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        let mut combos = Vec::new();
        let mut c: Vec<usize> = (0..extra).collect();
        loop {
            combos.push(c.clone());
            if !next_combination(&mut c, cand.len()) {
                break;
            }
        }
        let base = &chosen_covers[0];
        let scores: Vec<(f64, f64)> = combos
            .par_iter()
            .map(|combo| {
                let mut cv: Vec<&[(f64, usize)]> = vec![base];
                cv.extend(combo.iter().enumerate().map(|(j, &ci)| built[j][ci].1.as_slice()));
                family_score(&cv)
            })
            .collect();
        let mut pick = 0;
        for (i, &sc) in scores.iter().enumerate() {
            if better(sc, scores[pick]) {
                pick = i;
            }
        }
        for (j, mut per_seed) in built.into_iter().enumerate() {
            let (g, c) = per_seed.swap_remove(combos[pick][j]);
            grids.push(g);
            chosen_covers.push(c);
        }
    } else {
        for &seed in &seeds[1..] {
            let tried: Vec<(DyadicGrid, Vec<(f64, usize)>, (f64, f64))> = cand
                .par_iter()
                .map(|&y| {
                    let g = build_grid_with_top(space, Some(d0v), seed, Some(y))?;
                    let c = ball_covers(space, &g, balls);
                    let mut cv: Vec<&[(f64, usize)]> = chosen_covers.iter().map(|v| v.as_slice()).collect();
                    cv.push(&c);
                    let score = family_score(&cv);
                    Ok((g, c, score))
                })
                .collect::<Result<_>>()?;
            let mut pick = 0;
            for (i, t) in tried.iter().enumerate() {
                if better(t.2, tried[pick].2) {
                    pick = i;
                }
            }
            let (g, c, _) = tried.into_iter().nth(pick).expect("nonempty candidates");
            grids.push(g);
            chosen_covers.push(c);
        }
    }
    let mut best = vec![(f64::INFINITY, 0usize, 0usize); balls.len()];
    for (gi, cv) in chosen_covers.iter().enumerate() {
        for (b, &(r, q)) in best.iter_mut().zip(cv) {
            if r < b.0 {
                *b = (r, gi, q);
            }
        }
    }
    let mut worst = 0;
    for (i, v) in best.iter().enumerate() {
        if v.0 > best[worst].0 {
            worst = i;
        }
    }
    Ok(AdjacentFamily {
        covering_factor: best[worst].0,
        worst_ball: balls[worst].clone(),
        worst_cover: (best[worst].1, best[worst].2),
        grids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{generate_space, MassRule, SpaceSpec};

    fn line(n: usize) -> FiniteSpace {
        generate_space(&SpaceSpec::EuclideanGrid { dim: 1, side: n, spacing: 1.0, mass: MassRule::Uniform }).unwrap()
    }

    #[test]
    fn one_point_space() {
        let s = FiniteSpace::new(vec![0.0], vec![2.0]).unwrap();
        let g = build_grid(&s, None, 0).unwrap();
        assert_eq!(g.num_levels(), 1);
        assert_eq!((g.achieved_cd(), g.achieved_eps()), (1.0, 1.0));
        assert!(verify_grid(&s, &g).all_pass());
    }

    #[test]
    fn unit_line_blocks_are_contiguous() {
        let s = line(8);
        let g = build_grid(&s, Some(2.0), 0).unwrap();
        let r = verify_grid(&s, &g);
        assert!(r.all_pass(), "{r:?}");
        let counts: Vec<usize> = g.levels().iter().rev().map(|ids| ids.len()).collect();
        assert_eq!(counts, vec![1, 2, 4, 8]);
        for ids in g.levels() {
            for &i in ids {
                let m = &g.cube(i).members;
                assert_eq!(m.last().unwrap() - m[0] + 1, m.len(), "cube {m:?} is not contiguous");
            }
        }
    }

    #[test]
    fn builds_verify_on_generated_spaces() {
        for spec in [
            "power:n=24,gamma=2",
            "grid:dim=2,side=6,spacing=1,mass=uniform",
            "cantor:depth=4,ratio=0.3",
            "grid:dim=1,side=40,spacing=0.25,mass=geometric,ratio=1.1",
        ] {
            let s = generate_space(&spec.parse().unwrap()).unwrap();
            for seed in 0..3 {
                let g = build_grid(&s, None, seed).unwrap();
                let r = verify_grid(&s, &g);
                assert!(r.all_pass(), "{spec} seed {seed}: {r:?}");
                assert_eq!(r.achieved_cd, g.achieved_cd());
                assert_eq!(r.achieved_eps, g.achieved_eps());
                assert!(g.achieved_eps() > 0.0 && g.achieved_eps() <= 1.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = generate_space(&"power:n=20,gamma=1.5".parse().unwrap()).unwrap();
        assert_eq!(build_grid(&s, None, 7).unwrap(), build_grid(&s, None, 7).unwrap());
    }

    #[test]
    fn moved_point_is_witnessed() {
        let s = line(16);
        let g = build_grid(&s, Some(2.0), 1).unwrap();
        // A level above the bottom with two sibling cubes whose moved point
        // shares its child cube with another point.
        let (l, a, b, y) = (1..g.num_levels())
            .find_map(|l| {
                g.levels()[l].iter().find_map(|&a| {
                    let p = g.cube(a).parent?;
                    let b = *g.cube(p).children.iter().find(|&&b| b != a)?;
                    let y = g.cube(a).children.iter().map(|&c| &g.cube(c).members).find(|m| m.len() > 1)?[0];
                    Some((l, a, b, y))
                })
            })
            .expect("some movable point");
        let _ = l;
        let mut cubes = g.cubes().to_vec();
        cubes[a].members.retain(|&x| x != y);
        cubes[b].members.push(y);
        cubes[b].members.sort_unstable();
        let bad = DyadicGrid::from_parts(
            g.n(),
            g.d0(),
            g.seed(),
            g.bottom(),
            cubes,
            g.levels().to_vec(),
            g.achieved_cd(),
            g.achieved_eps(),
        )
        .unwrap();
        let r = verify_grid(&s, &bad);
        assert!(!r.all_pass());
        let failing: Vec<_> = r.checks.iter().filter(|c| !c.pass).collect();
        assert!(failing.iter().any(|c| (c.property == 2 || c.property == 5) && c.witness_point == Some(y)), "{r:?}");
    }

    #[test]
    fn trivial_grid() {
        let s = line(8);
        let g = DyadicGrid::trivial(&s, 2.0).unwrap();
        let r = verify_grid(&s, &g);
        assert!(r.all_pass(), "{r:?}");
    }

    #[test]
    fn json_roundtrip() {
        let s = generate_space(&"power:n=12,gamma=2".parse().unwrap()).unwrap();
        let g = build_grid(&s, None, 3).unwrap();
        let back: DyadicGrid = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn generation_range_errors() {
        let s = line(4);
        let g = build_grid(&s, Some(2.0), 0).unwrap();
        assert!(matches!(g.level(g.top() + 1), Err(Error::GenerationOutOfRange { .. })));
        assert!(build_grid(&s, Some(1.0), 0).is_err());
    }

    #[test]
    fn adjacent_family_covering() {
        let s = FiniteSpace::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(adjacent_family(&s, None, &[0]).unwrap().covering_factor, 1.0);
        let s = line(32);
        let mut prev = f64::INFINITY;
        for count in [1usize, 3, 5] {
            let seeds: Vec<u64> = (0..count as u64).collect();
            let fam = adjacent_family(&s, None, &seeds).unwrap();
            assert!(fam.covering_factor >= 1.0 && fam.covering_factor <= prev);
            for b in s.canonical_balls() {
                let best = fam
                    .grids
                    .iter()
                    .filter_map(|g| g.smallest_cube_containing(&b.members).map(|q| s.measure(&g.cube(q).members)))
                    .fold(f64::INFINITY, f64::min);
                assert!(best / s.measure(&b.members) <= fam.covering_factor);
            }
            prev = fam.covering_factor;
        }
    }
}
