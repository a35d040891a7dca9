//! Refinement experiments for the weighted maximal inequalities: test
//! function families, strong and weak type ratios, the necessity witness,
//! blow-up classification, and report emission.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::build_grid;
use crate::error::{Error, Result};
use crate::exponents::{conjugate_value, generate_exponent, ExponentFunction, ExponentSpec};
use crate::lpvar::{check_len, ModularTerms, PointFunction, DEFAULT_TOL};
use crate::operators::hl_maximal;
use crate::space::{generate_space, Ball, FiniteSpace, PointId, SpaceSpec};
use crate::weights::{apq_constant, generate_weight, Weight, WeightSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(default)]
    pub d0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    /// Indicators of all canonical balls.
    pub balls: bool,
    /// sigma chi_Q for every grid cube, sigma = w^{-p'}.
    pub cubes: bool,
    /// Number of random sparse sign functions.
    pub random: usize,
    /// Probability that a random sparse function is nonzero at a point.
    pub sparsity: f64,
    /// The necessity witness for every canonical ball (needs p_- > 1).
    pub witness: bool,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec { balls: true, cubes: true, random: 64, sparsity: 0.125, witness: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierParams {
    /// Bounded: last value <= bounded_factor * median.
    pub bounded_factor: f64,
    /// Diverging: increasing with last >= diverging_factor * first.
    pub diverging_factor: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams { bounded_factor: 1.25, diverging_factor: 1.5 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    CoBounded,
    CoDiverging,
    Mixed,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::CoBounded => "co-bounded",
            Classification::CoDiverging => "co-diverging",
            Classification::Mixed => "mixed",
        })
    }
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

/// Experiment configuration, read from TOML. Space, exponent and weight use
/// the compact spec syntax (or inline JSON); the space is regenerated at
/// each resolution in `refinement` with its extent fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: String,
    pub exponent: String,
    pub weight: String,
    #[serde(default)]
    pub base_point: PointId,
    pub refinement: Vec<usize>,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: GridParams,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub classifier: ClassifierParams,
    /// Classification the run must produce, if any.
    #[serde(default)]
    pub expect: Option<Classification>,
}

fn default_grid() -> GridParams {
    GridParams { d0: None }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement.is_empty() {
            return Err(Error::Config("refinement sequence is empty".into()));
        }
        if self.refinement.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("refinement sequence must be strictly increasing".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidTolerance(self.tolerance));
        }
        if !(self.family.sparsity > 0.0 && self.family.sparsity <= 1.0) {
            return Err(Error::Config("sparsity must lie in (0, 1]".into()));
        }
        self.space_spec()?;
        self.exponent_spec()?;
        self.weight_spec()?;
        Ok(())
    }

    pub fn space_spec(&self) -> Result<SpaceSpec> {
        self.space.parse()
    }

    pub fn exponent_spec(&self) -> Result<ExponentSpec> {
        self.exponent.parse()
    }

    pub fn weight_spec(&self) -> Result<WeightSpec> {
        self.weight.parse()
    }

    /// Space, exponent and weight at resolution n.
    pub fn instance(&self, n: usize) -> Result<(FiniteSpace, ExponentFunction, Weight)> {
        let space = generate_space(&self.space_spec()?.at_resolution(n)?)?;
        let p = generate_exponent(&space, &self.exponent_spec()?, self.base_point)?;
        let w = generate_weight(&space, &self.weight_spec()?, self.base_point)?;
        Ok((space, p, w))
    }
}

/// A member of a test-function family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub family: String,
    pub id: usize,
    pub f: PointFunction,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub family: String,
    pub f_id: usize,
    pub norm_mfw: f64,
    pub norm_fw: f64,
    pub ratio: f64,
    pub apq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementSummary {
    pub n: usize,
    pub apq: f64,
    pub sup_ratio: f64,
    pub sup_family: String,
    pub sup_f_id: usize,
    pub functions: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub experiment: String,
    pub rows: Vec<RatioRow>,
    pub summaries: Vec<RefinementSummary>,
    pub classification: Option<Classification>,
    pub assertions: Vec<AssertionOutcome>,
}

impl RatioReport {
    pub fn all_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }
}

fn norm_of(space: &FiniteSpace, p: &ExponentFunction, values: &[f64], tol: f64) -> f64 {
    ModularTerms::whole(space, p, values).norm(tol)
}

fn times(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn check_exponent(space: &FiniteSpace, p: &ExponentFunction, w: &Weight) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::InfiniteExponent);
    }
    check_len(space, p.len())?;
    check_len(space, w.len())
}

/// Random functions with values +-1 on a random support (never empty).
pub fn random_sparse_functions(n: usize, count: usize, sparsity: f64, seed: u64) -> Vec<PointFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(sparsity) { if rng.random_bool(0.5) { 1.0 } else { -1.0 } } else { 0.0 })
                .collect();
            if v.iter().all(|&x| x == 0.0) {
                v[rng.random_range(0..n)] = 1.0;
            }
            PointFunction::new(v)
        })
        .collect()
}

/// The configured families, in the fixed order balls, cubes, random, witness.
pub fn build_family(
    space: &FiniteSpace,
    p: &ExponentFunction,
    w: &Weight,
    spec: &FamilySpec,
    d0: Option<f64>,
    seed: u64,
) -> Result<Vec<TestFunction>> {
    let n = space.n();
    let mut out = Vec::new();
    if spec.balls {
        for (id, b) in space.canonical_balls().iter().enumerate() {
            out.push(TestFunction { family: "ball".into(), id, f: PointFunction::indicator(n, &b.members) });
        }
    }
    let pc = p.conjugate();
    if spec.cubes {
        let grid = build_grid(space, d0, seed)?;
        let sigma: Vec<f64> = (0..n).map(|x| w.at(x).powf(-pc.at(x))).collect();
        for q in grid.cubes() {
            let mut v = vec![0.0; n];
            for &x in &q.members {
                v[x] = if sigma[x].is_finite() { sigma[x] } else { 0.0 };
            }
            if v.iter().any(|&x| x > 0.0) {
                out.push(TestFunction { family: "cube".into(), id: q.id, f: PointFunction::new(v) });
            }
        }
    }
    for (id, f) in random_sparse_functions(n, spec.random, spec.sparsity, seed).into_iter().enumerate() {
        out.push(TestFunction { family: "random".into(), id, f });
    }
    if spec.witness && p.p_minus() > 1.0 && p.is_finite() {
        let witnesses: Vec<PointFunction> = space
            .canonical_balls()
            .par_iter()
            .map(|b| necessity_witness(space, p, w, b).map(|nw| nw.f))
            .collect::<Result<_>>()?;
        for (id, f) in witnesses.into_iter().enumerate() {
            out.push(TestFunction { family: "witness".into(), id, f });
        }
    }
    Ok(out)
}

/// (||(Mf)w||, ||fw||, ratio) for one function.
pub fn strong_ratio_one(space: &FiniteSpace, p: &ExponentFunction, w: &Weight, f: &PointFunction, tol: f64) -> Result<(f64, f64, f64)> {
    let mf = hl_maximal(space, f)?;
    let num = norm_of(space, p, &times(&mf.values, w.values()), tol);
    let den = norm_of(space, p, &times(&f.values, w.values()), tol);
    Ok((num, den, if den > 0.0 { num / den } else { 0.0 }))
}

/// (sup_t t ||w chi_{Mf >= t}||, ||fw||, ratio) with t over the distinct
/// positive values of Mf; t ||w chi_{Mf >= t}|| is the limit of
/// s ||w chi_{Mf > s}|| as s increases to t.
pub fn weak_ratio_one(space: &FiniteSpace, p: &ExponentFunction, w: &Weight, f: &PointFunction, tol: f64) -> Result<(f64, f64, f64)> {
    let mf = hl_maximal(space, f)?;
    let den = norm_of(space, p, &times(&f.values, w.values()), tol);
    let mut order: Vec<PointId> = (0..space.n()).filter(|&x| mf.values[x] > 0.0).collect();
    order.sort_by(|&a, &b| mf.values[b].total_cmp(&mf.values[a]).then(a.cmp(&b)));
    let mut best: f64 = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = mf.values[order[i]];
        let mut j = i;
        while j < order.len() && mf.values[order[j]] == t {
            j += 1;
        }
        let nb = ModularTerms::new(space, p, w.values(), &order[..j]).norm(tol);
        best = best.max(t * nb);
        i = j;
    }
    Ok((best, den, if den > 0.0 { best / den } else { 0.0 }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NecessityWitness {
    pub ball: Ball,
    /// The witness, built for the normalized weight `scale * w`; every
    /// ratio in which it enters is invariant under that scaling.
    pub f: PointFunction,
    pub scale: f64,
    /// The witness lives on {x in B : p'(x) < r}.
    pub r: f64,
    pub lambda: f64,
    /// rho_{p'}(w^{-1} chi_{F_R} / lambda) = rho_p(f w), in [1/3, 2].
    pub modular: f64,
    pub norm_fw: f64,
    /// 2^{1/(p')_-}.
    pub norm_bound: f64,
    pub min_mf: f64,
    /// lambda / (3 mu(B)).
    pub mf_bound: f64,
    /// ||w chi_B|| ||w^{-1} chi_B||' / mu(B).
    pub apq_ball: f64,
    /// t ||w chi_{Mf >= t}|| / ||fw|| at t = min_B Mf.
    pub weak_at_min: f64,
    /// 3 weak_at_min ||fw|| / lambda, an upper bound for apq_ball.
    pub cross_check: f64,
    /// 3 2^{1/(p')_-} weak_at_min / lambda.
    pub derived_bound: f64,
}

impl NecessityWitness {
    pub fn norm_certificate(&self) -> bool {
        self.norm_fw <= self.norm_bound
    }

    pub fn maximal_certificate(&self) -> bool {
        self.min_mf >= self.mf_bound
    }

    pub fn modular_in_range(&self) -> bool {
        self.modular >= 1.0 / 3.0 && self.modular <= 2.0
    }

    pub fn cross_check_holds(&self) -> bool {
        self.apq_ball <= self.cross_check * (1.0 + 1e-8) && self.apq_ball <= self.derived_bound * (1.0 + 1e-8)
    }

    pub fn all_hold(&self) -> bool {
        self.norm_certificate() && self.maximal_certificate() && self.modular_in_range() && self.cross_check_holds()
    }
}

/// The extremal function showing that the weak inequality on the ball B
/// forces the A_p(.) bound there: with ||w^{-1} chi_B||_{p'} = 1 after
/// scaling w, take the smallest R with rho_{p'}(w^{-1} chi_{F_R} / (3/4)) > 1/3
/// and the largest lambda with that modular still >= 1/3, and set
/// f = w^{-p'} lambda^{1-p'} chi_{F_R}.
pub fn necessity_witness(space: &FiniteSpace, p: &ExponentFunction, w: &Weight, ball: &Ball) -> Result<NecessityWitness> {
    check_exponent(space, p, w)?;
    if p.p_minus() <= 1.0 {
        return Err(Error::ExponentNotAboveOne(p.p_minus()));
    }
    if ball.members.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = space.n();
    let pc = p.conjugate();
    let tol = DEFAULT_TOL;
    let inv = w.inverse();
    let scale = ModularTerms::new(space, &pc, inv.values(), &ball.members).norm(tol);
    let ws: Vec<f64> = w.values().iter().map(|v| v * scale).collect();
    let ln_inv: Vec<f64> = ws.iter().map(|v| -v.ln()).collect();
    let g = |set: &[PointId], lambda: f64| -> f64 {
        let l = lambda.ln();
        set.iter().map(|&x| (pc.at(x) * (ln_inv[x] - l)).exp() * space.mass(x)).sum()
    };
    let lambda0 = 0.75;
    let mut thresholds: Vec<f64> = ball.members.iter().map(|&x| pc.at(x)).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mut chosen = None;
    for &t in &thresholds {
        let set: Vec<PointId> = ball.members.iter().copied().filter(|&x| pc.at(x) <= t).collect();
        if g(&set, lambda0) > 1.0 / 3.0 {
            chosen = Some((t.next_up(), set));
            break;
        }
    }
    let (r, set) = chosen.ok_or_else(|| Error::Certificate("no truncation level reaches modular 1/3".into()))?;
    let target = (1.0 + 1e-9) / 3.0;
    let lambda = if g(&set, lambda0) < target {
        lambda0
    } else {
        let (mut lo, mut hi) = (lambda0, 2.0 * lambda0);
        while g(&set, hi) >= target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
                break;
            }
            if g(&set, mid) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let modular = g(&set, lambda);
    let mut fv = vec![0.0; n];
    for &x in &set {
        let q = pc.at(x);
        fv[x] = ((q * ln_inv[x]) + (1.0 - q) * lambda.ln()).exp();
    }
    let f = PointFunction::new(fv);
    let norm_fw = norm_of(space, p, &times(&f.values, &ws), tol);
    let norm_bound = 2f64.powf(1.0 / conjugate_value(p.p_plus()));
    let mf = hl_maximal(space, &f)?;
    let min_mf = ball.members.iter().map(|&x| mf.values[x]).fold(f64::INFINITY, f64::min);
    let mu_b = space.measure(&ball.members);
    let mf_bound = lambda / (3.0 * mu_b);
    let apq_ball = ModularTerms::new(space, p, &ws, &ball.members).norm(tol) * ModularTerms::new(space, &pc, inv.values(), &ball.members).norm(tol)
        / scale
        / mu_b;
    let level: Vec<PointId> = (0..n).filter(|&x| mf.values[x] >= min_mf).collect();
    let weak_at_min = min_mf * ModularTerms::new(space, p, &ws, &level).norm(tol) / norm_fw;
    Ok(NecessityWitness {
        ball: ball.clone(),
        f,
        scale,
        r,
        lambda,
        modular,
        norm_fw,
        norm_bound,
        min_mf,
        mf_bound,
        apq_ball,
        weak_at_min,
        cross_check: 3.0 * weak_at_min * norm_fw / lambda,
        derived_bound: 3.0 * norm_bound * weak_at_min / lambda,
    })
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

pub fn is_bounded(seq: &[f64], params: &ClassifierParams) -> bool {
    !seq.is_empty() && *seq.last().expect("nonempty") <= params.bounded_factor * median(seq)
}

pub fn is_diverging(seq: &[f64], params: &ClassifierParams) -> bool {
    seq.len() >= 2
        && seq.windows(2).all(|w| w[1] > w[0])
        && *seq.last().expect("nonempty") >= params.diverging_factor * seq[0]
}

/// Joint classification of the A_p(.) constants and sup strong ratios.
pub fn classify(apq: &[f64], sup: &[f64], params: &ClassifierParams) -> Classification {
    if is_bounded(apq, params) && is_bounded(sup, params) {
        Classification::CoBounded
    } else if is_diverging(apq, params) && is_diverging(sup, params) {
        Classification::CoDiverging
    } else {
        Classification::Mixed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StrongType,
    WeakType,
    Necessity,
    Blowup,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::StrongType => "strong-type",
            ExperimentKind::WeakType => "weak-type",
            ExperimentKind::Necessity => "necessity",
            ExperimentKind::Blowup => "blowup",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong-type" => Ok(ExperimentKind::StrongType),
            "weak-type" => Ok(ExperimentKind::WeakType),
            "necessity" => Ok(ExperimentKind::Necessity),
            "blowup" => Ok(ExperimentKind::Blowup),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

fn outcome(name: &str, pass: bool, detail: String) -> AssertionOutcome {
    AssertionOutcome { name: name.into(), pass, detail }
}

fn summarize(n: usize, apq: f64, rows: &[RatioRow]) -> RefinementSummary {
    let mut best: Option<&RatioRow> = None;
    for r in rows {
        if best.is_none_or(|b| r.ratio > b.ratio) {
            best = Some(r);
        }
    }
    RefinementSummary {
        n,
        apq,
        sup_ratio: best.map_or(0.0, |b| b.ratio),
        sup_family: best.map_or_else(String::new, |b| b.family.clone()),
        sup_f_id: best.map_or(0, |b| b.f_id),
        functions: rows.len(),
    }
}

fn ratio_rows(n: usize, apq: f64, family: &[TestFunction], values: Vec<(f64, f64, f64)>) -> Vec<RatioRow> {
    family
        .iter()
        .zip(values)
        .map(|(t, (num, den, ratio))| RatioRow {
            n,
            family: t.family.clone(),
            f_id: t.id,
            norm_mfw: num,
            norm_fw: den,
            ratio,
            apq,
        })
        .collect()
}

fn expectation(config: &ExperimentConfig, class: Classification) -> Option<AssertionOutcome> {
    config
        .expect
        .map(|e| outcome("classification", e == class, format!("expected {e}, observed {class}")))
}

/// Strong-type ratios across the refinement sequence. Asserts Mf >= |f|
/// through every ratio being at least 1, the necessity certificates, and
/// the expected classification when one is configured.
pub fn strong_type_experiment(config: &ExperimentConfig) -> Result<RatioReport> {
    run_ratio_experiment(config, ExperimentKind::StrongType)
}

/// Weak-type ratios; asserts weak <= strong per function. With p_- = 1 no
/// bound is asserted.
pub fn weak_type_experiment(config: &ExperimentConfig) -> Result<RatioReport> {
    run_ratio_experiment(config, ExperimentKind::WeakType)
}

fn run_ratio_experiment(config: &ExperimentConfig, kind: ExperimentKind) -> Result<RatioReport> {
    config.validate()?;
    let tol = config.tolerance;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut assertions = Vec::new();
    let mut min_ratio = f64::INFINITY;
    let mut weak_excess: f64 = 0.0;
    let mut cert_failures = 0;
    let mut witnesses = 0;
    for &n in &config.refinement {
        let (space, p, w) = config.instance(n)?;
        check_exponent(&space, &p, &w)?;
        let (apq, _) = apq_constant(&space, &p, &w, None)?;
        let family = build_family(&space, &p, &w, &config.family, config.grid.d0, config.seed)?;
        if config.family.witness && p.p_minus() > 1.0 {
            for b in space.canonical_balls() {
                witnesses += 1;
                if !necessity_witness(&space, &p, &w, b)?.all_hold() {
                    cert_failures += 1;
                }
            }
        }
        let strong: Vec<(f64, f64, f64)> =
            family.par_iter().map(|t| strong_ratio_one(&space, &p, &w, &t.f, tol)).collect::<Result<_>>()?;
        min_ratio = strong.iter().map(|s| s.2).fold(min_ratio, f64::min);
        let values = if kind == ExperimentKind::WeakType {
            let weak: Vec<(f64, f64, f64)> =
                family.par_iter().map(|t| weak_ratio_one(&space, &p, &w, &t.f, tol)).collect::<Result<_>>()?;
            for (wk, st) in weak.iter().zip(&strong) {
                weak_excess = weak_excess.max(wk.2 / st.2 - 1.0);
            }
            weak
        } else {
            strong
        };
        let r = ratio_rows(n, apq, &family, values);
        summaries.push(summarize(n, apq, &r));
        rows.extend(r);
    }
    assertions.push(outcome("maximal dominates", min_ratio >= 1.0 - 1e-8, format!("smallest strong ratio {min_ratio:.12e}")));
    if kind == ExperimentKind::WeakType {
        assertions.push(outcome("weak below strong", weak_excess <= 1e-8, format!("largest relative excess {weak_excess:.3e}")));
    }
    assertions.push(outcome(
        "necessity certificates",
        cert_failures == 0,
        format!("{cert_failures} failures in {witnesses} witnesses"),
    ));
    let apq: Vec<f64> = summaries.iter().map(|s| s.apq).collect();
    let sup: Vec<f64> = summaries.iter().map(|s| s.sup_ratio).collect();
    let classification = (config.refinement.len() >= 3).then(|| classify(&apq, &sup, &config.classifier));
    if let Some(c) = classification {
        assertions.extend(expectation(config, c));
    }
    Ok(RatioReport { experiment: kind.name().into(), rows, summaries, classification, assertions })
}

/// One witness per canonical ball at every resolution; rows carry the
/// witness's strong ratio, and every certificate is asserted.
pub fn necessity_experiment(config: &ExperimentConfig) -> Result<RatioReport> {
    config.validate()?;
    let tol = config.tolerance;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    let mut total = 0;
    for &n in &config.refinement {
        let (space, p, w) = config.instance(n)?;
        let (apq, _) = apq_constant(&space, &p, &w, None)?;
        let ws: Vec<NecessityWitness> = space
            .canonical_balls()
            .par_iter()
            .map(|b| necessity_witness(&space, &p, &w, b))
            .collect::<Result<_>>()?;
        let r: Vec<RatioRow> = ws
            .par_iter()
            .enumerate()
            .map(|(id, nw)| {
                let (num, den, ratio) = strong_ratio_one(&space, &p, &w, &nw.f, tol)?;
                Ok(RatioRow { n, family: "witness".into(), f_id: id, norm_mfw: num, norm_fw: den, ratio, apq })
            })
            .collect::<Result<_>>()?;
        for (id, nw) in ws.iter().enumerate() {
            total += 1;
            if !nw.all_hold() && failures.len() < 8 {
                failures.push(format!("n={n} ball {id}"));
            }
        }
        summaries.push(summarize(n, apq, &r));
        rows.extend(r);
    }
    let assertions = vec![outcome(
        "necessity certificates",
        failures.is_empty(),
        if failures.is_empty() { format!("{total} witnesses") } else { failures.join(", ") },
    )];
    Ok(RatioReport { experiment: ExperimentKind::Necessity.name().into(), rows, summaries, classification: None, assertions })
}

/// Per-resolution A_p(.) constant and sup strong ratio, classified. Rows
/// hold the supremum-attaining function at each resolution.
pub fn blowup_scan(config: &ExperimentConfig) -> Result<RatioReport> {
    config.validate()?;
    if config.refinement.len() < 3 {
        return Err(Error::Config("blow-up scans need at least three resolutions".into()));
    }
    let full = run_ratio_experiment(config, ExperimentKind::StrongType)?;
    let rows = full
        .summaries
        .iter()
        .map(|s| {
            full.rows
                .iter()
                .find(|r| r.n == s.n && r.family == s.sup_family && r.f_id == s.sup_f_id)
                .cloned()
                .expect("summary rows come from the detail rows")
        })
        .collect();
    Ok(RatioReport { experiment: ExperimentKind::Blowup.name().into(), rows, ..full })
}

pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig) -> Result<RatioReport> {
    match kind {
        ExperimentKind::StrongType => strong_type_experiment(config),
        ExperimentKind::WeakType => weak_type_experiment(config),
        ExperimentKind::Necessity => necessity_experiment(config),
        ExperimentKind::Blowup => blowup_scan(config),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 7] = ["n", "family", "f_id", "norm_Mfw", "norm_fw", "ratio", "apq"];

/// Writes the rows as CSV (fixed 12-digit scientific notation) or the whole
/// report as JSON.
pub fn emit_report(report: &RatioReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
            w.write_record(CSV_HEADER).map_err(csv_err)?;
            for r in &report.rows {
                w.write_record([
                    r.n.to_string(),
                    r.family.clone(),
                    r.f_id.to_string(),
                    format!("{:.12e}", r.norm_mfw),
                    format!("{:.12e}", r.norm_fw),
                    format!("{:.12e}", r.ratio),
                    format!("{:.12e}", r.apq),
                ])
                .map_err(csv_err)?;
            }
            w.flush()?;
        }
        ReportFormat::Json => std::fs::write(path, serde_json::to_string_pretty(report)?)?,
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
