use std::path::PathBuf;

use homtype_core::czdecomp;
use homtype_core::dyadic::{self, DyadicGrid};
use homtype_core::error::Error;
use homtype_core::experiments::{self, ExperimentConfig, ExperimentKind};
use homtype_core::exponents::{generate_exponent, ExponentFunction, ExponentSpec};
use homtype_core::lpvar::{self, PointFunction, DEFAULT_TOL};
use homtype_core::operators;
use homtype_core::space::{generate_space, FiniteSpace, SpaceSpec};
use homtype_core::weights::{self, generate_weight, Weight, WeightSpec};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for homtype_core::error::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(err)
    }
}

/// Serializable values cross into Python as plain dicts and lists.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn func(values: Vec<f64>) -> PointFunction {
    PointFunction::new(values)
}

/// Finite quasi-metric measure space.
#[pyclass(name = "Space", module = "homtype", frozen)]
struct PySpace(FiniteSpace);

#[pymethods]
impl PySpace {
    /// Builds a space from a full `n x n` distance matrix and point masses.
    #[new]
    fn new(dist: Vec<Vec<f64>>, mass: Vec<f64>) -> PyResult<Self> {
        Ok(PySpace(FiniteSpace::new(dist.into_iter().flatten().collect(), mass).py()?))
    }

    /// Euclidean space on the given points.
    #[staticmethod]
    fn from_points(points: Vec<Vec<f64>>, mass: Vec<f64>) -> PyResult<Self> {
        Ok(PySpace(FiniteSpace::from_points(&points, mass).py()?))
    }

    /// Generated space, e.g. `grid:dim=1,side=16,spacing=1,mass=uniform`.
    #[staticmethod]
    fn generate(spec: &str) -> PyResult<Self> {
        Ok(PySpace(generate_space(&parse::<SpaceSpec>(spec)?).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySpace(FiniteSpace::load(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().py()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn mass(&self) -> Vec<f64> {
        self.0.masses().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.n()
    }

    fn d(&self, x: usize, y: usize) -> PyResult<f64> {
        self.0.check_point(x).py()?;
        self.0.check_point(y).py()?;
        Ok(self.0.d(x, y))
    }

    /// Points of the strict ball B(center, r).
    fn ball(&self, center: usize, r: f64) -> PyResult<Vec<usize>> {
        self.0.check_point(center).py()?;
        Ok(self.0.ball(center, r))
    }

    fn measure(&self, points: Vec<usize>) -> PyResult<f64> {
        for &x in &points {
            self.0.check_point(x).py()?;
        }
        Ok(self.0.measure(&points))
    }

    fn quasimetric_constant(&self) -> f64 {
        self.0.quasimetric_constant()
    }

    fn doubling_constant(&self) -> f64 {
        self.0.doubling_constant(None)
    }

    /// Dict with `constant`, `exponent` and `witness`.
    fn lower_mass_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.lower_mass_check())
    }

    fn __repr__(&self) -> String {
        format!("Space(n={})", self.0.n())
    }
}

/// Variable exponent p(.) on the points of a space.
#[pyclass(name = "Exponent", module = "homtype", frozen)]
struct PyExponent(ExponentFunction);

#[pymethods]
impl PyExponent {
    #[new]
    #[pyo3(signature = (values, p_inf, base_point = 0))]
    fn new(values: Vec<f64>, p_inf: f64, base_point: usize) -> PyResult<Self> {
        Ok(PyExponent(ExponentFunction::new(values, p_inf, base_point).py()?))
    }

    #[staticmethod]
    fn constant(n: usize, p: f64) -> PyResult<Self> {
        Ok(PyExponent(ExponentFunction::constant(n, p).py()?))
    }

    /// Generated exponent, e.g. `ramp:p_inf=2,c=0.5`.
    #[staticmethod]
    #[pyo3(signature = (space, spec, base_point = 0))]
    fn generate(space: &PySpace, spec: &str, base_point: usize) -> PyResult<Self> {
        Ok(PyExponent(generate_exponent(&space.0, &parse::<ExponentSpec>(spec)?, base_point).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyExponent(ExponentFunction::load(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn p_inf(&self) -> f64 {
        self.0.p_inf()
    }

    #[getter]
    fn p_minus(&self) -> f64 {
        self.0.p_minus()
    }

    #[getter]
    fn p_plus(&self) -> f64 {
        self.0.p_plus()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn conjugate(&self) -> Self {
        PyExponent(self.0.conjugate())
    }

    fn lh0_constant(&self, space: &PySpace) -> PyResult<f64> {
        self.0.lh0_constant(&space.0).py()
    }

    fn lhinf_constant(&self, space: &PySpace) -> PyResult<f64> {
        self.0.lhinf_constant(&space.0).py()
    }

    fn __repr__(&self) -> String {
        format!("Exponent(n={}, p_minus={}, p_plus={})", self.0.len(), self.0.p_minus(), self.0.p_plus())
    }
}

/// Positive weight on the points of a space.
#[pyclass(name = "Weight", module = "homtype", frozen)]
struct PyWeight(Weight);

#[pymethods]
impl PyWeight {
    #[new]
    fn new(values: Vec<f64>) -> PyResult<Self> {
        Ok(PyWeight(Weight::new(values).py()?))
    }

    #[staticmethod]
    fn unit(n: usize) -> Self {
        PyWeight(Weight::unit(n))
    }

    /// Generated weight, e.g. `power:a=0.25`.
    #[staticmethod]
    #[pyo3(signature = (space, spec, base_point = 0))]
    fn generate(space: &PySpace, spec: &str, base_point: usize) -> PyResult<Self> {
        Ok(PyWeight(generate_weight(&space.0, &parse::<WeightSpec>(spec)?, base_point).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyWeight(Weight::load(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("Weight(n={})", self.0.len())
    }
}

/// Dyadic grid of nested cubes.
#[pyclass(name = "Grid", module = "homtype", frozen)]
struct PyGrid(DyadicGrid);

#[pymethods]
impl PyGrid {
    #[staticmethod]
    #[pyo3(signature = (space, d0 = None, seed = 0))]
    fn build(space: &PySpace, d0: Option<f64>, seed: u64) -> PyResult<Self> {
        Ok(PyGrid(dyadic::build_grid(&space.0, d0, seed).py()?))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyGrid(DyadicGrid::load(&path).py()?))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).py()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn d0(&self) -> f64 {
        self.0.d0()
    }

    #[getter]
    fn top(&self) -> i32 {
        self.0.top()
    }

    #[getter]
    fn bottom(&self) -> i32 {
        self.0.bottom()
    }

    #[getter]
    fn num_levels(&self) -> usize {
        self.0.num_levels()
    }

    #[getter]
    fn achieved_cd(&self) -> f64 {
        self.0.achieved_cd()
    }

    #[getter]
    fn achieved_eps(&self) -> f64 {
        self.0.achieved_eps()
    }

    /// All cubes as dicts with `id`, `generation`, `center`, `members`, `parent`, `children`.
    fn cubes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.cubes())
    }

    /// Cube ids of generation k.
    fn level(&self, k: i32) -> PyResult<Vec<usize>> {
        Ok(self.0.level(k).py()?.to_vec())
    }

    /// Dict with the five property checks and the achieved constants.
    fn verify<'py>(&self, py: Python<'py>, space: &PySpace) -> PyResult<Bound<'py, PyAny>> {
        check_n(space, self.0.n())?;
        to_py(py, &dyadic::verify_grid(&space.0, &self.0))
    }

    fn __repr__(&self) -> String {
        format!("Grid(n={}, levels={}, d0={})", self.0.n(), self.0.num_levels(), self.0.d0())
    }
}

fn check_n(space: &PySpace, len: usize) -> PyResult<()> {
    if len != space.0.n() {
        return Err(err(Error::LengthMismatch { expected: space.0.n(), actual: len }));
    }
    Ok(())
}

#[pyfunction]
#[pyo3(signature = (space, p, f, tol = DEFAULT_TOL))]
fn luxemburg_norm(space: &PySpace, p: &PyExponent, f: Vec<f64>, tol: f64) -> PyResult<f64> {
    lpvar::luxemburg_norm(&space.0, &p.0, &func(f), tol).py()
}

#[pyfunction]
fn modular(space: &PySpace, p: &PyExponent, f: Vec<f64>) -> PyResult<f64> {
    check_n(space, f.len())?;
    check_n(space, p.0.len())?;
    Ok(lpvar::modular(&space.0, &p.0, &func(f)))
}

#[pyfunction]
fn hl_maximal(space: &PySpace, f: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(operators::hl_maximal(&space.0, &func(f)).py()?.values)
}

#[pyfunction]
#[pyo3(signature = (space, grid, f, sigma = None))]
fn dyadic_maximal(space: &PySpace, grid: &PyGrid, f: Vec<f64>, sigma: Option<&PyWeight>) -> PyResult<Vec<f64>> {
    Ok(operators::dyadic_maximal(&space.0, &grid.0, &func(f), sigma.map(|s| &s.0)).py()?.values)
}

/// Dict with `worst_ratio`, `worst_lambda`, `lambdas_tested`.
#[pyfunction]
#[pyo3(signature = (space, grid, f, sigma = None))]
fn weak11_check<'py>(
    py: Python<'py>,
    space: &PySpace,
    grid: &PyGrid,
    f: Vec<f64>,
    sigma: Option<&PyWeight>,
) -> PyResult<Bound<'py, PyAny>> {
    let r = operators::weak11_check(&space.0, &grid.0, &func(f), sigma.map(|s| &s.0), None).py()?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (space, grid, f, p, sigma = None))]
fn strongpp_check(space: &PySpace, grid: &PyGrid, f: Vec<f64>, p: f64, sigma: Option<&PyWeight>) -> PyResult<f64> {
    operators::strongpp_check(&space.0, &grid.0, &func(f), sigma.map(|s| &s.0), p).py()
}

#[pyfunction]
fn strongpp_bound(p: f64) -> f64 {
    operators::strongpp_bound(p)
}

/// Adjacent family of `count` grids and the domination ratio of f: (ratio, witness point).
#[pyfunction]
#[pyo3(signature = (space, f, count = 3, d0 = None))]
fn domination_check(space: &PySpace, f: Vec<f64>, count: usize, d0: Option<f64>) -> PyResult<(f64, usize)> {
    let seeds: Vec<u64> = (0..count as u64).collect();
    let fam = dyadic::adjacent_family(&space.0, d0, &seeds).py()?;
    operators::domination_check(&space.0, &fam.grids, &func(f)).py()
}

/// (constant, witness ball dict).
#[pyfunction]
fn apq_constant<'py>(
    py: Python<'py>,
    space: &PySpace,
    p: &PyExponent,
    w: &PyWeight,
) -> PyResult<(f64, Bound<'py, PyAny>)> {
    let (c, ball) = weights::apq_constant(&space.0, &p.0, &w.0, None).py()?;
    Ok((c, to_py(py, &ball)?))
}

/// (constant, witness cube id).
#[pyfunction]
fn apq_constant_dyadic(space: &PySpace, grid: &PyGrid, p: &PyExponent, w: &PyWeight) -> PyResult<(f64, usize)> {
    weights::apq_constant_dyadic(&space.0, &grid.0, &p.0, &w.0).py()
}

#[pyfunction]
#[pyo3(signature = (space, grid, f, lam, sigma = None))]
fn cz_at_height<'py>(
    py: Python<'py>,
    space: &PySpace,
    grid: &PyGrid,
    f: Vec<f64>,
    lam: f64,
    sigma: Option<&PyWeight>,
) -> PyResult<Bound<'py, PyAny>> {
    let d = czdecomp::cz_at_height(&space.0, &grid.0, &func(f), sigma.map(|s| &s.0), lam).py()?;
    to_py(py, &d)
}

#[pyfunction]
#[pyo3(signature = (space, grid, f, a, sigma = None))]
fn sparse_family<'py>(
    py: Python<'py>,
    space: &PySpace,
    grid: &PyGrid,
    f: Vec<f64>,
    a: f64,
    sigma: Option<&PyWeight>,
) -> PyResult<Bound<'py, PyAny>> {
    let fam = czdecomp::sparse_family(&space.0, &grid.0, &func(f), sigma.map(|s| &s.0), a).py()?;
    to_py(py, &fam)
}

/// Runs an experiment from TOML config text; returns the report as a dict.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, kind: &str, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let kind: ExperimentKind = parse(kind)?;
    let config = ExperimentConfig::from_toml(config).py()?;
    let report = py.detach(|| experiments::run_experiment(kind, &config)).py()?;
    to_py(py, &report)
}

#[pymodule]
#[pyo3(name = "homtype")]
pub fn homtype_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyExponent>()?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(luxemburg_norm, m)?)?;
    m.add_function(wrap_pyfunction!(modular, m)?)?;
    m.add_function(wrap_pyfunction!(hl_maximal, m)?)?;
    m.add_function(wrap_pyfunction!(dyadic_maximal, m)?)?;
    m.add_function(wrap_pyfunction!(weak11_check, m)?)?;
    m.add_function(wrap_pyfunction!(strongpp_check, m)?)?;
    m.add_function(wrap_pyfunction!(strongpp_bound, m)?)?;
    m.add_function(wrap_pyfunction!(domination_check, m)?)?;
    m.add_function(wrap_pyfunction!(apq_constant, m)?)?;
    m.add_function(wrap_pyfunction!(apq_constant_dyadic, m)?)?;
    m.add_function(wrap_pyfunction!(cz_at_height, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_family, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("DEFAULT_TOL", DEFAULT_TOL)?;
    Ok(())
}
