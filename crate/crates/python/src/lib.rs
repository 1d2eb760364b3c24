//! Python bindings. Specs are plain dicts with the same keys as the scenario files.

use std::path::Path as FsPath;

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gaugelab::billiards::{generator_loops, trace as trace_ray, TraceOptions};
use gaugelab::cli::{self, CliError, LoadedScenario};
use gaugelab::dtn::{compare_dtn, dtn_matrix, DtnMatrix, DtnOptions};
use gaugelab::fields::{gauge_transform, GaugeElement, GaugeSpec, MatrixPotential, PotentialSpec};
use gaugelab::geometry::{Domain, DomainSpec};
use gaugelab::reconstruct::reconstruct_gauge;
use gaugelab::transport::{holonomy, transport as transport_path, Path, TransportOptions};
use gaugelab::{CMat, Vec2, C64};

create_exception!(pygaugelab, NumericalGuard, PyRuntimeError, "A numerical guard rejected the computation.");

type Matrix = Vec<Vec<C64>>;

fn err(e: impl Into<CliError>) -> PyErr {
    match e.into() {
        CliError::Validation(m) => PyValueError::new_err(m),
        CliError::Numerical(m) => NumericalGuard::new_err(m),
        e @ CliError::Io(_) => PyIOError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn from_dict<T: serde::de::DeserializeOwned>(spec: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = spec.py().import_bound("json")?;
    let text: String = json.call_method1("dumps", (spec,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_rows(a: &CMat) -> Matrix {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect()
}

fn pt(p: (f64, f64)) -> Vec2 {
    Vec2::new(p.0, p.1)
}

#[pyclass(name = "Domain", module = "pygaugelab")]
#[derive(Clone)]
struct PyDomain {
    inner: Domain,
}

#[pymethods]
impl PyDomain {
    /// Builds a domain from a dict with `outer`, `obstacles` and optional `eps_tan`.
    #[new]
    fn new(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: DomainSpec = from_dict(spec)?;
        Ok(PyDomain { inner: Domain::new(spec).map_err(err)? })
    }

    /// Unit disk with circular obstacles given as `(cx, cy, r)`.
    #[staticmethod]
    #[pyo3(signature = (obstacles = Vec::new()))]
    fn unit_disk(obstacles: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let spec = obstacles.into_iter().fold(DomainSpec::unit_disk(), |s, (x, y, r)| s.with_disk_obstacle([x, y], r));
        Ok(PyDomain { inner: Domain::new(spec).map_err(err)? })
    }

    #[getter]
    fn n_obstacles(&self) -> usize {
        self.inner.n_obstacles()
    }

    fn contains(&self, x: (f64, f64)) -> bool {
        self.inner.contains(pt(x))
    }

    fn boundary_point(&self, curve: usize, s: f64) -> PyResult<(f64, f64)> {
        if curve > self.inner.n_obstacles() {
            return Err(PyValueError::new_err(format!("no curve {curve}")));
        }
        let p = self.inner.boundary_point(curve, s).position;
        Ok((p.x, p.y))
    }

    fn interior_distance(&self, x: (f64, f64)) -> PyResult<f64> {
        self.inner.interior_distance(pt(x)).map_err(err)
    }

    /// Returns `(value, (x, y) of the maximiser, spacing)`.
    fn max_interior_distance(&self, spacing: f64) -> (f64, (f64, f64), f64) {
        let m = self.inner.max_interior_distance(spacing);
        (m.value, (m.argmax.x, m.argmax.y), m.spacing)
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }
}

#[pyclass(name = "Potential", module = "pygaugelab")]
#[derive(Clone)]
struct PyPotential {
    inner: MatrixPotential,
}

#[pymethods]
impl PyPotential {
    /// `spec` uses the `[potential]` table keys, e.g. `{"name": "ab_vortex", "alpha": 0.5, "center": [0.3, 0.1]}`.
    #[new]
    fn new(spec: &Bound<'_, PyAny>, domain: &PyDomain) -> PyResult<Self> {
        let spec: PotentialSpec = from_dict(spec)?;
        Ok(PyPotential { inner: spec.build(&domain.inner, FsPath::new(".")).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    /// `(A1, A2, V)` at `x`.
    fn eval(&self, x: (f64, f64)) -> PyResult<(Matrix, Matrix, Matrix)> {
        let p = self.inner.eval(pt(x)).map_err(err)?;
        Ok((to_rows(&p.a[0]), to_rows(&p.a[1]), to_rows(&p.v)))
    }

    fn gauge_transform(&self, g: &PyGauge) -> PyResult<PyPotential> {
        Ok(PyPotential { inner: gauge_transform(&self.inner, &g.inner).map_err(err)? })
    }
}

#[pyclass(name = "Gauge", module = "pygaugelab")]
#[derive(Clone)]
struct PyGauge {
    inner: GaugeElement,
}

#[pymethods]
impl PyGauge {
    #[new]
    fn new(spec: &Bound<'_, PyAny>, domain: &PyDomain) -> PyResult<Self> {
        let spec: GaugeSpec = from_dict(spec)?;
        Ok(PyGauge { inner: spec.build(&domain.inner, FsPath::new(".")).map_err(err)? })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn is_g0(&self) -> bool {
        self.inner.is_g0()
    }

    fn eval(&self, x: (f64, f64)) -> PyResult<Matrix> {
        Ok(to_rows(&self.inner.eval(pt(x)).map_err(err)?))
    }

    fn inverse(&self) -> PyGauge {
        PyGauge { inner: self.inner.inverse() }
    }
}

fn opts(h: f64, richardson: bool) -> TransportOptions {
    if richardson {
        TransportOptions::with_step(h)
    } else {
        TransportOptions::fast(h)
    }
}

/// Transport along a polyline; returns `(c, error_estimate)`.
#[pyfunction]
#[pyo3(signature = (pot, points, h = 1e-3, richardson = true))]
fn transport(pot: &PyPotential, points: Vec<(f64, f64)>, h: f64, richardson: bool) -> PyResult<(Matrix, f64)> {
    let pts: Vec<Vec2> = points.into_iter().map(pt).collect();
    let path = Path::polyline(&pts).map_err(err)?;
    let r = transport_path(&pot.inner, &path, &opts(h, richardson)).map_err(err)?;
    Ok((to_rows(&r.c), r.error_estimate))
}

/// Holonomies of the generator loops based at arclength `base_s` of the outer curve.
#[pyfunction]
#[pyo3(signature = (pot, domain, base_s = 0.0, h = 1e-3))]
fn generator_holonomies(pot: &PyPotential, domain: &PyDomain, base_s: f64, h: f64) -> PyResult<Vec<Matrix>> {
    let base = domain.inner.boundary_point(0, base_s);
    let loops = generator_loops(&domain.inner, &base).map_err(err)?;
    loops.iter().map(|lp| holonomy(&pot.inner, lp, &opts(h, true)).map(|c| to_rows(&c)).map_err(err)).collect()
}

/// Broken ray from arclength `s` on the outer curve, `angle` radians off the inward normal.
/// Returns the vertex list (start, reflections, end).
#[pyfunction]
#[pyo3(signature = (domain, s, angle = 0.0, max_legs = 64))]
fn trace(domain: &PyDomain, s: f64, angle: f64, max_legs: usize) -> PyResult<Vec<(f64, f64)>> {
    let bp = domain.inner.boundary_point(0, s);
    let n = -bp.normal;
    let (sn, cs) = angle.sin_cos();
    let dir = Vec2::new(cs * n.x - sn * n.y, sn * n.x + cs * n.y);
    let ray = trace_ray(&domain.inner, &bp, dir, &TraceOptions { max_legs, ..Default::default() }).map_err(err)?;
    Ok(ray.vertices().into_iter().map(|p| (p.x, p.y)).collect())
}

#[pyclass(name = "DtnMatrix", module = "pygaugelab")]
struct PyDtn {
    inner: DtnMatrix,
}

#[pymethods]
impl PyDtn {
    #[getter]
    fn modes(&self) -> Vec<i64> {
        self.inner.modes()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    /// Dense matrix in the basis `mode * m + channel`.
    fn entries(&self) -> Matrix {
        to_rows(&self.inner.entries)
    }

    /// Restriction to modes `|n| <= max_mode`.
    fn central(&self, max_mode: i64) -> PyDtn {
        PyDtn { inner: self.inner.central(max_mode) }
    }

    /// Relative Frobenius and operator-norm differences to `other`.
    fn compare(&self, other: &PyDtn, py: Python<'_>) -> PyResult<Py<PyDict>> {
        let c = compare_dtn(&self.inner, &other.inner).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("fro_rel", c.fro_rel)?;
        d.set_item("op_rel", c.op_rel)?;
        d.set_item("fro_abs", c.fro_abs)?;
        d.set_item("op_abs", c.op_abs)?;
        Ok(d.unbind())
    }
}

#[pyfunction]
#[pyo3(signature = (domain, pot, k = 2.0, n_b = 17, h_grid = 1.0 / 128.0))]
fn dtn(py: Python<'_>, domain: &PyDomain, pot: &PyPotential, k: f64, n_b: usize, h_grid: f64) -> PyResult<PyDtn> {
    let (d, p) = (domain.inner.clone(), pot.inner.clone());
    let l = py.allow_threads(move || dtn_matrix(&d, &p, C64::new(k, 0.0), n_b, &DtnOptions::new(h_grid)));
    Ok(PyDtn { inner: l.map_err(err)? })
}

/// Gauge field relating `pot_a` to `pot_b`, one matrix per sample point.
#[pyfunction]
#[pyo3(signature = (pot_a, pot_b, domain, points, base_s = 0.0, h = 1e-3))]
fn reconstruct(pot_a: &PyPotential, pot_b: &PyPotential, domain: &PyDomain, points: Vec<(f64, f64)>, base_s: f64, h: f64) -> PyResult<Vec<Matrix>> {
    let base = domain.inner.boundary_point(0, base_s);
    let pts: Vec<Vec2> = points.into_iter().map(pt).collect();
    let gf = reconstruct_gauge(&pot_a.inner, &pot_b.inner, &domain.inner, &base, &pts, h).map_err(err)?;
    Ok(gf.matrices.iter().map(to_rows).collect())
}

/// Runs a scenario file, writing its outputs, and returns the printed summary.
#[pyfunction]
#[pyo3(signature = (path, out = None))]
fn run_config(py: Python<'_>, path: &str, out: Option<String>) -> PyResult<String> {
    let mut ls = LoadedScenario::load(FsPath::new(path)).map_err(err)?;
    if let Some(o) = out {
        ls.scenario.output.dir = o;
    }
    let r = py.allow_threads(|| cli::run(&ls)).map_err(err)?;
    Ok(r.summary)
}

#[pymodule]
fn pygaugelab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyGauge>()?;
    m.add_class::<PyDtn>()?;
    m.add_function(wrap_pyfunction!(transport, m)?)?;
    m.add_function(wrap_pyfunction!(generator_holonomies, m)?)?;
    m.add_function(wrap_pyfunction!(trace, m)?)?;
    m.add_function(wrap_pyfunction!(dtn, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("NumericalGuard", m.py().get_type_bound::<NumericalGuard>())?;
    Ok(())
}
