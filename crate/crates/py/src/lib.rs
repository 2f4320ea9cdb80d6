//! Python bindings: meshes, problems, energies, norms, the two-branch solver,
//! the oracle, and the command-line entry point.

use std::sync::Arc;

use nehari_core::config::LambdaChoice;
use nehari_core::energy::fiber_profile;
use nehari_core::nehari::ScanSettings;
use nehari_core::solver::iterate_floor;
use nehari_core::vexp::{luxemburg_norm, sobolev_norm};
use nehari_core::{Error, FieldSpec, GridFunction, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {}", e.kind(), e);
    match e {
        Error::Config { .. }
        | Error::HypothesisViolation { .. }
        | Error::InvalidProblem(_)
        | Error::InvalidMesh(_)
        | Error::InvalidField(_) => PyValueError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

fn json_obj<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn field(dimension: usize, spec: (String, Vec<f64>)) -> PyResult<FieldSpec> {
    FieldSpec::from_params(&spec.0, &spec.1, dimension).map_err(to_py)
}

#[pyclass(name = "Mesh", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: Arc<nehari_core::Mesh>,
}

#[pymethods]
impl PyMesh {
    /// Uniform mesh of a box; `extent` holds one `(lo, hi)` pair per axis.
    #[new]
    fn new(dimension: usize, extent: Vec<(f64, f64)>, resolution: usize) -> PyResult<Self> {
        let mesh = nehari_core::Mesh::build(dimension, &extent, resolution).map_err(to_py)?;
        Ok(PyMesh { inner: Arc::new(mesh) })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_elements(&self) -> usize {
        self.inner.num_elements()
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        (0..self.inner.num_vertices()).map(|i| self.inner.vertex(i).to_vec()).collect()
    }

    fn interior_vertices(&self) -> Vec<usize> {
        self.inner.interior_vertices()
    }

    /// Luxemburg norm of the nodal function (or of its gradient).
    #[pyo3(signature = (values, exponent, gradient = false))]
    fn luxemburg_norm(&self, values: Vec<f64>, exponent: (String, Vec<f64>), gradient: bool) -> PyResult<f64> {
        let p = field(self.inner.dimension(), exponent)?;
        let u = GridFunction::lebesgue(self.inner.clone(), values).map_err(to_py)?;
        luxemburg_norm(&u, &p, gradient).map_err(to_py)
    }

    /// `‖u‖ + ‖∇u‖` for a function with zero trace.
    fn sobolev_norm(&self, values: Vec<f64>, exponent: (String, Vec<f64>)) -> PyResult<f64> {
        let p = field(self.inner.dimension(), exponent)?;
        let u = GridFunction::new(self.inner.clone(), values).map_err(to_py)?;
        sobolev_norm(&u, &p).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(dimension={}, resolution={}, vertices={})",
            self.inner.dimension(),
            self.inner.resolution(),
            self.inner.num_vertices()
        )
    }
}

#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    data: nehari_core::ProblemData,
    solve: nehari_core::SolveConfig,
    scan: ScanSettings,
    oracle: nehari_core::oracle::OracleSettings,
    vertex_cap: usize,
}

impl PyProblem {
    fn grid(&self, values: Vec<f64>) -> PyResult<GridFunction> {
        GridFunction::new(self.data.mesh().clone(), values).map_err(to_py)
    }

    fn with_data(&self, data: nehari_core::ProblemData) -> PyProblem {
        PyProblem {
            data,
            solve: self.solve.clone(),
            scan: self.scan.clone(),
            oracle: self.oracle.clone(),
            vertex_cap: self.vertex_cap,
        }
    }
}

#[pymethods]
impl PyProblem {
    /// Fields are `(kind, params)` pairs, e.g. `("constant", [2.0])`.
    #[new]
    #[pyo3(signature = (mesh, p, q, delta, a, b, lam = 0.0))]
    fn new(
        mesh: &PyMesh,
        p: (String, Vec<f64>),
        q: (String, Vec<f64>),
        delta: (String, Vec<f64>),
        a: (String, Vec<f64>),
        b: (String, Vec<f64>),
        lam: f64,
    ) -> PyResult<Self> {
        let d = mesh.inner.dimension();
        let data = nehari_core::ProblemData::new(
            mesh.inner.clone(),
            field(d, p)?,
            field(d, q)?,
            field(d, delta)?,
            field(d, a)?,
            field(d, b)?,
            lam,
        )
        .map_err(to_py)?;
        Ok(PyProblem {
            data,
            solve: nehari_core::SolveConfig::default(),
            scan: ScanSettings::default(),
            oracle: Default::default(),
            vertex_cap: 17,
        })
    }

    /// Builds a problem from `key = value` configuration text, resolving an
    /// automatic λ from the threshold scan.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        let config = RunConfig::parse(text).map_err(to_py)?;
        let scan = config.scan.settings();
        let data = match config.problem.lambda {
            LambdaChoice::Value(v) => config.problem_data(v).map_err(to_py)?,
            LambdaChoice::Auto { fraction } => {
                let base = config.problem_data(0.0).map_err(to_py)?;
                let report = nehari_core::lambda_report(&base, &scan).map_err(to_py)?;
                base.with_lambda(fraction * report.lambda_zero).map_err(to_py)?
            }
        };
        Ok(PyProblem {
            data,
            solve: config.solve_config(),
            scan,
            oracle: config.oracle.settings(),
            vertex_cap: config.oracle.vertex_cap,
        })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.data.lambda()
    }

    #[getter]
    fn mesh(&self) -> PyMesh {
        PyMesh { inner: self.data.mesh().clone() }
    }

    fn with_lambda(&self, lam: f64) -> PyResult<PyProblem> {
        Ok(self.with_data(self.data.with_lambda(lam).map_err(to_py)?))
    }

    fn hypotheses<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_obj(py, &nehari_core::validate_hypotheses(&self.data))
    }

    /// Energy and its three parts.
    fn energy<'py>(&self, py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        json_obj(py, &nehari_core::energy(&self.grid(values)?, &self.data))
    }

    /// Weak gradient covector at interior vertices (zero on the boundary).
    #[pyo3(signature = (values, floor = None))]
    fn weak_gradient(&self, values: Vec<f64>, floor: Option<f64>) -> PyResult<Vec<f64>> {
        let u = self.grid(values)?;
        let floor = floor.unwrap_or_else(|| iterate_floor(&u, self.solve.grad_floor));
        Ok(nehari_core::weak_gradient(&u, &self.data, floor).map_err(to_py)?.covector())
    }

    /// Critical points of `t ↦ E(t u)` on a log grid.
    #[pyo3(signature = (values, t_min = 1e-3, t_max = 1e3, samples = 512))]
    fn fiber<'py>(
        &self,
        py: Python<'py>,
        values: Vec<f64>,
        t_min: f64,
        t_max: f64,
        samples: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let profile = fiber_profile(&self.grid(values)?, &self.data, t_min, t_max, samples).map_err(to_py)?;
        json_obj(py, &profile.critical_points)
    }

    fn classify<'py>(&self, py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        json_obj(py, &nehari_core::classify(&self.grid(values)?, &self.data).map_err(to_py)?)
    }

    fn lambda_report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_obj(py, &nehari_core::lambda_report(&self.data, &self.scan).map_err(to_py)?)
    }

    /// Both branches; the report dict gains `u_plus` and `u_minus` nodal values.
    #[pyo3(signature = (seed = None))]
    fn solve<'py>(&self, py: Python<'py>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let mut config = self.solve.clone();
        if let Some(s) = seed {
            config.seed = s;
        }
        config.scan = self.scan.clone();
        let report = nehari_core::solve_both(&self.data, &config).map_err(to_py)?;
        let obj = json_obj(py, &report)?;
        let dict = obj.cast::<PyDict>()?;
        dict.set_item("u_plus", report.u_plus().map(|u| u.values().to_vec()))?;
        dict.set_item("u_minus", report.u_minus().map(|u| u.values().to_vec()))?;
        Ok(obj)
    }

    #[pyo3(signature = (values, floor = None, residual_tol = None))]
    fn verify<'py>(
        &self,
        py: Python<'py>,
        values: Vec<f64>,
        floor: Option<f64>,
        residual_tol: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let u = self.grid(values)?;
        let floor = floor.unwrap_or_else(|| iterate_floor(&u, self.solve.grad_floor));
        let v = nehari_core::verify_solution(&u, &self.data, floor, residual_tol.unwrap_or(self.solve.residual_tol));
        json_obj(py, &v)
    }

    /// Multi-start global scan on small meshes.
    #[pyo3(signature = (vertex_cap = None, starts = None))]
    fn oracle<'py>(&self, py: Python<'py>, vertex_cap: Option<usize>, starts: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let mut settings = self.oracle.clone();
        if let Some(s) = starts {
            settings.starts = s;
        }
        let cap = vertex_cap.unwrap_or(self.vertex_cap);
        let report = py
            .detach(|| nehari_core::oracle::oracle_global_scan_with(&self.data, cap, &settings))
            .map_err(to_py)?;
        json_obj(py, &report)
    }
}

/// Runs the command-line interface with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    nehari_core::cli::run(std::iter::once("nehari".to_string()).chain(args))
}

#[pymodule]
fn nehari(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("SCHEMA_VERSION", nehari_core::solver::SCHEMA_VERSION)?;
    Ok(())
}
