//! Python bindings for the Biot solver: meshes, coefficients, the benchmark
//! solution, quadrature rules, single time steps with indicators, and the
//! convergence studies.

use biot_apost::assembly::{Coefficients as CoreCoefficients, Discretization, Permeability};
use biot_apost::estimators::{CoupledEstimator, EstimatorOptions, EstimatorReport};
use biot_apost::harness::{self, StudyConfig, StudyKind, TauRule};
use biot_apost::manufactured::{BenchmarkSolution, ExactSolution};
use biot_apost::mesh::{structured_unit_square, BoundaryTag, Diagonal, TriMesh};
use biot_apost::quadrature;
use biot_apost::stepper::{BiotStepper, DiscreteState};
use biot_apost::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidLevel(_)
        | Error::InvalidCoefficients(_)
        | Error::InvalidTimeStep(_)
        | Error::DimensionMismatch { .. }
        | Error::IndexOutOfRange { .. }
        | Error::StepIndex { .. }
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Coefficients", from_py_object)]
#[derive(Clone)]
struct PyCoefficients {
    inner: CoreCoefficients,
}

#[pymethods]
impl PyCoefficients {
    #[new]
    #[pyo3(signature = (mu = 0.4, lam = 0.4, alpha = 1.0, beta = 1.0, permeability = [[1.0, 0.0], [0.0, 1.0]]))]
    fn new(mu: f64, lam: f64, alpha: f64, beta: f64, permeability: [[f64; 2]; 2]) -> PyResult<Self> {
        let inner = CoreCoefficients {
            mu,
            lambda: lam,
            alpha,
            beta,
            permeability: Permeability::Constant(permeability),
        };
        inner.validate(0).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.inner.mu
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn permeability(&self) -> [[f64; 2]; 2] {
        self.inner.k(0)
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("Coefficients(mu={}, lam={}, alpha={}, beta={}, permeability={:?})", c.mu, c.lambda, c.alpha, c.beta, c.k(0))
    }
}

fn coeffs_or_default(c: Option<PyCoefficients>) -> CoreCoefficients {
    c.map_or_else(CoreCoefficients::benchmark, |c| c.inner)
}

fn unit_square(k: i64, diagonal: &str) -> PyResult<TriMesh> {
    let d = Diagonal::parse(diagonal).map_err(py_err)?;
    structured_unit_square(k, d, |_, _| BoundaryTag::Gamma1).map_err(py_err)
}

/// Uniform triangulation of the unit square with `2^k x 2^k` cells; each
/// cell is split along the `"falling"` or `"rising"` diagonal.
#[pyclass(name = "Mesh")]
struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (k, diagonal = "falling"))]
    fn new(k: i64, diagonal: &str) -> PyResult<Self> {
        Ok(Self {
            inner: unit_square(k, diagonal)?,
        })
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.n_triangles()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    fn vertices(&self) -> Vec<[f64; 2]> {
        self.inner.vertices().to_vec()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().to_vec()
    }

    fn edges(&self) -> Vec<[usize; 2]> {
        self.inner.edges().to_vec()
    }

    fn boundary_tags(&self) -> Vec<&'static str> {
        self.inner.boundary_tags().iter().map(|t| t.as_str()).collect()
    }

    fn total_area(&self) -> f64 {
        self.inner.total_area()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// The manufactured benchmark `u = cos t (sin pi x sin pi y)(1, 1)`,
/// `p = sin t cos pi x cos pi y`, `w = -K grad p`.
#[pyclass(name = "BenchmarkSolution")]
struct PyBenchmark {
    inner: BenchmarkSolution,
}

#[pymethods]
impl PyBenchmark {
    #[new]
    #[pyo3(signature = (coefficients = None))]
    fn new(coefficients: Option<PyCoefficients>) -> Self {
        Self {
            inner: BenchmarkSolution::new(coeffs_or_default(coefficients)),
        }
    }

    fn u(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        self.inner.u(t, [x, y])
    }

    fn p(&self, t: f64, x: f64, y: f64) -> f64 {
        self.inner.p(t, [x, y])
    }

    fn w(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        self.inner.w(t, [x, y])
    }

    fn f(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        self.inner.f(t, [x, y])
    }

    fn g(&self, t: f64, x: f64, y: f64) -> f64 {
        self.inner.g(t, [x, y])
    }
}

/// Gauss-Legendre rule on `[0, 1]` as `(points, weights)`.
#[pyfunction]
fn gauss_legendre(n: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(PyValueError::new_err("rule needs at least one point"));
    }
    let r = quadrature::gauss_legendre(n);
    Ok((r.points, r.weights))
}

/// Collapsed `n x n` rule on the reference triangle as `(points, weights)`
/// with points in barycentric coordinates.
#[pyfunction]
fn triangle_rule(n: usize) -> PyResult<(Vec<[f64; 3]>, Vec<f64>)> {
    if n == 0 {
        return Err(PyValueError::new_err("rule needs at least one point"));
    }
    let r = quadrature::collapsed_triangle(n);
    Ok((r.points, r.weights))
}

#[pyclass(name = "State", skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    inner: DiscreteState,
}

#[pymethods]
impl PyState {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.inner.u.clone()
    }

    #[getter]
    fn p(&self) -> Vec<f64> {
        self.inner.p.clone()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w.clone()
    }
}

fn report_dict<'py>(py: Python<'py>, r: &EstimatorReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n", r.n)?;
    d.set_item("t", r.t)?;
    d.set_item("E1", r.e1_total())?;
    d.set_item("E1t", r.e1t_total())?;
    d.set_item("E2", r.e2_total())?;
    d.set_item("E3", r.e3_total())?;
    d.set_item("E3t", r.e3t_total())?;
    d.set_item("E_space", r.e_space())?;
    d.set_item("E_time", r.e_time)?;
    d.set_item("E_tilde_time", r.e_tilde_time)?;
    d.set_item("E_data", r.e_data)?;
    d.set_item("E_tilde_data", r.e_tilde_data)?;
    d.set_item("eps", r.eps())?;
    d.set_item("element_space", r.element_space())?;
    Ok(d)
}

/// The coupled benchmark on one mesh level. Each call builds its own
/// factorization, so long runs should use `run_study`.
#[pyclass(name = "Simulation")]
struct PySimulation {
    disc: Discretization,
    coeffs: CoreCoefficients,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (k, coefficients = None, diagonal = "falling"))]
    fn new(k: i64, coefficients: Option<PyCoefficients>, diagonal: &str) -> PyResult<Self> {
        let disc = Discretization::new(unit_square(k, diagonal)?);
        let coeffs = coeffs_or_default(coefficients);
        coeffs.validate(disc.n_triangles()).map_err(py_err)?;
        Ok(Self { disc, coeffs })
    }

    /// Dof counts `(V, Q, W)`.
    fn n_dofs(&self) -> (usize, usize, usize) {
        let s = &self.disc.spaces;
        (s.v.n_dofs, s.q.n_dofs, s.w.n_dofs)
    }

    /// Initial state for the benchmark: `p = w = 0`, `u` in equilibrium with `f(0)`.
    fn initial_state(&self) -> PyResult<PyState> {
        let exact = BenchmarkSolution::new(self.coeffs.clone());
        let stepper = BiotStepper::new(&self.disc, self.coeffs.clone()).map_err(py_err)?;
        let inner = stepper.initial_state(|x| exact.f(0.0, x)).map_err(py_err)?;
        Ok(PyState { inner })
    }

    /// Advances `state` from `t - tau` to `t` with the benchmark sources and
    /// returns the new state together with its indicator report.
    fn step<'py>(&self, py: Python<'py>, state: &PyState, tau: f64, t: f64) -> PyResult<(PyState, Bound<'py, PyDict>)> {
        let exact = BenchmarkSolution::new(self.coeffs.clone());
        let mut stepper = BiotStepper::new(&self.disc, self.coeffs.clone()).map_err(py_err)?;
        let prev = &state.inner;
        let cur = stepper
            .step(prev, prev.n + 1, tau, |x| exact.f(t, x), |x| exact.g(t, x))
            .map_err(py_err)?;
        let mut est = CoupledEstimator::new(&self.disc, self.coeffs.clone(), EstimatorOptions::default()).map_err(py_err)?;
        let report = est.report(stepper.forms(), &exact, prev, &cur, t - tau, t).map_err(py_err)?;
        Ok((PyState { inner: cur }, report_dict(py, &report)?))
    }

    /// `||u||_a^2 + ||p||_c^2`
    fn energy(&self, state: &PyState) -> PyResult<f64> {
        let stepper = BiotStepper::new(&self.disc, self.coeffs.clone()).map_err(py_err)?;
        Ok(stepper.energy(&state.inner))
    }
}

fn study_config(
    study: &str,
    kmin: Option<u32>,
    kmax: Option<u32>,
    tau: Option<f64>,
    tau_ratio: Option<f64>,
    final_time: Option<f64>,
    diagonal: Option<&str>,
) -> PyResult<StudyConfig> {
    let mut cfg = StudyConfig::for_study(StudyKind::parse(study).map_err(py_err)?);
    if let Some(k) = kmin {
        cfg.k_min = k;
    }
    if let Some(k) = kmax {
        cfg.k_max = k;
    }
    match (tau, tau_ratio) {
        (Some(_), Some(_)) => return Err(PyValueError::new_err("give tau or tau_ratio, not both")),
        (Some(t), None) => cfg.tau = TauRule::Fixed(t),
        (None, Some(c)) => cfg.tau = TauRule::Ratio(c),
        (None, None) => {}
    }
    if let Some(t) = final_time {
        cfg.final_time = t;
    }
    if let Some(d) = diagonal {
        cfg.diagonal = Diagonal::parse(d).map_err(py_err)?;
    }
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Runs a convergence study and returns one dict per level with the
/// summary columns and the `(n, t_n, e_n, eps_n)` series.
#[pyfunction]
#[pyo3(signature = (study = "coupled-sim", kmin = None, kmax = None, tau = None, tau_ratio = None, final_time = None, diagonal = None))]
#[allow(clippy::too_many_arguments)]
fn run_study<'py>(
    py: Python<'py>,
    study: &str,
    kmin: Option<u32>,
    kmax: Option<u32>,
    tau: Option<f64>,
    tau_ratio: Option<f64>,
    final_time: Option<f64>,
    diagonal: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = study_config(study, kmin, kmax, tau, tau_ratio, final_time, diagonal)?;
    let result = py.detach(|| harness::run_study(&cfg)).map_err(|f| py_err(f.error))?;
    result
        .summary()
        .iter()
        .zip(&result.levels)
        .map(|(row, level)| {
            let d = PyDict::new(py);
            d.set_item("k", row.k)?;
            d.set_item("h", row.h)?;
            d.set_item("tau", row.tau)?;
            d.set_item("steps", level.steps)?;
            d.set_item("E", row.error)?;
            d.set_item("Est", row.estimator)?;
            d.set_item("Est_over_E", row.efficiency)?;
            d.set_item("E_ratio", row.error_ratio)?;
            d.set_item("Est_ratio", row.estimator_ratio)?;
            let series: Vec<(usize, f64, f64, f64)> = level.series.iter().map(|s| (s.n, s.t, s.e, s.eps)).collect();
            d.set_item("series", series)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
pub fn biot_apost_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficients>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyBenchmark>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(gauss_legendre, m)?)?;
    m.add_function(wrap_pyfunction!(triangle_rule, m)?)?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    Ok(())
}
