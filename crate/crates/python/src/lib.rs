use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use translab::carleman::{fit_constants, log_grid, regression_family, FitConfig};
use translab::cli::{self, ExperimentConfig, Kind};
use translab::fields::{self, ScalarField, VectorField};
use translab::grid::Grid;
use translab::inverse::{self, compatible_inflow, MeasurementSet, Profile};
use translab::transport::{self, Inflow, SpaceTimeField};
use translab::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Configuration(_) | Error::Parameter(_) | Error::Arity { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serde value to Python through the json module.
fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(name = "Grid", module = "translab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(Arc<Grid>);

#[pymethods]
impl PyGrid {
    /// Uniform box lattice with `cells` intervals per axis.
    #[staticmethod]
    #[pyo3(name = "box")]
    fn boxed(lo: Vec<f64>, hi: Vec<f64>, cells: Vec<usize>) -> PyResult<Self> {
        Ok(Self(Arc::new(Grid::boxed(&lo, &hi, &cells).map_err(err)?)))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        self.0.spacing().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Node coordinates, axis 0 slowest.
    fn nodes(&self) -> Vec<Vec<f64>> {
        let d = self.0.dim();
        (0..self.0.len()).map(|i| self.0.node(i)[..d].to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(shape={:?})", self.0.shape())
    }
}

#[pyclass(name = "ScalarField", module = "translab_py", frozen, from_py_object)]
#[derive(Clone)]
struct PyScalarField(ScalarField);

#[pymethods]
impl PyScalarField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self(ScalarField::from_values(grid.0.clone(), values).map_err(err)?))
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: f64) -> Self {
        Self(ScalarField::constant(grid.0.clone(), value))
    }

    /// `c + g . x`, kept in closed form.
    #[staticmethod]
    fn affine(grid: &PyGrid, c: f64, g: Vec<f64>) -> PyResult<Self> {
        if g.len() != grid.0.dim() {
            return Err(PyValueError::new_err("gradient length must match the grid dimension"));
        }
        Ok(Self(ScalarField::from_fn(grid.0.clone(), move |x| {
            c + x.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        })))
    }

    /// Sample a Python callable `f(x) -> float` at every node.
    #[staticmethod]
    fn sample(py: Python<'_>, grid: &PyGrid, f: Py<PyAny>) -> PyResult<Self> {
        let d = grid.0.dim();
        let values = (0..grid.0.len())
            .map(|i| f.call1(py, (grid.0.node(i)[..d].to_vec(),))?.extract::<f64>(py))
            .collect::<PyResult<Vec<f64>>>()?;
        Self::new(grid, values)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }

    fn eval(&self, x: Vec<f64>) -> f64 {
        self.0.eval(&x)
    }

    fn l2_norm(&self) -> PyResult<f64> {
        fields::l2_norm(&self.0, None).map_err(err)
    }
}

#[pyclass(name = "VectorField", module = "translab_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyVectorField(VectorField);

#[pymethods]
impl PyVectorField {
    /// Node-major values, `dim` components per node.
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self(VectorField::from_values(grid.0.clone(), values).map_err(err)?))
    }

    #[staticmethod]
    fn constant(grid: &PyGrid, value: Vec<f64>) -> PyResult<Self> {
        if value.len() != grid.0.dim() {
            return Err(PyValueError::new_err("value length must match the grid dimension"));
        }
        Ok(Self(VectorField::constant(grid.0.clone(), &value)))
    }

    /// `b + A x` with `A` given by rows, kept in closed form.
    #[staticmethod]
    fn affine(grid: &PyGrid, b: Vec<f64>, a: Vec<Vec<f64>>) -> PyResult<Self> {
        let d = grid.0.dim();
        if b.len() != d || a.len() != d || a.iter().any(|r| r.len() != d) {
            return Err(PyValueError::new_err("b and the rows of a must match the grid dimension"));
        }
        Ok(Self(VectorField::from_fn(grid.0.clone(), move |x, o| {
            for k in 0..o.len() {
                o[k] = b[k] + a[k].iter().zip(x).map(|(p, q)| p * q).sum::<f64>();
            }
        })))
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid().clone())
    }

    fn at(&self, x: Vec<f64>) -> Vec<f64> {
        self.0.at(&x)[..self.0.dim()].to_vec()
    }

    fn max_speed(&self) -> f64 {
        self.0.max_speed()
    }

    /// Admissibility against `delta0`, `M` and the anchor `(x0, nu0)`.
    fn check_admissible(
        &self,
        py: Python<'_>,
        delta0: f64,
        m: f64,
        x0: Vec<f64>,
        nu0: Vec<f64>,
    ) -> PyResult<Py<PyAny>> {
        to_py(py, &fields::check_admissible(&self.0, delta0, m, &x0, &nu0))
    }
}

#[pyclass(name = "Solution", module = "translab_py", frozen)]
struct PySolution(SpaceTimeField);

#[pymethods]
impl PySolution {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times().to_vec()
    }

    /// Time-major values.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn determined(&self) -> Vec<bool> {
        self.0.determined_mask().to_vec()
    }

    fn at_step(&self, k: usize) -> PyResult<PyScalarField> {
        if k >= self.0.n_times() {
            return Err(PyValueError::new_err(format!("step {k} out of range")));
        }
        Ok(PyScalarField(self.0.slice(k)))
    }

    fn l2_at(&self, k: usize) -> f64 {
        self.0.l2_at(k)
    }

    fn write_binary(&self, path: PathBuf) -> PyResult<()> {
        self.0.write_binary(&path).map_err(err)
    }
}

fn inflow(kind: &str, h: &VectorField, p: &ScalarField, a: &ScalarField) -> PyResult<Inflow> {
    match kind {
        "compatible" => Ok(compatible_inflow(h, p, Some(a), None)),
        "zero" => Ok(Inflow::Zero),
        "absent" => Ok(Inflow::Absent),
        other => Err(PyValueError::new_err(format!(
            "inflow must be compatible, zero or absent, got {other:?}"
        ))),
    }
}

/// Solve `du/dt + H . grad u + p u = 0` by characteristics.
#[pyfunction]
#[pyo3(signature = (h, p, a, t_final, dt, inflow_kind = "compatible", scheme = "characteristics"))]
fn solve_forward(
    h: &PyVectorField,
    p: &PyScalarField,
    a: &PyScalarField,
    t_final: f64,
    dt: f64,
    inflow_kind: &str,
    scheme: &str,
) -> PyResult<PySolution> {
    let inf = inflow(inflow_kind, &h.0, &p.0, &a.0)?;
    let u = match scheme {
        "characteristics" => transport::solve_forward(&h.0, &p.0, &a.0, &inf, t_final, dt),
        "upwind" => transport::solve_forward_fd(&h.0, &p.0, &a.0, &inf, t_final, dt),
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    }
    .map_err(err)?;
    Ok(PySolution(u))
}

/// Recover `H` from solutions for `family` (one datum per dimension).
#[pyfunction]
#[pyo3(signature = (h, p, family, t_final, dt, noise = 0.0, seed = 0, det_threshold = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn reconstruct_h(
    py: Python<'_>,
    h: &PyVectorField,
    p: &PyScalarField,
    family: Vec<PyScalarField>,
    t_final: f64,
    dt: f64,
    noise: f64,
    seed: u64,
    det_threshold: f64,
) -> PyResult<(PyVectorField, Py<PyAny>)> {
    let fam: Vec<ScalarField> = family.into_iter().map(|f| f.0).collect();
    let meas = MeasurementSet::synthesize(&h.0, &p.0, &fam, t_final, dt).map_err(err)?;
    let meas = meas.perturb_rates(noise, seed).map_err(err)?;
    let res = inverse::reconstruct_h(&meas, &p.0, det_threshold, Some(&h.0)).map_err(err)?;
    let est = res.vector().cloned().ok_or_else(|| PyRuntimeError::new_err("no vector estimate"))?;
    Ok((PyVectorField(est), to_py(py, &res.summary())?))
}

/// Recover `p` from the solution for one datum `a`.
#[pyfunction]
#[pyo3(signature = (h, p, a, t_final, dt, noise = 0.0, seed = 0, a_threshold = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn reconstruct_p(
    py: Python<'_>,
    h: &PyVectorField,
    p: &PyScalarField,
    a: &PyScalarField,
    t_final: f64,
    dt: f64,
    noise: f64,
    seed: u64,
    a_threshold: f64,
) -> PyResult<(PyScalarField, Py<PyAny>)> {
    let meas = MeasurementSet::synthesize(&h.0, &p.0, std::slice::from_ref(&a.0), t_final, dt).map_err(err)?;
    let meas = meas.perturb_rates(noise, seed).map_err(err)?;
    let res = inverse::reconstruct_p(&meas, &h.0, a_threshold, Some(&p.0)).map_err(err)?;
    let est = res.scalar().cloned().ok_or_else(|| PyRuntimeError::new_err("no scalar estimate"))?;
    Ok((PyScalarField(est), to_py(py, &res.summary())?))
}

/// Balance of the decaying and growing terms of the stability argument.
#[pyfunction]
fn s_balance(py: Python<'_>, m0: f64, d: f64, c: f64, beta: f64, t_final: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &inverse::s_balance(m0, d, c, beta, t_final).map_err(err)?)
}

/// Fit `(C, s0)` over the seeded regression family.
#[pyfunction]
#[pyo3(signature = (seed = 5, members = 12, cells = 32, steps = 128, s_min = 1.0, s_max = 100.0, s_count = 41))]
#[allow(clippy::too_many_arguments)]
fn carleman_fit(
    py: Python<'_>,
    seed: u64,
    members: usize,
    cells: usize,
    steps: usize,
    s_min: f64,
    s_max: f64,
    s_count: usize,
) -> PyResult<Py<PyAny>> {
    let fit = py
        .detach(|| {
            let fam = regression_family(seed, members, cells, steps)?;
            let ledgers = fam.ledgers(&log_grid(s_min, s_max, s_count))?;
            fit_constants(&ledgers, &FitConfig::default())
        })
        .map_err(err)?;
    to_py(py, &fit)
}

/// The squared-ramp example of a nonzero solution with zero data.
#[pyfunction]
#[pyo3(signature = (cells = 128))]
fn nonuniqueness_demo(py: Python<'_>, cells: usize) -> PyResult<Py<PyAny>> {
    to_py(py, &inverse::nonuniqueness_demo(&Profile::squared_ramp(), cells).map_err(err)?)
}

fn parse(config: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml(config).map_err(err)
}

fn kind(name: &str) -> PyResult<Kind> {
    <Kind as clap::ValueEnum>::from_str(name, true).map_err(PyValueError::new_err)
}

/// Every violated constraint of a TOML configuration for `kind`.
#[pyfunction]
fn validate_config(config: &str, kind_name: &str) -> PyResult<Vec<String>> {
    Ok(cli::validate(&parse(config)?, kind(kind_name)?))
}

/// Run an experiment from TOML text, writing artifacts into `out`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str, kind_name: &str, out: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = parse(config)?;
    let k = kind(kind_name)?;
    let report = py.detach(|| cli::run(&cfg, k, &out)).map_err(err)?;
    to_py(py, &report)
}

#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml().map_err(err)
}

#[pymodule]
fn translab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyScalarField>()?;
    m.add_class::<PyVectorField>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve_forward, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_h, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_p, m)?)?;
    m.add_function(wrap_pyfunction!(s_balance, m)?)?;
    m.add_function(wrap_pyfunction!(carleman_fit, m)?)?;
    m.add_function(wrap_pyfunction!(nonuniqueness_demo, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
