//! Python bindings: kernels, limit constants, stationary sampling,
//! replica batches and acceptance criteria.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use stirsim::dynamics::{run_batch, ReplicaSpec};
use stirsim::kernels::{self, QuadratureSpec};
use stirsim::lattice::Torus;
use stirsim::rng::{replica_rng, DEFAULT_SEED};
use stirsim::state::{sample_stationary as draw_stationary, ModelParams};
use stirsim::theory::{self, LimitSpec};

fn to_py(e: stirsim::Error) -> PyErr {
    match e {
        stirsim::Error::Usage(_) | stirsim::Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn green_for(d: usize) -> PyResult<Option<f64>> {
    if d >= 3 {
        kernels::green_constant(d, &QuadratureSpec::default()).map(Some).map_err(to_py)
    } else {
        Ok(None)
    }
}

/// Symmetrised kernel `qhat_t(x)` on Z^d.
#[pyfunction]
fn qhat(k: usize, t: f64, x: Vec<i64>) -> f64 {
    kernels::qhat(k, t, &x)
}

/// Kernel of the symmetrised walk on the torus of side `side`.
#[pyfunction]
fn qhat_torus(d: usize, side: usize, k: usize, t: f64, x: Vec<usize>) -> PyResult<f64> {
    kernels::q_torus(d, side, k, t, &x).map_err(to_py)
}

/// Constant `Gamma_d` for `d >= 3`.
#[pyfunction]
fn green_constant(d: usize) -> PyResult<f64> {
    kernels::green_constant(d, &QuadratureSpec::default()).map_err(to_py)
}

/// Matrix A, its square root and the limit prefactor.
#[pyfunction]
fn theory_constants<'py>(py: Python<'py>, d: usize, k: usize, p: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let params = ModelParams::new(k, p).map_err(to_py)?;
    let green = green_for(d)?;
    let spec = LimitSpec::new(d, &params, green).map_err(to_py)?;
    let a = theory::matrix_a(&params);
    let root = theory::matrix_sqrt(&a).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("A", a.rows())?;
    out.set_item("A_sqrt", root.rows())?;
    out.set_item("prefactor", spec.prefactor)?;
    out.set_item("green_constant", green)?;
    out.set_item("regime", format!("{:?}", spec.regime))?;
    Ok(out)
}

/// Limit covariance of the rescaled occupation times at `(s, t)`; species are 0-based.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn limit_covariance(d: usize, k: usize, p: Vec<f64>, s: f64, t: f64, j1: usize, j2: usize) -> PyResult<f64> {
    let params = ModelParams::new(k, p).map_err(to_py)?;
    theory::limit_covariance(d, &params, s, t, j1, j2, green_for(d)?).map_err(to_py)
}

/// Per-site species counts of one stationary draw, flattened site-major
/// with the untracked label last.
#[pyfunction]
#[pyo3(signature = (d, side, k, p, seed = DEFAULT_SEED))]
fn sample_stationary(d: usize, side: usize, k: usize, p: Vec<f64>, seed: u64) -> PyResult<Vec<u32>> {
    let torus = Torus::new(d, side).map_err(to_py)?;
    let params = ModelParams::new(k, p).map_err(to_py)?;
    let mut rng = replica_rng(seed, 0);
    Ok(draw_stationary(&params, &torus, &mut rng)
        .project(params.labels())
        .as_slice()
        .to_vec())
}

/// Simulates `replicas` stationary replicas and returns `(times, beta)`,
/// with `beta[r][j][i]` the centred occupation of species `j` at `times[i]`.
#[pyfunction]
#[pyo3(signature = (d, side, k, p, horizon, grid, replicas, seed = DEFAULT_SEED, jobs = 1))]
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn simulate(
    py: Python<'_>,
    d: usize,
    side: usize,
    k: usize,
    p: Vec<f64>,
    horizon: f64,
    grid: Vec<f64>,
    replicas: usize,
    seed: u64,
    jobs: usize,
) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
    let torus = Torus::new(d, side).map_err(to_py)?;
    let params = ModelParams::new(k, p).map_err(to_py)?;
    let specs: Vec<ReplicaSpec> = (0..replicas as u64)
        .map(|r| ReplicaSpec::new(torus.clone(), params.clone(), horizon, grid.clone(), seed, r))
        .collect();
    let outputs = py.detach(|| run_batch(&specs, jobs.max(1))).map_err(to_py)?;
    let times = outputs.first().map(|o| o.path.times.clone()).unwrap_or_default();
    Ok((times, outputs.into_iter().map(|o| o.path.values).collect()))
}

/// Runs one acceptance criterion; returns `(passed, report line)`.
#[pyfunction]
#[pyo3(signature = (id, seed = DEFAULT_SEED, jobs = 1))]
fn acceptance(py: Python<'_>, id: &str, seed: u64, jobs: usize) -> PyResult<(bool, String)> {
    let cfg = stirsim::acceptance::AcceptanceConfig { seed, jobs: jobs.max(1) };
    let report = py.detach(|| stirsim::acceptance::run(id, &cfg)).map_err(to_py)?;
    Ok((report.pass, report.line()))
}

#[pymodule(name = "stirsim")]
fn stirsim_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(qhat, m)?)?;
    m.add_function(wrap_pyfunction!(qhat_torus, m)?)?;
    m.add_function(wrap_pyfunction!(green_constant, m)?)?;
    m.add_function(wrap_pyfunction!(theory_constants, m)?)?;
    m.add_function(wrap_pyfunction!(limit_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_stationary, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance, m)?)?;
    Ok(())
}
