//! Python bindings: density matrices, rate tables, the model
//! right-hand sides, and the two integration engines, with complex
//! matrices passed as nested [re, im] lists (the same encoding the
//! scenario files use).

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use fermikin::core::{C64, DensityMatrix, HamiltonianSpec, Matrix, OrbitalBasis, RateTable};
use fermikin::diagnostics::{invariant_report, Tolerances};
use fermikin::generators::{fermion_rhs_matrix, markoff_rhs_matrix, transition_bound_m};
use fermikin::integrators::{
    integrate_picard, integrate_rk4, IntegrationConfig, Method, Trajectory,
};
use fermikin::reductions::hole_transform;

fn err(e: fermikin::Error) -> PyErr {
    PyValueError::new_err(format!("{e}"))
}

fn matrix_from_py(rows: Vec<Vec<(f64, f64)>>) -> PyResult<Matrix> {
    let n = rows.len();
    let mut m = Matrix::zeros((n, n));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(PyValueError::new_err("matrix must be square"));
        }
        for (j, (re, im)) in row.iter().enumerate() {
            m[(i, j)] = C64::new(*re, *im);
        }
    }
    Ok(m)
}

fn matrix_to_py(m: &Matrix) -> Vec<Vec<(f64, f64)>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| (m[(i, j)].re, m[(i, j)].im)).collect())
        .collect()
}

/// A one-particle fermionic density matrix.
#[pyclass(name = "DensityMatrix")]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    /// Build from a nested list of (re, im) pairs.
    #[new]
    fn new(rows: Vec<Vec<(f64, f64)>>) -> PyResult<Self> {
        let m = matrix_from_py(rows)?;
        Ok(PyDensityMatrix { inner: DensityMatrix::from_matrix(m).map_err(err)? })
    }

    /// Diagonal (incoherent) state from occupation numbers.
    #[staticmethod]
    fn from_occupations(f: Vec<f64>) -> PyResult<Self> {
        Ok(PyDensityMatrix { inner: DensityMatrix::from_occupations(&f).map_err(err)? })
    }

    fn occupations(&self) -> Vec<f64> {
        self.inner.occupations()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn matrix(&self) -> Vec<Vec<(f64, f64)>> {
        matrix_to_py(self.inner.matrix())
    }

    /// (lambda_min, lambda_max) of the spectrum.
    fn spectral_bounds(&self) -> (f64, f64) {
        fermikin::core::spectral_bounds(self.inner.op())
    }

    fn is_admissible(&self, tol: f64) -> bool {
        self.inner.is_admissible(tol)
    }

    /// The vacancy picture I - rho.
    fn hole(&self) -> PyDensityMatrix {
        PyDensityMatrix { inner: hole_transform(&self.inner) }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

/// Transition rates omega[to][from] with optional dephasing rates.
#[pyclass(name = "RateTable")]
#[derive(Clone)]
struct PyRateTable {
    inner: RateTable,
}

#[pymethods]
impl PyRateTable {
    #[new]
    #[pyo3(signature = (omega, gamma=None))]
    fn new(omega: Vec<Vec<f64>>, gamma: Option<Vec<Vec<f64>>>) -> PyResult<Self> {
        let n = omega.len();
        let build = |rows: &[Vec<f64>]| -> PyResult<Array2<f64>> {
            let mut m = Array2::<f64>::zeros((n, n));
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(PyValueError::new_err("rate matrix must be square"));
                }
                for (j, x) in row.iter().enumerate() {
                    m[(i, j)] = *x;
                }
            }
            Ok(m)
        };
        let omega = build(&omega)?;
        let gamma = gamma.as_deref().map(build).transpose()?;
        Ok(PyRateTable { inner: RateTable::new(omega, gamma).map_err(err)? })
    }

    /// The contraction-window bound constant M.
    fn transition_bound(&self) -> f64 {
        transition_bound_m(&self.inner)
    }

    fn transposed(&self) -> PyRateTable {
        PyRateTable { inner: self.inner.transposed() }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: Trajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn states(&self) -> Vec<PyDensityMatrix> {
        self.inner.states().iter().map(|s| PyDensityMatrix { inner: s.clone() }).collect()
    }

    fn final_state(&self) -> PyDensityMatrix {
        PyDensityMatrix { inner: self.inner.last().clone() }
    }

    /// Per-sample (lambda_min, lambda_max, trace, offdiag_norm).
    fn diagnostics(&self) -> Vec<(f64, f64, f64, f64)> {
        self.inner
            .diagnostics()
            .iter()
            .map(|d| (d.lambda_min, d.lambda_max, d.trace, d.offdiag_norm))
            .collect()
    }

    /// True when every sample stays admissible and the trace drifts
    /// less than the given tolerance.
    fn certify(&self, admissibility_tol: f64, trace_tol: f64) -> bool {
        let tol = Tolerances {
            admissibility: admissibility_tol,
            trace: trace_tol,
            coherence: admissibility_tol,
        };
        invariant_report(&self.inner, None, &tol).summary.pass
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn free_hamiltonian(energies: Vec<f64>) -> PyResult<HamiltonianSpec> {
    let basis = OrbitalBasis::new(energies).map_err(err)?;
    Ok(HamiltonianSpec::free(basis))
}

fn config(t0: f64, tf: f64, dt: f64) -> PyResult<IntegrationConfig> {
    IntegrationConfig::new(t0, tf, dt).map_err(err)
}

/// Evolve the nonlinear fermionic equation with the direct
/// fourth-order integrator.
#[pyfunction]
fn evolve_fermion(
    rho0: &PyDensityMatrix,
    energies: Vec<f64>,
    rates: &PyRateTable,
    t0: f64,
    tf: f64,
    dt: f64,
) -> PyResult<PyTrajectory> {
    let hspec = free_hamiltonian(energies)?;
    let h = hspec.evaluate(t0).into_matrix();
    let cfg = config(t0, tf, dt)?;
    let traj = integrate_rk4(
        |_, r| fermion_rhs_matrix(r, &h, &rates.inner),
        &rho0.inner,
        &cfg,
    )
    .map_err(err)?;
    Ok(PyTrajectory { inner: traj })
}

/// Evolve the same equation with the contraction-mapping engine.
#[pyfunction]
fn evolve_fermion_picard(
    rho0: &PyDensityMatrix,
    energies: Vec<f64>,
    rates: &PyRateTable,
    t0: f64,
    tf: f64,
    dt: f64,
) -> PyResult<PyTrajectory> {
    let hspec = free_hamiltonian(energies)?;
    let mut cfg = config(t0, tf, dt)?;
    cfg.method = Method::Picard;
    let (traj, _) = integrate_picard(&rho0.inner, &hspec, &rates.inner, &cfg).map_err(err)?;
    Ok(PyTrajectory { inner: traj })
}

/// Evolve the linear transition-rate equation.
#[pyfunction]
#[pyo3(signature = (rho0, energies, rates, t0, tf, dt, dephasing=false))]
fn evolve_markoff(
    rho0: &PyDensityMatrix,
    energies: Vec<f64>,
    rates: &PyRateTable,
    t0: f64,
    tf: f64,
    dt: f64,
    dephasing: bool,
) -> PyResult<PyTrajectory> {
    if dephasing && rates.inner.gamma().is_none() {
        return Err(PyValueError::new_err("dephasing requires gamma rates"));
    }
    let hspec = free_hamiltonian(energies)?;
    let h = hspec.evaluate(t0).into_matrix();
    let cfg = config(t0, tf, dt)?;
    let traj = integrate_rk4(
        |_, r| markoff_rhs_matrix(r, &h, &rates.inner, dephasing),
        &rho0.inner,
        &cfg,
    )
    .map_err(err)?;
    Ok(PyTrajectory { inner: traj })
}

/// Instantaneous fermionic right-hand side as a nested (re, im)
/// list; handy for checking stationarity from Python.
#[pyfunction]
fn fermion_rhs(
    rho: &PyDensityMatrix,
    energies: Vec<f64>,
    rates: &PyRateTable,
) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let hspec = free_hamiltonian(energies)?;
    let h = hspec.evaluate(0.0).into_matrix();
    Ok(matrix_to_py(&fermion_rhs_matrix(rho.inner.matrix(), &h, &rates.inner)))
}

#[pymodule]
fn fermikin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDensityMatrix>()?;
    m.add_class::<PyRateTable>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(evolve_fermion, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_fermion_picard, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_markoff, m)?)?;
    m.add_function(wrap_pyfunction!(fermion_rhs, m)?)?;
    Ok(())
}
