//! Python bindings: the core matrix operations, the randomized-SVD
//! compression pieces, and a config-driven optimizer runner.

use limuon::linalg;
use limuon::optimizer::{limuon_run, RunError};
use limuon::rsvd as rsvd_mod;
use limuon_harness::config::ExperimentSpec;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Dense matrix of 64-bit floats.
#[pyclass(name = "Matrix", from_py_object)]
#[derive(Clone)]
struct PyMatrix {
    inner: linalg::Matrix,
}

#[pymethods]
impl PyMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: linalg::Matrix::from_rows(&rows).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn zeros(rows: usize, cols: usize) -> PyResult<Self> {
        if rows == 0 || cols == 0 {
            return Err(value_err("dimensions must be positive"));
        }
        Ok(Self {
            inner: linalg::Matrix::zeros(rows, cols),
        })
    }

    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(value_err("dimension must be positive"));
        }
        Ok(Self {
            inner: linalg::Matrix::identity(n),
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.inner.rows())
            .map(|i| self.inner.row(i).to_vec())
            .collect()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let (m, n) = self.inner.shape();
        if i >= m || j >= n {
            return Err(value_err(format!("index ({i}, {j}) out of range for {m}x{n}")));
        }
        Ok(self.inner.get(i, j))
    }

    fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    fn matmul(&self, other: &PyMatrix) -> PyResult<Self> {
        if self.inner.cols() != other.inner.rows() {
            return Err(value_err("inner dimensions do not match"));
        }
        Ok(Self {
            inner: self.inner.matmul(&other.inner),
        })
    }

    fn add(&self, other: &PyMatrix) -> PyResult<Self> {
        if self.inner.shape() != other.inner.shape() {
            return Err(value_err("shapes do not match"));
        }
        Ok(Self {
            inner: self.inner.add(&other.inner),
        })
    }

    fn sub(&self, other: &PyMatrix) -> PyResult<Self> {
        if self.inner.shape() != other.inner.shape() {
            return Err(value_err("shapes do not match"));
        }
        Ok(Self {
            inner: self.inner.sub(&other.inner),
        })
    }

    fn scale(&self, c: f64) -> Self {
        Self {
            inner: self.inner.scale(c),
        }
    }

    fn inner_product(&self, other: &PyMatrix) -> PyResult<f64> {
        if self.inner.shape() != other.inner.shape() {
            return Err(value_err("shapes do not match"));
        }
        Ok(self.inner.inner(&other.inner))
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    fn __repr__(&self) -> String {
        let (m, n) = self.inner.shape();
        format!("Matrix({m}x{n})")
    }
}

/// Seedable deterministic random generator.
#[pyclass(name = "Rng")]
struct PyRng {
    inner: linalg::Rng,
}

#[pymethods]
impl PyRng {
    #[new]
    fn new(seed: u64) -> Self {
        Self {
            inner: linalg::Rng::seed_from_u64(seed),
        }
    }

    fn next_gaussian(&mut self) -> f64 {
        self.inner.next_gaussian()
    }
}

/// One recorded optimizer step.
#[pyclass(name = "StepRecord", frozen)]
struct PyStepRecord {
    #[pyo3(get)]
    seed: u64,
    #[pyo3(get)]
    t: usize,
    #[pyo3(get)]
    loss: f64,
    #[pyo3(get)]
    grad_fro: f64,
    #[pyo3(get)]
    grad_nuc: f64,
    #[pyo3(get)]
    est_err: f64,
    #[pyo3(get)]
    state_elems: usize,
}

#[pymethods]
impl PyStepRecord {
    fn __repr__(&self) -> String {
        format!(
            "StepRecord(seed={}, t={}, loss={:.6e}, grad_fro={:.6e})",
            self.seed, self.t, self.loss, self.grad_fro
        )
    }
}

#[pyfunction]
fn gaussian_matrix(rows: usize, cols: usize, rng: &mut PyRng) -> PyResult<PyMatrix> {
    if rows == 0 || cols == 0 {
        return Err(value_err("dimensions must be positive"));
    }
    Ok(PyMatrix {
        inner: linalg::gaussian_matrix(rows, cols, &mut rng.inner),
    })
}

/// Thin Householder QR; requires rows >= cols.
#[pyfunction]
fn qr(a: &PyMatrix) -> PyResult<(PyMatrix, PyMatrix)> {
    let r = linalg::qr_decompose(&a.inner).map_err(value_err)?;
    Ok((PyMatrix { inner: r.q }, PyMatrix { inner: r.r }))
}

/// One-sided Jacobi SVD: returns (u, sigma, v) with A = u @ diag(sigma) @ v.T.
#[pyfunction]
fn svd(a: &PyMatrix) -> (PyMatrix, Vec<f64>, PyMatrix) {
    let r = linalg::svd(&a.inner);
    (PyMatrix { inner: r.u }, r.sigma, PyMatrix { inner: r.v })
}

/// Orthogonal (polar) factor U V^T, zero on the numerical null space.
#[pyfunction]
fn orthogonal_factor(a: &PyMatrix) -> PyMatrix {
    PyMatrix {
        inner: linalg::orthogonal_factor(&a.inner),
    }
}

/// Newton-Schulz approximation of the orthogonal factor.
#[pyfunction]
fn newton_schulz(a: &PyMatrix, iters: usize) -> PyResult<PyMatrix> {
    Ok(PyMatrix {
        inner: linalg::newton_schulz(&a.inner, iters).map_err(value_err)?,
    })
}

#[pyfunction]
fn nuclear_norm(a: &PyMatrix) -> f64 {
    linalg::nuclear_norm(&a.inner)
}

#[pyfunction]
fn frobenius_norm(a: &PyMatrix) -> f64 {
    a.inner.frobenius_norm()
}

/// Randomized SVD truncated to rank r_hat: returns (u_hat, s_hat, v_hat).
#[pyfunction]
fn rsvd(
    a: &PyMatrix,
    r_hat: usize,
    s: usize,
    rng: &mut PyRng,
) -> PyResult<(PyMatrix, Vec<f64>, PyMatrix)> {
    let params = rsvd_mod::RsvdParams::new(r_hat, s).map_err(value_err)?;
    let f = rsvd_mod::rsvd(&a.inner, params, &mut rng.inner).map_err(value_err)?;
    Ok((
        PyMatrix {
            inner: f.u_hat().clone(),
        },
        f.s_hat().to_vec(),
        PyMatrix {
            inner: f.v_hat().clone(),
        },
    ))
}

/// Expected-error bound (1 + r_hat/(s-1))^{1/2} * tail_energy.
#[pyfunction]
fn rsvd_error_bound(singular_values: Vec<f64>, r_hat: usize, s: usize) -> PyResult<f64> {
    rsvd_mod::rsvd_error_bound(&singular_values, r_hat, s).map_err(value_err)
}

#[pyfunction]
fn tail_energy(singular_values: Vec<f64>, r_hat: usize) -> f64 {
    rsvd_mod::tail_energy(&singular_values, r_hat)
}

/// Estimator-error envelope for the dense STORM recursion.
#[pyfunction]
fn storm_error_envelope(beta: f64, eta: f64, sigma: f64, l: f64, r: f64, t: usize) -> f64 {
    limuon::metrics::storm_error_envelope(beta, eta, sigma, l, r, t)
}

/// Persistent state-memory element count for a variant on an m x n
/// parameter ("muon" and "limuon1" store m*n; "limuon2" stores
/// (m + n + 1) * r_hat).
#[pyfunction]
#[pyo3(signature = (variant, m, n, r_hat=None))]
fn state_memory(variant: &str, m: usize, n: usize, r_hat: Option<usize>) -> PyResult<usize> {
    match variant {
        "muon" | "limuon1" => Ok(m * n),
        "limuon2" => {
            let r_hat =
                r_hat.ok_or_else(|| value_err("limuon2 requires r_hat"))?;
            Ok((m + n + 1) * r_hat)
        }
        other => Err(value_err(format!("unknown variant '{other}'"))),
    }
}

/// Runs an experiment described by the same JSON schema the CLI consumes
/// and returns the per-step records across all repeats.
#[pyfunction]
#[pyo3(signature = (config_json, overrides=Vec::new()))]
fn run_limuon(config_json: &str, overrides: Vec<String>) -> PyResult<Vec<PyStepRecord>> {
    let spec =
        ExperimentSpec::from_json_with_overrides(config_json, &overrides).map_err(value_err)?;
    let (oracle, w0) = spec.build_problem().map_err(value_err)?;

    let mut out = Vec::new();
    for rep in 0..spec.repeats {
        let seed = spec.optimizer.seed.wrapping_add(rep as u64);
        let config = spec.build_optimizer_config(seed).map_err(value_err)?;
        let records = match limuon_run(&config, oracle.as_ref(), &w0) {
            Ok(records) => records,
            Err(RunError::Diverged { step, .. }) => {
                return Err(PyRuntimeError::new_err(format!(
                    "run with seed {seed} diverged at step {step}"
                )))
            }
            Err(RunError::Invalid(e)) => return Err(value_err(e)),
        };
        out.extend(records.into_iter().map(|r| PyStepRecord {
            seed,
            t: r.t,
            loss: r.loss,
            grad_fro: r.grad_frobenius,
            grad_nuc: r.grad_nuclear,
            est_err: r.estimator_error,
            state_elems: r.state_elements,
        }));
    }
    Ok(out)
}

#[pymodule]
fn limuon_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyRng>()?;
    m.add_class::<PyStepRecord>()?;
    m.add_function(wrap_pyfunction!(gaussian_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(qr, m)?)?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(orthogonal_factor, m)?)?;
    m.add_function(wrap_pyfunction!(newton_schulz, m)?)?;
    m.add_function(wrap_pyfunction!(nuclear_norm, m)?)?;
    m.add_function(wrap_pyfunction!(frobenius_norm, m)?)?;
    m.add_function(wrap_pyfunction!(rsvd, m)?)?;
    m.add_function(wrap_pyfunction!(rsvd_error_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tail_energy, m)?)?;
    m.add_function(wrap_pyfunction!(storm_error_envelope, m)?)?;
    m.add_function(wrap_pyfunction!(state_memory, m)?)?;
    m.add_function(wrap_pyfunction!(run_limuon, m)?)?;
    Ok(())
}
