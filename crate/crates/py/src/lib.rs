use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use qspec_core::bandtree::{build_generating_tree_with, tree_to_csv, tree_to_json, verify_tree, BandTree as CoreTree, TreeOptions};
use qspec_core::contfrac::{convergents as core_convergents, CFExpansion};
use qspec_core::dos::{dos_compare, dos_from_tree, level_intervals};
use qspec_core::holder;
use qspec_core::schrodinger::{eig_count_interval, potential as core_potential, ModelParams, DEFAULT_PRECISION};
use qspec_core::Error;

fn err(e: Error) -> PyErr {
    if e.is_computational() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn params(cf: &str, lambda: f64, precision: u32) -> PyResult<ModelParams> {
    let cf: CFExpansion = cf.parse().map_err(err)?;
    ModelParams::with_precision(cf, lambda, precision).map_err(err)
}

fn to_json<T: serde::Serialize>(x: &T) -> PyResult<String> {
    serde_json::to_string(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Convergents (k, p_k, q_k) as decimal strings for p and q.
#[pyfunction]
fn convergents(cf: &str, count: usize) -> PyResult<Vec<(usize, String, String)>> {
    let cf: CFExpansion = cf.parse().map_err(err)?;
    Ok(core_convergents(&cf, count).map_err(err)?.into_iter().map(|c| (c.k, c.p.to_string(), c.q.to_string())).collect())
}

#[pyfunction]
fn potential(cf: &str, lambda: f64, n: u64) -> PyResult<Vec<f64>> {
    core_potential(&params(cf, lambda, DEFAULT_PRECISION)?, 1, n).map_err(err)
}

/// Eigenvalues of H_n in [lo, hi].
#[pyfunction]
fn eig_count(cf: &str, lambda: f64, n: u64, lo: f64, hi: f64) -> PyResult<usize> {
    eig_count_interval(&params(cf, lambda, DEFAULT_PRECISION)?, n, lo, hi).map_err(err)
}

#[pyfunction]
fn gamma_lower(b: u64, lambda: f64) -> PyResult<f64> {
    holder::gamma_lower(b, lambda).map_err(err)
}

#[pyfunction]
fn gamma_upper(b: u64, lambda: f64) -> PyResult<f64> {
    holder::gamma_upper(b, lambda).map_err(err)
}

/// HolderReport as a JSON string.
#[pyfunction]
#[pyo3(signature = (cf, lambda, depth, precision = DEFAULT_PRECISION))]
fn holder_report(cf: &str, lambda: f64, depth: usize, precision: u32) -> PyResult<String> {
    to_json(&holder::holder_report(&params(cf, lambda, precision)?, depth).map_err(err)?)
}

/// DichotomyReport as a JSON string.
#[pyfunction]
fn dichotomy_check(cf: &str, lambda: f64, depth: usize) -> PyResult<String> {
    let cf: CFExpansion = cf.parse().map_err(err)?;
    to_json(&holder::dichotomy_check(&cf, lambda, depth).map_err(err)?)
}

#[pyfunction]
fn corollary_asymptotics(b: u64, lambdas: Vec<f64>) -> PyResult<String> {
    to_json(&holder::corollary_asymptotics(b, &lambdas).map_err(err)?)
}

/// Generating band tree 𝓖_0 … 𝓖_depth.
#[pyclass]
struct BandTree {
    inner: CoreTree,
}

#[pymethods]
impl BandTree {
    #[new]
    #[pyo3(signature = (cf, lambda, depth, beam = None, precision = DEFAULT_PRECISION))]
    fn new(cf: &str, lambda: f64, depth: usize, beam: Option<usize>, precision: u32) -> PyResult<Self> {
        let p = params(cf, lambda, precision)?;
        let inner = build_generating_tree_with(&p, depth, &TreeOptions { beam, ..TreeOptions::default() }).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    fn level_sizes(&self) -> Vec<usize> {
        self.inner.levels.iter().map(Vec::len).collect()
    }

    /// (lo, hi, kind, parent) for every band of one level.
    fn level(&self, k: usize) -> PyResult<Vec<(f64, f64, String, Option<usize>)>> {
        let lv = self.inner.levels.get(k).ok_or_else(|| PyValueError::new_err(format!("level {k} beyond depth {}", self.inner.depth())))?;
        Ok(lv.iter().map(|b| (b.lo.to_f64(), b.hi.to_f64(), b.kind.to_string(), b.parent)).collect())
    }

    /// Realized (I, II, III) counts at level k.
    fn level_counts(&self, k: usize) -> PyResult<(usize, usize, usize)> {
        if k > self.inner.depth() {
            return Err(PyValueError::new_err(format!("level {k} beyond depth {}", self.inner.depth())));
        }
        let c = self.inner.level_counts(k);
        Ok((c[0], c[1], c[2]))
    }

    fn to_json(&self) -> PyResult<String> {
        tree_to_json(&self.inner).map_err(err)
    }

    fn to_csv(&self) -> PyResult<String> {
        tree_to_csv(&self.inner).map_err(err)
    }

    /// (name, passed, required, detail) for every structural check.
    fn verify(&self) -> PyResult<Vec<(String, bool, bool, String)>> {
        let r = verify_tree(&self.inner).map_err(err)?;
        Ok(r.checks.into_iter().map(|c| (c.name, c.passed, c.required, c.detail)).collect())
    }

    /// Bands of σ_(k+1,0) at level k, each of mass 1/q_k.
    fn dos_bands(&self, k: usize) -> PyResult<Vec<(f64, f64)>> {
        Ok(dos_from_tree(&self.inner, k).map_err(err)?.bands)
    }

    /// Largest gap between band-count DOS at level k and eigenvalue counts
    /// of H_{q_{k+2}}, over the bands of level `level` as test intervals.
    fn dos_discrepancy(&self, k: usize, level: usize) -> PyResult<f64> {
        if level > self.inner.depth() {
            return Err(PyValueError::new_err(format!("level {level} beyond depth {}", self.inner.depth())));
        }
        let iv = level_intervals(&self.inner, level);
        Ok(dos_compare(&self.inner.params, k, &iv).map_err(err)?.max_discrepancy)
    }

    fn holder_report(&self) -> PyResult<String> {
        to_json(&holder::report_for_tree(&self.inner).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("BandTree(cf={:?}, lambda={}, depth={})", self.inner.params.cf.to_string(), self.inner.params.lambda, self.inner.depth())
    }
}

#[pymodule]
fn qspec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<BandTree>()?;
    m.add_function(wrap_pyfunction!(convergents, m)?)?;
    m.add_function(wrap_pyfunction!(potential, m)?)?;
    m.add_function(wrap_pyfunction!(eig_count, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_lower, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_upper, m)?)?;
    m.add_function(wrap_pyfunction!(holder_report, m)?)?;
    m.add_function(wrap_pyfunction!(dichotomy_check, m)?)?;
    m.add_function(wrap_pyfunction!(corollary_asymptotics, m)?)?;
    Ok(())
}
