//! Python bindings for the ppt-omega engine.
//!
//! Matrices cross the boundary as nested lists of Python complex numbers.
//! Run and validation summaries are returned as JSON strings.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ppt_omega::criteria::{self, Convention, Split, DEFAULT_TOLERANCE};
use ppt_omega::estimator::{self, EditRule, SeriesPoint};
use ppt_omega::linalg::CMatrix;
use ppt_omega::measures::{self, MetricKind, MetricName};
use ppt_omega::oracle_exact;
use ppt_omega::qmc_sequence::{self, Scrambling, SequenceConfig};
use ppt_omega::run::{self, RunConfig, RunOptions};
use ppt_omega::state_param::{self, SpectrumPoint};
use ppt_omega::validate::{self, ValidationOptions};
use ppt_omega::Error;

type Rows = Vec<Vec<Complex64>>;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn convention(name: &str) -> PyResult<Convention> {
    match name {
        "inner" => Ok(Convention::InnerBlocks),
        "outer" => Ok(Convention::OuterBlocks),
        _ => Err(PyValueError::new_err(format!("unknown convention {name:?}, expected inner or outer"))),
    }
}

fn scrambling(name: &str, seed: u64) -> PyResult<Scrambling> {
    match name {
        "none" => Ok(Scrambling::None),
        "tezuka" => Ok(Scrambling::Tezuka { seed }),
        "digit_permutation" => Ok(Scrambling::DigitPermutation { seed }),
        _ => Err(PyValueError::new_err(format!(
            "unknown scrambling {name:?}, expected none, tezuka or digit_permutation"
        ))),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Generalized Faure sequence on the unit cube.
#[pyclass(name = "FaureSequence", frozen)]
struct PyFaureSequence {
    inner: qmc_sequence::FaureSequence,
}

#[pymethods]
impl PyFaureSequence {
    #[new]
    #[pyo3(signature = (dimension, scrambling="tezuka", seed=1, skip=0, subset=None))]
    fn new(dimension: usize, scrambling: &str, seed: u64, skip: u64, subset: Option<Vec<usize>>) -> PyResult<Self> {
        let mut cfg = SequenceConfig::new(dimension).with_scrambling(self::scrambling(scrambling, seed)?);
        cfg.skip = skip;
        if let Some(s) = subset {
            cfg = cfg.with_subset(s);
        }
        let inner = qmc_sequence::FaureSequence::new(cfg).map_err(py_err)?;
        Ok(PyFaureSequence { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    #[getter]
    fn base(&self) -> u32 {
        self.inner.config().base
    }

    #[getter]
    fn capacity(&self) -> u64 {
        self.inner.capacity()
    }

    fn point(&self, index: u64) -> PyResult<Vec<f64>> {
        Ok(self.inner.point(index).map_err(py_err)?.coords)
    }

    fn points(&self, start: u64, count: u64) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .stream(start, count)
            .map(|p| p.map(|p| p.coords).map_err(py_err))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("FaureSequence(dimension={}, base={})", self.inner.dimension(), self.inner.config().base)
    }
}

/// Number of cube coordinates for a `d`-dimensional state.
#[pyfunction]
#[pyo3(signature = (d, rank_deficient=false))]
fn cube_dimension(d: usize, rank_deficient: bool) -> usize {
    state_param::cube_dimension(d, rank_deficient)
}

/// Density matrix and eigenvalues for one cube point.
#[pyfunction]
#[pyo3(signature = (coords, d, rank_deficient=false))]
fn cube_to_state(coords: Vec<f64>, d: usize, rank_deficient: bool) -> PyResult<(Rows, Vec<f64>)> {
    let (rho, spec) = state_param::coords_to_state(&coords, d, rank_deficient).map_err(py_err)?;
    Ok((to_rows(rho.matrix()), spec.lambdas))
}

#[pyfunction]
#[pyo3(signature = (rho, d_a, d_b, convention="inner"))]
fn partial_transpose(rho: Rows, d_a: usize, d_b: usize, convention: &str) -> PyResult<Rows> {
    let split = Split::new(d_a, d_b, self::convention(convention)?);
    let pt = criteria::partial_transpose(&to_matrix(&rho)?, split).map_err(py_err)?;
    Ok(to_rows(&pt))
}

/// Pass flag and smallest eigenvalue of the partial transpose.
#[pyfunction]
#[pyo3(signature = (rho, d_a, d_b, convention="inner", tol=DEFAULT_TOLERANCE))]
fn is_ppt(rho: Rows, d_a: usize, d_b: usize, convention: &str, tol: f64) -> PyResult<(bool, f64)> {
    let split = Split::new(d_a, d_b, self::convention(convention)?);
    criteria::is_ppt(&to_matrix(&rho)?, split, tol).map_err(py_err)
}

/// Pass flag and trace norm of the realigned matrix.
#[pyfunction]
#[pyo3(signature = (rho, d_a, d_b, convention="inner", tol=DEFAULT_TOLERANCE))]
fn cross_norm_pass(rho: Rows, d_a: usize, d_b: usize, convention: &str, tol: f64) -> PyResult<(bool, f64)> {
    let split = Split::new(d_a, d_b, self::convention(convention)?);
    criteria::cross_norm_pass(&to_matrix(&rho)?, split, tol).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (eigenvalues, rank_deficient=false))]
fn hs_density(eigenvalues: Vec<f64>, rank_deficient: bool) -> PyResult<f64> {
    let spec = SpectrumPoint::new(eigenvalues, rank_deficient).map_err(py_err)?;
    Ok(measures::hs_density(&spec))
}

/// Sampling weight of a spectrum under a named metric (hs, bures, kubo_mori, wigner_yanase).
#[pyfunction]
#[pyo3(signature = (eigenvalues, metric="hs", rank_deficient=false))]
fn weight(eigenvalues: Vec<f64>, metric: &str, rank_deficient: bool) -> PyResult<f64> {
    let name = MetricName::parse(metric).ok_or_else(|| PyValueError::new_err(format!("unknown metric {metric:?}")))?;
    let kind = MetricKind::resolve(name, &Default::default()).map_err(py_err)?;
    let spec = SpectrumPoint::new(eigenvalues, rank_deficient).map_err(py_err)?;
    measures::weight(&spec, &kind).map_err(py_err)
}

#[pyfunction]
fn exact_area_to_volume_ratio(d: usize) -> f64 {
    oracle_exact::exact_area_to_volume_ratio(d)
}

/// Plain Monte Carlo PPT probability of Ginibre states, as (estimate, standard error).
#[pyfunction]
#[pyo3(signature = (d_a, d_b, rank, n, seed=0))]
fn mc_ppt_probability(py: Python<'_>, d_a: usize, d_b: usize, rank: usize, n: u64, seed: u64) -> PyResult<(f64, f64)> {
    let est = py
        .detach(|| oracle_exact::mc_ppt_probability(d_a, d_b, rank, n, seed))
        .map_err(py_err)?;
    Ok((est.estimate, est.standard_error))
}

/// Applies the outlier rule to a cumulative series. Returns kept (interval, value)
/// pairs and the discarded intervals.
#[pyfunction]
#[pyo3(signature = (values, first_interval=1, window=5, threshold=0.5))]
#[allow(clippy::type_complexity)]
fn edit_series(
    values: Vec<Option<f64>>,
    first_interval: u64,
    window: usize,
    threshold: f64,
) -> PyResult<(Vec<(u64, Option<f64>)>, Vec<u64>)> {
    let points: Vec<SeriesPoint> = values
        .into_iter()
        .enumerate()
        .map(|(i, value)| SeriesPoint { interval: first_interval + i as u64, value, delta: None })
        .collect();
    let edited = estimator::edit_series(&points, EditRule { window, threshold }).map_err(py_err)?;
    Ok((edited.kept.iter().map(|p| (p.interval, p.value)).collect(), edited.discarded))
}

/// Runs a config given as TOML text and returns the summary as JSON.
#[pyfunction]
#[pyo3(signature = (config, output_dir=None, workers=None))]
fn run_toml(py: Python<'_>, config: &str, output_dir: Option<PathBuf>, workers: Option<usize>) -> PyResult<String> {
    let mut cfg = RunConfig::from_toml(config).map_err(py_err)?;
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let summary = py.detach(|| run::run(&cfg, RunOptions::default())).map_err(py_err)?;
    to_json(&summary)
}

/// Continues a run from its directory or checkpoint file.
#[pyfunction]
#[pyo3(signature = (path, workers=None))]
fn resume(py: Python<'_>, path: PathBuf, workers: Option<usize>) -> PyResult<String> {
    let summary = py.detach(|| run::resume(&path, workers, RunOptions::default())).map_err(py_err)?;
    to_json(&summary)
}

/// Runs the validation suite. Returns (passed, report JSON).
#[pyfunction]
#[pyo3(signature = (quick=true))]
fn run_validation(py: Python<'_>, quick: bool) -> PyResult<(bool, String)> {
    let mut opts = ValidationOptions::default();
    if quick {
        opts.area_volume_points = 200_000;
        opts.ginibre_draws = 20_000;
        opts.qmc_points = 20_000;
        opts.pt_instances = 50;
    }
    let report = py.detach(|| validate::validate(&opts));
    Ok((report.passed, to_json(&report)?))
}

#[pymodule]
pub fn ppt_omega_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFaureSequence>()?;
    m.add_function(wrap_pyfunction!(cube_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(cube_to_state, m)?)?;
    m.add_function(wrap_pyfunction!(partial_transpose, m)?)?;
    m.add_function(wrap_pyfunction!(is_ppt, m)?)?;
    m.add_function(wrap_pyfunction!(cross_norm_pass, m)?)?;
    m.add_function(wrap_pyfunction!(hs_density, m)?)?;
    m.add_function(wrap_pyfunction!(weight, m)?)?;
    m.add_function(wrap_pyfunction!(exact_area_to_volume_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mc_ppt_probability, m)?)?;
    m.add_function(wrap_pyfunction!(edit_series, m)?)?;
    m.add_function(wrap_pyfunction!(run_toml, m)?)?;
    m.add_function(wrap_pyfunction!(resume, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    m.add("DEFAULT_TOLERANCE", DEFAULT_TOLERANCE)?;
    Ok(())
}
