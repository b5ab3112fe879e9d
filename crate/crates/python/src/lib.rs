//! Python bindings: broken power law evaluation, fitting, decomposition,
//! metrics and whole-task evaluation.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bnsl::benchmark;
use bnsl::fitting::{self, FitConfig};
use bnsl::forms::{BnslParams, Break, FormKind, FunctionalForm};
use bnsl::metrics;
use bnsl::series::{DataSeries, Sample, SeriesPoint, Split};

fn to_py(e: bnsl::Error) -> PyErr {
    match e {
        bnsl::Error::NonFiniteLoss | bnsl::Error::AllCandidatesFailed(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn samples(x: &[f64], y: &[f64]) -> PyResult<Vec<Sample>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("x and y differ in length"));
    }
    Ok(x.iter().zip(y).map(|(&x, &y)| Sample::new(x, y)).collect())
}

fn config(seed: u64, config_json: Option<&str>) -> PyResult<FitConfig> {
    let cfg = match config_json {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => FitConfig::default(),
    };
    Ok(cfg.with_seed(seed))
}

/// Broken power law with `a`, `b`, `c0` and a list of `(c, d, f)` breaks.
#[pyclass(name = "BrokenPowerLaw", from_py_object)]
#[derive(Clone)]
struct PyBrokenPowerLaw {
    inner: BnslParams,
}

#[pymethods]
impl PyBrokenPowerLaw {
    #[new]
    #[pyo3(signature = (a, b, c0, breaks = Vec::new()))]
    fn new(a: f64, b: f64, c0: f64, breaks: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let breaks = breaks.into_iter().map(|(c, d, f)| Break::new(c, d, f)).collect();
        Ok(Self {
            inner: BnslParams::new(a, b, c0, breaks).map_err(to_py)?,
        })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn c0(&self) -> f64 {
        self.inner.c0
    }

    #[getter]
    fn breaks(&self) -> Vec<(f64, f64, f64)> {
        self.inner.breaks.iter().map(|b| (b.c, b.d, b.f)).collect()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        x.into_iter().map(|x| self.inner.eval(x).map_err(to_py)).collect()
    }

    /// Segments as `(coefficient, exponent, low, high)`; `high` is None for
    /// the last one.
    fn decompose(&self) -> Vec<(f64, f64, f64, Option<f64>)> {
        self.inner
            .decompose()
            .into_iter()
            .map(|s| (s.coefficient, s.exponent, s.domain_hint.low, s.domain_hint.high))
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        bnsl::json::to_string(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "BrokenPowerLaw(a={}, b={}, c0={}, breaks={:?})",
            self.inner.a,
            self.inner.b,
            self.inner.c0,
            self.breaks()
        )
    }
}

/// Outcome of a fit.
#[pyclass(name = "FitResult", skip_from_py_object)]
struct PyFitResult {
    inner: fitting::FitResult,
}

#[pymethods]
impl PyFitResult {
    #[getter]
    fn kind(&self) -> String {
        self.inner.form.kind().to_string()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.form.to_vec()
    }

    #[getter]
    fn train_loss(&self) -> f64 {
        self.inner.train_loss
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    /// The fitted broken power law, or None for the other forms.
    fn bnsl(&self) -> Option<PyBrokenPowerLaw> {
        match &self.inner.form {
            FunctionalForm::Bnsl(p) => Some(PyBrokenPowerLaw { inner: p.clone() }),
            _ => None,
        }
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        x.into_iter().map(|x| self.inner.form.eval(x).map_err(to_py)).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        bnsl::json::to_string(&self.inner).map_err(to_py)
    }
}

/// Fits `form` ("m1".."m4" or "bnsl") to the points.
#[pyfunction]
#[pyo3(signature = (x, y, form = "bnsl", breaks = 0, seed = 0, config_json = None))]
fn fit(
    x: Vec<f64>,
    y: Vec<f64>,
    form: &str,
    breaks: usize,
    seed: u64,
    config_json: Option<&str>,
) -> PyResult<PyFitResult> {
    let kind: FormKind = form.parse().map_err(to_py)?;
    let cfg = config(seed, config_json)?;
    let inner = fitting::fit(&samples(&x, &y)?, kind, breaks, &cfg).map_err(to_py)?;
    Ok(PyFitResult { inner })
}

/// Chooses the break count on the `holdout` largest-x points; returns the
/// count and the validation RMSLE of every candidate.
#[pyfunction]
#[pyo3(signature = (x, y, max_breaks, holdout, seed = 0))]
fn select_break_count(
    x: Vec<f64>,
    y: Vec<f64>,
    max_breaks: usize,
    holdout: usize,
    seed: u64,
) -> PyResult<(usize, Vec<Option<f64>>)> {
    let cfg = config(seed, None)?;
    let sel = fitting::select_break_count(&samples(&x, &y)?, max_breaks, holdout, &cfg).map_err(to_py)?;
    Ok((sel.best, sel.scores.iter().map(|s| s.rmsle).collect()))
}

fn pairs(y: &[f64], yhat: &[f64]) -> PyResult<Vec<metrics::PredictionPair>> {
    if y.len() != yhat.len() {
        return Err(PyValueError::new_err("y and yhat differ in length"));
    }
    Ok(metrics::pairs(y, yhat))
}

#[pyfunction]
fn rmsle(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    metrics::rmsle(&pairs(&y, &yhat)?).map_err(to_py)
}

#[pyfunction]
fn root_standard_log_error(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    metrics::root_standard_log_error(&pairs(&y, &yhat)?).map_err(to_py)
}

/// Fits every form on the train points and scores it on the test points;
/// returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (train_x, train_y, test_x, test_y, name = "task", max_breaks = benchmark::DEFAULT_MAX_BREAKS, seed = 0))]
fn evaluate_task(
    train_x: Vec<f64>,
    train_y: Vec<f64>,
    test_x: Vec<f64>,
    test_y: Vec<f64>,
    name: &str,
    max_breaks: usize,
    seed: u64,
) -> PyResult<String> {
    let point = |split| move |s: Sample| SeriesPoint { x: s.x, y: s.y, split };
    let mut points: Vec<SeriesPoint> = samples(&train_x, &train_y)?
        .into_iter()
        .map(point(Split::Train))
        .collect();
    points.extend(samples(&test_x, &test_y)?.into_iter().map(point(Split::Test)));
    let series = DataSeries::new(name, "other", points);
    let report = benchmark::evaluate_task(&series, &FormKind::ALL, &config(seed, None)?, max_breaks).map_err(to_py)?;
    bnsl::json::to_string(&report).map_err(to_py)
}

#[pymodule]
fn pybnsl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBrokenPowerLaw>()?;
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(select_break_count, m)?)?;
    m.add_function(wrap_pyfunction!(rmsle, m)?)?;
    m.add_function(wrap_pyfunction!(root_standard_log_error, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_task, m)?)?;
    Ok(())
}
