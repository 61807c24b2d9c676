//! Python bindings. Experiment results cross the boundary as JSON text.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use intermittency::applications::{
    run_asclt, run_empirical_measure, run_kde, run_periodogram, run_shadowing, AscltConfig, EmpiricalConfig,
    KdeConfig, PeriodogramConfig, ShadowingConfig,
};
use intermittency::concentration::{run_battery, BatteryConfig, BatteryContext};
use intermittency::measure::{covariance_series, green_kubo_sigma2};
use intermittency::observables::ScalarFn;
use intermittency::wasserstein::{self, EmpiricalDistribution, GaussianTarget, Support};
use intermittency::{Branch, GridScheme};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(value_err),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(value_err)
}

/// The intermittent map with parameter `alpha`.
#[pyclass(name = "MapModel", frozen)]
struct PyMapModel {
    inner: intermittency::MapModel,
}

#[pymethods]
impl PyMapModel {
    #[new]
    fn new(alpha: f64) -> PyResult<Self> {
        Ok(Self {
            inner: intermittency::MapModel::new(alpha).map_err(value_err)?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn eval(&self, x: f64) -> PyResult<f64> {
        self.inner.eval(x).map_err(value_err)
    }

    fn derivative(&self, x: f64) -> PyResult<f64> {
        self.inner.derivative(x).map_err(value_err)
    }

    /// `branch` is "left" or "right".
    fn inverse(&self, y: f64, branch: &str) -> PyResult<f64> {
        let b = match branch {
            "left" => Branch::Left,
            "right" => Branch::Right,
            other => return Err(value_err(format!("unknown branch '{other}'"))),
        };
        self.inner.inverse(y, b).map_err(value_err)
    }

    fn orbit(&self, x0: f64, n: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.orbit(x0, n).map_err(value_err)?.as_slice().to_vec())
    }

    /// Partition points `x_0 = 1, x_1 = 1/2, ...` up to `depth`.
    fn partition_points(&self, depth: usize) -> PyResult<Vec<f64>> {
        Ok(self.inner.partition(depth).map_err(value_err)?.points().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("MapModel(alpha={})", self.inner.alpha())
    }
}

/// Ulam discretization of the invariant measure and transfer operator.
#[pyclass(name = "InvariantMeasure", frozen)]
struct PyInvariantMeasure {
    model: intermittency::MapModel,
    measure: intermittency::UlamMeasure,
    op: intermittency::UlamOperator,
}

#[pymethods]
impl PyInvariantMeasure {
    #[new]
    #[pyo3(signature = (alpha, cells = 4096, scheme = "markov_refined"))]
    fn new(py: Python<'_>, alpha: f64, cells: usize, scheme: &str) -> PyResult<Self> {
        let scheme: GridScheme = scheme.parse().map_err(value_err)?;
        let model = intermittency::MapModel::new(alpha).map_err(value_err)?;
        let (measure, op) = py
            .detach(|| intermittency::build_ulam(&model, cells, scheme))
            .map_err(value_err)?;
        Ok(Self { model, measure, op })
    }

    #[getter]
    fn cells(&self) -> usize {
        self.measure.cells()
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.op.residual()
    }

    fn boundaries(&self) -> Vec<f64> {
        self.measure.grid().boundaries().to_vec()
    }

    fn masses(&self) -> Vec<f64> {
        self.measure.masses().to_vec()
    }

    fn density(&self) -> Vec<f64> {
        self.measure.density().to_vec()
    }

    fn cdf(&self, x: f64) -> f64 {
        self.measure.cdf(x)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.measure.quantile(p)
    }

    fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        self.measure.sample_mu(count, seed)
    }

    /// Mean and variance of `x` under the measure.
    fn identity_moments(&self) -> (f64, f64) {
        self.measure.identity_moments()
    }

    /// Autocovariances of the centered identity for lags `0..=lags`.
    fn covariances(&self, lags: usize) -> PyResult<Vec<f64>> {
        let v = ScalarFn::identity().centered(&self.measure).project(self.measure.grid());
        Ok(covariance_series(&self.op, &self.measure, &v, &v, lags).map_err(value_err)?.values)
    }

    /// Green-Kubo variance of the centered identity, as JSON.
    fn green_kubo(&self, lags: usize) -> PyResult<String> {
        let v = ScalarFn::identity().centered(&self.measure).project(self.measure.grid());
        let s = covariance_series(&self.op, &self.measure, &v, &v, lags).map_err(value_err)?;
        to_json(&green_kubo_sigma2(&s).map_err(value_err)?)
    }

    /// Runs one application experiment and returns its result as JSON.
    /// `name` is one of asclt, kde, empirical_measure, periodogram,
    /// shadowing; `config` is an optional JSON object of overrides.
    #[pyo3(signature = (name, seed, config = None, covariance_lags = 1000))]
    fn run_experiment(
        &self,
        py: Python<'_>,
        name: &str,
        seed: u64,
        config: Option<&str>,
        covariance_lags: usize,
    ) -> PyResult<String> {
        let (model, m, op) = (&self.model, &self.measure, &self.op);
        let v = ScalarFn::identity().centered(m);
        let series = || {
            let g = v.project(m.grid());
            covariance_series(op, m, &g, &g, covariance_lags)
        };
        let result = match name {
            "asclt" => {
                let c: AscltConfig = parse_config(config)?;
                py.detach(|| {
                    let s2 = green_kubo_sigma2(&series()?)?.sigma2;
                    run_asclt(model, m, &v, s2, &c, seed)
                })
            }
            "kde" => {
                let c: KdeConfig = parse_config(config)?;
                py.detach(|| run_kde(model, m, &c, seed))
            }
            "empirical_measure" => {
                let c: EmpiricalConfig = parse_config(config)?;
                py.detach(|| run_empirical_measure(model, m, &c, seed))
            }
            "periodogram" => {
                let c: PeriodogramConfig = parse_config(config)?;
                py.detach(|| run_periodogram(model, m, &v, &series()?, &c, seed))
            }
            "shadowing" => {
                let c: ShadowingConfig = parse_config(config)?;
                py.detach(|| run_shadowing(model, m, &c, seed))
            }
            other => return Err(value_err(format!("unknown experiment '{other}'"))),
        };
        to_json(&result.map_err(value_err)?)
    }

    /// Runs the concentration battery and returns the outcome as JSON.
    #[pyo3(signature = (n_grid, trials, seed, config = None))]
    fn run_battery(
        &self,
        py: Python<'_>,
        n_grid: Vec<usize>,
        trials: usize,
        seed: u64,
        config: Option<&str>,
    ) -> PyResult<String> {
        let c: BatteryConfig = parse_config(config)?;
        let outcome = py
            .detach(|| {
                let ctx = BatteryContext::new(&self.model, &self.measure, &self.op, c)?;
                run_battery(&ctx, &n_grid, trials, seed)
            })
            .map_err(value_err)?;
        to_json(&outcome)
    }
}

fn distribution(locations: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<EmpiricalDistribution> {
    match weights {
        None => EmpiricalDistribution::uniform(&locations, Support::RealLine),
        Some(w) => {
            if w.len() != locations.len() {
                return Err(value_err("locations and weights differ in length"));
            }
            EmpiricalDistribution::new(locations.into_iter().zip(w).collect(), Support::RealLine)
        }
    }
    .map_err(value_err)
}

/// Kantorovich distance between two weighted point sets on the line.
/// Missing weights mean equal weights.
#[pyfunction]
#[pyo3(signature = (a, b, a_weights = None, b_weights = None))]
fn w1_distance(a: Vec<f64>, b: Vec<f64>, a_weights: Option<Vec<f64>>, b_weights: Option<Vec<f64>>) -> PyResult<f64> {
    Ok(wasserstein::w1_distance(&distribution(a, a_weights)?, &distribution(b, b_weights)?))
}

/// Kantorovich distance from a weighted point set to `N(0, variance)`.
#[pyfunction]
#[pyo3(signature = (a, variance, weights = None))]
fn w1_to_gaussian(a: Vec<f64>, variance: f64, weights: Option<Vec<f64>>) -> PyResult<f64> {
    let g = GaussianTarget::centered(variance).map_err(value_err)?;
    wasserstein::w1_to_gaussian(&distribution(a, weights)?, &g).map_err(value_err)
}

/// Upper end of the parameter range covered by the variance inequality.
#[pyfunction]
fn proven_alpha_limit() -> f64 {
    intermittency::concentration::proven_alpha_limit()
}

#[pymodule]
fn intermittency_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMapModel>()?;
    m.add_class::<PyInvariantMeasure>()?;
    m.add_function(wrap_pyfunction!(w1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(w1_to_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(proven_alpha_limit, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
