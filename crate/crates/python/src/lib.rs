//! Python bindings. Metrics are passed as JSON text in the same format the
//! CLI reads; results come back as plain dicts.

use escapekit::geodesic::{asymptotic_speed, integrate_geodesic, IntegratorOptions};
use escapekit::metric::spec::MetricSpec;
use escapekit::metric::{certify_escape, SampleSpec};
use escapekit::wave_general::{run_wave, WaveConfig};
use escapekit::wave_radial::{decay_classify, run_radial, RadialConfig};
use escapekit::MetricField;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::{json, Value};

type Result<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn metric(text: &str) -> Result<MetricField> {
    MetricSpec::from_json(text).and_then(|s| s.build()).map_err(err)
}

/// Certification report without the per-point table.
pub fn certify_json(metric_json: &str) -> Result<Value> {
    let m = metric(metric_json)?;
    let mut rep = certify_escape(&m, &SampleSpec::for_metric(&m)).map_err(err)?;
    rep.points.clear();
    serde_json::to_value(rep).map_err(err)
}

pub fn shoot_json(metric_json: &str, x0: &[f64], direction: &[f64], t_final: f64, dt: f64) -> Result<Value> {
    let m = metric(metric_json)?;
    let opts = IntegratorOptions {
        dt,
        ..IntegratorOptions::default()
    };
    let tr = integrate_geodesic(&m, x0, direction, t_final, &opts).map_err(err)?;
    Ok(json!({
        "t": tr.t,
        "r": tr.r,
        "h": tr.h,
        "speed_drift": tr.speed_drift,
        "final_radius": tr.r.last(),
        "asymptotic_speed": asymptotic_speed(&tr),
        "termination": format!("{:?}", tr.termination),
    }))
}

/// Radial run with bump data, energy series and decay fit on `window`.
pub fn wave_radial_json(m: f64, n: usize, t_final: f64, bump_power: i32, window: Option<[f64; 2]>) -> Result<Value> {
    let cfg = RadialConfig {
        m,
        r0: 1.0,
        a: 4.0,
        r0_support: 3.0,
        t_final,
        n,
        bump: None,
        bump_power,
        record_every: 10,
    };
    let run = run_radial(&cfg).map_err(err)?;
    let s = &run.series;
    let [lo, hi] = window.unwrap_or([t_final * 0.375, t_final]);
    let fit = decay_classify(&s.t, &s.e_local, s.e_total[0], lo, hi).map_err(err)?;
    Ok(json!({
        "t": s.t,
        "e_total": s.e_total,
        "e_local": s.e_local,
        "class": fit.class.name(),
        "fit": fit,
    }))
}

pub fn wave_energy_json(metric_json: &str, n_r: usize, n_theta: usize, t_final: f64) -> Result<Value> {
    let m = metric(metric_json)?;
    let run = run_wave(&m, &WaveConfig::new(1.0, 3.0, 4.0, t_final, n_r, n_theta)).map_err(err)?;
    let s = &run.series;
    Ok(json!({
        "t": s.t,
        "e_total": s.e_total,
        "e_local": s.e_local,
        "s_weighted": s.s_weighted,
        "max_relative_drift": s.max_relative_drift(),
    }))
}

fn to_py(py: Python<'_>, v: Result<Value>) -> PyResult<Bound<'_, PyAny>> {
    let v = v.map_err(PyValueError::new_err)?;
    py.import("json")?.call_method1("loads", (v.to_string(),))
}

/// Sampled certification of the escape condition.
#[pyfunction]
fn certify<'py>(py: Python<'py>, metric: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, certify_json(metric))
}

/// Unit-speed geodesic from `x0` along `direction`.
#[pyfunction]
#[pyo3(signature = (metric, x0, direction, t_final, dt = 1e-3))]
fn shoot<'py>(
    py: Python<'py>,
    metric: &str,
    x0: Vec<f64>,
    direction: Vec<f64>,
    t_final: f64,
    dt: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, shoot_json(metric, &x0, &direction, t_final, dt))
}

#[pyfunction]
#[pyo3(signature = (m, n = 2048, t_final = 24.0, bump_power = 3, window = None))]
fn wave_radial<'py>(
    py: Python<'py>,
    m: f64,
    n: usize,
    t_final: f64,
    bump_power: i32,
    window: Option<[f64; 2]>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, wave_radial_json(m, n, t_final, bump_power, window))
}

/// Polar wave run on a planar metric; energy series only.
#[pyfunction]
#[pyo3(signature = (metric, n_r = 256, n_theta = 32, t_final = 10.0))]
fn wave_energy<'py>(
    py: Python<'py>,
    metric: &str,
    n_r: usize,
    n_theta: usize,
    t_final: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, wave_energy_json(metric, n_r, n_theta, t_final))
}

#[pymodule(name = "escapekit")]
fn escapekit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(shoot, m)?)?;
    m.add_function(wrap_pyfunction!(wave_radial, m)?)?;
    m.add_function(wrap_pyfunction!(wave_energy, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
