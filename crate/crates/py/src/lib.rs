//! Python bindings. Results that have a JSON form elsewhere in the tool are
//! returned as JSON strings with the same `"schema": 1` layout.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde_json::json;

use chorstrand::abs;
use chorstrand::chor::{check_static_assumptions, parse_choreography, Choreography};
use chorstrand::crypto::{self, Bounds, Protocol};
use chorstrand::faithful::{check_faithfulness, AbstractionMap};
use chorstrand::lts;
use chorstrand::strand::bundle_to_json;

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn chor(src: &str) -> PyResult<Choreography> {
    parse_choreography(src).map_err(err)
}

fn proto(src: &str) -> PyResult<Protocol> {
    Protocol::parse(src).map_err(err)
}

fn bounds(max_instances: usize, adv_steps: usize, deliver_once: bool) -> PyResult<Bounds> {
    if max_instances == 0 {
        return Err(err("max_instances must be positive"));
    }
    Ok(Bounds::new(max_instances, adv_steps).deliver_once(deliver_once))
}

/// Static-assumption violations of a choreography; empty when it is well formed.
#[pyfunction]
fn check(source: &str) -> PyResult<Vec<String>> {
    Ok(check_static_assumptions(&chor(source)?)
        .iter()
        .map(|v| v.to_string())
        .collect())
}

/// Every interaction trace, each label rendered as `a->b:op<payload>`.
#[pyfunction]
fn traces(source: &str) -> PyResult<Vec<Vec<String>>> {
    let c = chor(source)?;
    Ok(lts::traces(&c)
        .iter()
        .map(|t| t.iter().map(|m| m.to_string()).collect())
        .collect())
}

/// The abstract bundles, one JSON document each.
#[pyfunction]
fn abs_bundles(source: &str) -> PyResult<Vec<String>> {
    let envs = abs::abs(&chor(source)?).map_err(err)?;
    Ok(envs
        .iter()
        .map(|e| bundle_to_json(&e.bundle).to_string())
        .collect())
}

#[pyfunction]
#[pyo3(signature = (source, depth_bound = 16))]
fn check_theorem1(source: &str, depth_bound: usize) -> PyResult<bool> {
    Ok(abs::check_theorem1(&chor(source)?, depth_bound).holds())
}

/// Whether `goal` follows from `known`, terms written in the protocol's
/// syntax and resolved against its declarations.
#[pyfunction]
fn derivable(protocol: &str, known: Vec<String>, goal: &str) -> PyResult<bool> {
    let p = proto(protocol)?;
    let known = known
        .iter()
        .map(|k| p.term(k).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(crypto::derivable(&known, &p.term(goal).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (protocol, max_instances = 1, adv_steps = 0, deliver_once = true))]
fn enumerate(
    protocol: &str,
    max_instances: usize,
    adv_steps: usize,
    deliver_once: bool,
) -> PyResult<String> {
    let p = proto(protocol)?;
    let en = crypto::enumerate_bundles(&p, bounds(max_instances, adv_steps, deliver_once)?);
    let bundles: Vec<_> = en
        .bundles
        .iter()
        .map(|x| json!({ "adversary_steps": x.adversary_steps(), "bundle": bundle_to_json(&x.bundle) }))
        .collect();
    Ok(json!({ "schema": 1, "stats": en.stats, "bundles": bundles }).to_string())
}

/// The faithfulness report as JSON.
#[pyfunction]
#[pyo3(signature = (protocol, choreography, amap, max_instances = 1, adv_steps = 0, deliver_once = true, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn faithful(
    py: Python<'_>,
    protocol: &str,
    choreography: &str,
    amap: &str,
    max_instances: usize,
    adv_steps: usize,
    deliver_once: bool,
    jobs: usize,
) -> PyResult<String> {
    let p = proto(protocol)?;
    let c = chor(choreography)?;
    let a = AbstractionMap::parse(amap, &p.symbols).map_err(err)?;
    let b = bounds(max_instances, adv_steps, deliver_once)?;
    let r = py
        .detach(|| check_faithfulness(&p, &c, &a, b, jobs))
        .map_err(err)?;
    serde_json::to_string(&r).map_err(err)
}

#[pymodule(name = "chorstrand")]
fn chorstrand_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(traces, m)?)?;
    m.add_function(wrap_pyfunction!(abs_bundles, m)?)?;
    m.add_function(wrap_pyfunction!(check_theorem1, m)?)?;
    m.add_function(wrap_pyfunction!(derivable, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(faithful, m)?)?;
    Ok(())
}
