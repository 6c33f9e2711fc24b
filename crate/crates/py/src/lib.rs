//! Python bindings: traces, policy simulation, the offline optimum, the
//! bandit state and the experiment runs.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lae2_core::cache::{simulate_with, MetricsConfig};
use lae2_core::experiment::{self, ExperimentConfig};
use lae2_core::oracle::{self, BeladyPolicy};
use lae2_core::predictor::ScheduledPredictor;
use lae2_core::swucb::{self, BanditConfig};
use lae2_core::trace::{self, ContentId, SyntheticSpec};
use lae2_core::Error;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// An immutable request trace over contents `0..catalog_size`.
#[pyclass(name = "Trace", module = "lae2", frozen)]
struct PyTrace {
    inner: trace::Trace,
}

#[pymethods]
impl PyTrace {
    #[new]
    fn new(catalog_size: usize, ids: Vec<u64>) -> PyResult<Self> {
        let inner = trace::Trace::from_ids(catalog_size, ids).map_err(py_err)?;
        Ok(PyTrace { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrace {
            inner: trace::load_trace(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTrace {
            inner: trace::parse_trace(text).map_err(py_err)?,
        })
    }

    /// Zipf requests with periodic popularity shifts; `shift_period=None`
    /// gives a stationary trace.
    #[staticmethod]
    #[pyo3(signature = (catalog_size=500, length=100_000, zipf_exponent=0.8, shift_period=Some(5000), shift_fraction=0.1, seed=0))]
    fn synthetic(
        catalog_size: usize,
        length: usize,
        zipf_exponent: f64,
        shift_period: Option<usize>,
        shift_fraction: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let spec = SyntheticSpec {
            catalog_size,
            length,
            zipf_exponent,
            shift_period,
            shift_fraction,
            rng_seed: seed,
        };
        Ok(PyTrace {
            inner: trace::generate_synthetic(&spec).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        trace::write_trace(&self.inner, path).map_err(py_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_canonical_string()
    }

    fn ids(&self) -> Vec<u32> {
        self.inner.ids().map(|id| id.0).collect()
    }

    #[getter]
    fn catalog_size(&self) -> usize {
        self.inner.catalog_size()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Trace(catalog_size={}, len={})", self.inner.catalog_size(), self.inner.len())
    }
}

/// Outcome of one simulation.
#[pyclass(name = "SimulationResult", module = "lae2", frozen, get_all)]
struct PySimulationResult {
    policy: String,
    cache_size: usize,
    requests: usize,
    hits: usize,
    hit_rate: f64,
    /// `(t, evicted id)` pairs in order.
    evictions: Vec<(usize, u32)>,
    /// `(t, cumulative hit rate, windowed hit rate)` samples.
    samples: Vec<(usize, f64, f64)>,
}

#[pymethods]
impl PySimulationResult {
    fn __repr__(&self) -> String {
        format!(
            "SimulationResult(policy={:?}, cache_size={}, hit_rate={:.6})",
            self.policy, self.cache_size, self.hit_rate
        )
    }
}

fn param_map(params: Option<&Bound<'_, PyDict>>, prefix: &str) -> PyResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if let Some(d) = params {
        for (k, v) in d.iter() {
            let k: String = k.extract()?;
            let v = if v.is_none() { "none".to_string() } else { v.str()?.to_string() };
            map.insert(format!("{prefix}{k}"), v);
        }
    }
    Ok(map)
}

/// Simulates `policy` on `trace`. `params` holds policy options using the
/// config-file key names, e.g. `{"top_k": 5, "bandit.tau": 500}`.
#[pyfunction]
#[pyo3(signature = (trace, cache_size, policy="fifo", params=None, window=1000, stride=100))]
fn simulate(
    trace: &PyTrace,
    cache_size: usize,
    policy: &str,
    params: Option<&Bound<'_, PyDict>>,
    window: usize,
    stride: usize,
) -> PyResult<PySimulationResult> {
    let t = &trace.inner;
    let metrics = MetricsConfig { window, stride };
    let outcome = if policy == "belady" {
        if params.is_some_and(|p| !p.is_empty()) {
            return Err(PyValueError::new_err("belady takes no parameters"));
        }
        simulate_with(t, cache_size, &mut BeladyPolicy::new(t), metrics)
    } else {
        let mut map = param_map(params, "policy.0.")?;
        map.insert("policy.0.kind".into(), policy.into());
        let cfg = ExperimentConfig::from_map(map, None).map_err(py_err)?;
        let mut p = cfg.policies[0].build(cache_size, t.catalog_size()).map_err(py_err)?;
        simulate_with(t, cache_size, &mut p, metrics)
    }
    .map_err(py_err)?;
    Ok(PySimulationResult {
        policy: policy.to_string(),
        cache_size,
        requests: outcome.metrics.total_requests,
        hits: outcome.metrics.total_hits,
        hit_rate: outcome.hit_rate().map_err(py_err)?,
        evictions: outcome.evictions.iter().map(|e| (e.t, e.evicted.0)).collect(),
        samples: outcome
            .metrics
            .samples
            .iter()
            .map(|s| (s.t, s.cumulative_hit_rate, s.windowed_hit_rate))
            .collect(),
    })
}

#[pyfunction]
fn optimal_hit_rate(trace: &PyTrace, cache_size: usize) -> PyResult<f64> {
    oracle::optimal_hit_rate(&trace.inner, cache_size).map_err(py_err)
}

/// Fraction of optimal evictions inside the predictor's top-k, for
/// `k = 1..=cache_size`. `params` uses `predictor.*` config keys.
#[pyfunction]
#[pyo3(signature = (trace, cache_size, params=None))]
fn topk_containment(trace: &PyTrace, cache_size: usize, params: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<f64>> {
    let mut map = param_map(params, "")?;
    map.insert("policy.0.kind".into(), "fifo".into());
    let cfg = ExperimentConfig::from_map(map, None).map_err(py_err)?;
    let mut pred = ScheduledPredictor::new(&cfg.la_e2.predictor, trace.inner.catalog_size()).map_err(py_err)?;
    let hist = oracle::topk_containment(&trace.inner, cache_size, &mut pred).map_err(py_err)?;
    Ok(hist.fractions)
}

#[pyfunction]
fn zipf_pmf(alpha: f64, n: usize) -> Vec<f64> {
    trace::zipf_pmf(alpha, n)
}

/// Sliding-window UCB state.
#[pyclass(name = "BanditState", module = "lae2")]
struct PyBanditState {
    inner: swucb::BanditState,
}

#[pymethods]
impl PyBanditState {
    #[new]
    #[pyo3(signature = (gamma=0.99, tau=1000, b=-1.0, padding_cap=10.0))]
    fn new(gamma: f64, tau: usize, b: f64, padding_cap: f64) -> PyResult<Self> {
        let cfg = BanditConfig {
            gamma,
            tau,
            b,
            padding_cap,
        };
        Ok(PyBanditState {
            inner: swucb::BanditState::new(cfg).map_err(py_err)?,
        })
    }

    fn advance(&mut self, t: usize) -> PyResult<()> {
        if t < self.inner.now() {
            return Err(PyValueError::new_err("time cannot move backwards"));
        }
        self.inner.advance(t);
        Ok(())
    }

    fn record_request(&mut self, t: usize, id: u32) -> PyResult<()> {
        self.advance(t)?;
        self.inner.record_request(t, ContentId(id));
        Ok(())
    }

    fn record_eviction(&mut self, t: usize, id: u32) -> PyResult<()> {
        self.advance(t)?;
        self.inner.record_eviction(t, ContentId(id));
        Ok(())
    }

    #[getter]
    fn now(&self) -> usize {
        self.inner.now()
    }

    fn empirical_popularity(&self, id: u32) -> f64 {
        self.inner.empirical_popularity(ContentId(id))
    }

    fn eviction_count(&self, id: u32) -> usize {
        self.inner.eviction_count(ContentId(id))
    }

    fn ucb_score(&self, id: u32) -> f64 {
        self.inner.ucb_score(ContentId(id))
    }

    fn e2_evict(&self, candidates: Vec<u32>) -> PyResult<u32> {
        let c: Vec<ContentId> = candidates.into_iter().map(ContentId).collect();
        swucb::e2_evict(&self.inner, &c).map(|id| id.0).map_err(py_err)
    }
}

/// Runs one CLI verb from config text; returns the written files and the
/// number of failed cells.
#[pyfunction]
#[pyo3(signature = (verb, config, out_dir, threads=1, seed=None))]
fn run_experiment(
    verb: &str,
    config: &str,
    out_dir: PathBuf,
    threads: usize,
    seed: Option<u64>,
) -> PyResult<(Vec<PathBuf>, usize)> {
    let cfg = ExperimentConfig::parse_with_seed(config, seed).map_err(py_err)?;
    let threads = threads.max(1);
    let summary = match verb {
        "run-comparison" => experiment::write_comparison(&cfg, &out_dir, threads),
        "run-topk" => experiment::write_topk(&cfg, &out_dir, threads),
        "run-ablation" => experiment::write_ablation(&cfg, &out_dir, threads),
        "run-containment" => experiment::write_containment(&cfg, &out_dir, threads),
        "gen-trace" => experiment::write_generated_trace(&cfg, &out_dir),
        other => return Err(PyValueError::new_err(format!("unknown verb `{other}`"))),
    }
    .map_err(py_err)?;
    Ok((summary.files, summary.failed_cells))
}

#[pymodule]
fn lae2(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrace>()?;
    m.add_class::<PySimulationResult>()?;
    m.add_class::<PyBanditState>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_hit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(topk_containment, m)?)?;
    m.add_function(wrap_pyfunction!(zipf_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
