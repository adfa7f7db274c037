//! Python bindings for the fingerprinting pipeline: probe documents,
//! simulated campaigns, verdict fingerprints, selection, and clustering.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dpifp::analytics;
use dpifp::analyzer::{fingerprints_from_records, BlockpageDb};
use dpifp::gen;
use dpifp::netsim::zoo_default;
use dpifp::probe::{load_probe, save_probe, ProbeConfig, Protocol, ProtocolScope};
use dpifp::prober::{run_campaign, sim_target, write_jsonl, CampaignPlan, SimFactory};
use dpifp::selection::{self, OutcomeMatrix, SelectionParams};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_protocol(s: &str) -> PyResult<Protocol> {
    match s {
        "http" => Ok(Protocol::Http),
        "https" => Ok(Protocol::Https),
        other => Err(PyValueError::new_err(format!("unknown protocol {other:?}"))),
    }
}

/// One probe document: a full TCP step sequence with optional mutations.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Probe {
    inner: ProbeConfig,
}

#[pymethods]
impl Probe {
    #[staticmethod]
    fn from_yaml(text: &str) -> PyResult<Self> {
        Ok(Probe { inner: load_probe(text.as_bytes()).map_err(err)? })
    }

    fn to_yaml(&self) -> String {
        String::from_utf8_lossy(&save_probe(&self.inner)).into_owned()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id().to_string()
    }

    #[getter]
    fn protocol(&self) -> String {
        match self.inner.protocol {
            ProtocolScope::Http => "http".into(),
            ProtocolScope::Https => "https".into(),
            ProtocolScope::Both => "http/https".into(),
        }
    }

    fn __repr__(&self) -> String {
        format!("Probe(id={:?})", self.inner.id())
    }
}

/// The baseline five-step request sequence.
#[pyfunction]
fn baseline() -> Probe {
    Probe { inner: gen::baseline(ProtocolScope::Both) }
}

/// Enumerate the full probe grid for a protocol.
#[pyfunction]
fn generate(protocol: &str) -> PyResult<Vec<Probe>> {
    let set = gen::generate_all(parse_protocol(protocol)?);
    Ok(set.probes.into_iter().map(|inner| Probe { inner }).collect())
}

/// The builtin top-40 probe set for a protocol.
#[pyfunction]
fn builtin_top40(protocol: &str) -> PyResult<Vec<Probe>> {
    Ok(gen::builtin_top40(parse_protocol(protocol)?)
        .into_iter()
        .map(|inner| Probe { inner })
        .collect())
}

/// Ids of the builtin middlebox zoo profiles.
#[pyfunction]
fn zoo_ids() -> Vec<String> {
    zoo_default().into_iter().map(|p| p.id).collect()
}

/// The full zoo as a YAML document.
#[pyfunction]
fn zoo_yaml() -> PyResult<String> {
    serde_yaml::to_string(&zoo_default()).map_err(err)
}

/// Run probes against one simulated target behind a zoo profile; returns
/// measurement records as JSONL.
#[pyfunction]
#[pyo3(signature = (probes, profile, protocol="http", repetitions=1, seed=1))]
fn run_sim(
    probes: Vec<Probe>,
    profile: &str,
    protocol: &str,
    repetitions: u32,
    seed: u64,
) -> PyResult<String> {
    let profile = zoo_default()
        .into_iter()
        .find(|p| p.id == profile)
        .ok_or_else(|| PyValueError::new_err(format!("unknown zoo profile {profile:?}")))?;
    let target = sim_target(parse_protocol(protocol)?);
    let mut plan =
        CampaignPlan::new(vec![target], probes.into_iter().map(|p| p.inner).collect(), seed);
    plan.repetitions = repetitions;
    plan.validate().map_err(err)?;
    let mut factory = SimFactory { profiles: vec![profile], seed };
    let records = run_campaign(&plan, &mut factory);
    let mut out = Vec::new();
    write_jsonl(&records, &mut out).map_err(err)?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

/// Interpret measurement records into per-target fingerprints; returns a
/// fingerprint-set JSON document over the given probe order.
#[pyfunction]
fn fingerprints(records_jsonl: &str, probe_order: Vec<String>) -> PyResult<String> {
    let records = dpifp::prober::read_jsonl(records_jsonl).map_err(err)?;
    let db = BlockpageDb::zoo_default();
    let fps = fingerprints_from_records(&records, &db, &probe_order).map_err(err)?;
    let set = analytics::FingerprintSet::from_fingerprints(&fps).map_err(err)?;
    serde_json::to_string_pretty(&set).map_err(err)
}

/// Greedy entropy/phi probe selection over an outcome matrix CSV.
#[pyfunction]
#[pyo3(signature = (matrix_csv, theta=0.85, cutoff=0.10, max_probes=None))]
fn select_probes(
    matrix_csv: &str,
    theta: f64,
    cutoff: f64,
    max_probes: Option<usize>,
) -> PyResult<Vec<String>> {
    let matrix = OutcomeMatrix::from_csv(matrix_csv).map_err(err)?;
    let params =
        SelectionParams { phi_threshold: theta, inconclusive_cutoff: cutoff, max_probes };
    params.validate().map_err(err)?;
    Ok(selection::select(&matrix, &params))
}

/// Masked Hamming distance between two bit vectors (1/0/-1); returns
/// (raw, conclusive, normalized).
#[pyfunction]
fn masked_hamming(a: Vec<i8>, b: Vec<i8>) -> PyResult<(usize, usize, f64)> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("fingerprint lengths differ"));
    }
    let h = analytics::masked_hamming_bits(&a, &b);
    Ok((h.raw, h.conclusive, h.normalized))
}

/// Density-cluster a fingerprint-set JSON document; returns labels in
/// sorted target order (-1 is noise).
#[pyfunction]
fn cluster(set_json: &str, min_cluster_size: usize) -> PyResult<Vec<i64>> {
    let set: analytics::FingerprintSet = serde_json::from_str(set_json).map_err(err)?;
    Ok(analytics::cluster(&set, min_cluster_size).map_err(err)?.labels)
}

/// Adjusted Rand index between two labelings.
#[pyfunction]
fn adjusted_rand_index(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("labeling lengths differ"));
    }
    Ok(analytics::adjusted_rand_index(&a, &b))
}

#[pymodule]
fn dpifp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Probe>()?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_top40, m)?)?;
    m.add_function(wrap_pyfunction!(zoo_ids, m)?)?;
    m.add_function(wrap_pyfunction!(zoo_yaml, m)?)?;
    m.add_function(wrap_pyfunction!(run_sim, m)?)?;
    m.add_function(wrap_pyfunction!(fingerprints, m)?)?;
    m.add_function(wrap_pyfunction!(select_probes, m)?)?;
    m.add_function(wrap_pyfunction!(masked_hamming, m)?)?;
    m.add_function(wrap_pyfunction!(cluster, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    Ok(())
}
