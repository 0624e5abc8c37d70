//! Python bindings for `gossip_age`, built with maturin as `gossip_age_py`.
//!
//! Node sets are accepted as an int, any iterable of ints, or a string such
//! as `"{1,2}"`. Library errors surface as `ValueError`.

use std::collections::BTreeMap;

use gossip_age::solver::{self, StarVariant};
use gossip_age::topology::{self, RandomParams};
use gossip_age::{GossipNetwork, NodeSet, Protocol, ProtocolMode, SimConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn node_set(obj: &Bound<'_, PyAny>) -> PyResult<NodeSet> {
    if let Ok(s) = obj.cast::<PyString>() {
        return s.to_str()?.parse().map_err(value_error);
    }
    if let Ok(i) = obj.extract::<usize>() {
        return Ok(NodeSet::singleton(i));
    }
    obj.try_iter()?
        .map(|item| item?.extract::<usize>())
        .collect()
}

fn protocol_mode(protocol: &str, scale: f64) -> PyResult<ProtocolMode> {
    let protocol: Protocol = protocol.parse().map_err(value_error)?;
    ProtocolMode::new(protocol, scale).map_err(value_error)
}

fn star_variant(variant: &str) -> PyResult<StarVariant> {
    match variant {
        "center-fed" | "center_fed" => Ok(StarVariant::CenterFed),
        "leaf-fed" | "leaf_fed" => Ok(StarVariant::LeafFed),
        other => Err(value_error(format!(
            "unknown star variant {other:?}; expected \"center-fed\" or \"leaf-fed\""
        ))),
    }
}

fn edge_map(edges: Option<BTreeMap<(usize, usize), f64>>) -> BTreeMap<(usize, usize), f64> {
    edges.unwrap_or_default()
}

/// A gossip network. `push_edges[(i, j)]` is the rate at which `i` pushes
/// to `j`; `pull_edges[(i, j)]` the rate at which `i` pulls from `j`.
#[pyclass(name = "Network", module = "gossip_age_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: GossipNetwork,
}

fn wrap(inner: GossipNetwork) -> PyNetwork {
    PyNetwork { inner }
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (lambda_e, source_rates, push_edges=None, pull_edges=None))]
    fn new(
        lambda_e: f64,
        source_rates: Vec<f64>,
        push_edges: Option<BTreeMap<(usize, usize), f64>>,
        pull_edges: Option<BTreeMap<(usize, usize), f64>>,
    ) -> PyResult<Self> {
        let inner = GossipNetwork {
            n: source_rates.len(),
            lambda_e,
            source_rates,
            push_rates: edge_map(push_edges),
            pull_rates: edge_map(pull_edges),
        };
        inner.validate().map_err(value_error)?;
        Ok(wrap(inner))
    }

    #[staticmethod]
    #[pyo3(signature = (n, lam=1.0, lambda_e=1.0))]
    fn star_center_fed(n: usize, lam: f64, lambda_e: f64) -> PyResult<Self> {
        topology::star_center_fed(n, lam, lambda_e).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    #[pyo3(signature = (n, lam=1.0, lambda_e=1.0))]
    fn star_leaf_fed(n: usize, lam: f64, lambda_e: f64) -> PyResult<Self> {
        topology::star_leaf_fed(n, lam, lambda_e).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    #[pyo3(signature = (n, lam=1.0, lambda_e=1.0))]
    fn ring(n: usize, lam: f64, lambda_e: f64) -> PyResult<Self> {
        topology::ring(n, lam, lambda_e).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    #[pyo3(signature = (n, lam=1.0, lambda_e=1.0))]
    fn complete(n: usize, lam: f64, lambda_e: f64) -> PyResult<Self> {
        topology::complete(n, lam, lambda_e).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    #[pyo3(signature = (n, edge_probability, seed, rate_low=0.1, rate_high=2.0, src_probability=0.3, lambda_e=1.0))]
    fn random(
        n: usize,
        edge_probability: f64,
        seed: u64,
        rate_low: f64,
        rate_high: f64,
        src_probability: f64,
        lambda_e: f64,
    ) -> PyResult<Self> {
        let params = RandomParams {
            n,
            edge_probability,
            rate_low,
            rate_high,
            src_probability,
            lambda_e,
            seed,
        };
        topology::random_network(&params).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    fn from_file(path: std::path::PathBuf) -> PyResult<Self> {
        topology::read_network_file(path).map(wrap).map_err(value_error)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        topology::network_from_json(text).map(wrap).map_err(value_error)
    }

    fn to_file(&self, path: std::path::PathBuf) -> PyResult<()> {
        topology::write_network_file(&self.inner, path).map_err(value_error)
    }

    fn to_json(&self) -> String {
        topology::network_to_json(&self.inner)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn lambda_e(&self) -> f64 {
        self.inner.lambda_e
    }

    #[getter]
    fn source_rates(&self) -> Vec<f64> {
        self.inner.source_rates.clone()
    }

    #[getter]
    fn push_edges(&self) -> BTreeMap<(usize, usize), f64> {
        self.inner.push_rates.clone()
    }

    #[getter]
    fn pull_edges(&self) -> BTreeMap<(usize, usize), f64> {
        self.inner.pull_rates.clone()
    }

    /// Nodes a source update can eventually reach.
    fn reachable(&self) -> Vec<usize> {
        self.inner.reachable_from_source().iter().collect()
    }

    #[pyo3(signature = (protocol, scale=1.0))]
    fn restrict_protocol(&self, protocol: &str, scale: f64) -> PyResult<Self> {
        Ok(wrap(self.inner.restrict_protocol(protocol_mode(protocol, scale)?)))
    }

    fn superpose_to_push(&self) -> Self {
        wrap(self.inner.superpose_to_push())
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n={}, lambda_e={}, push_edges={}, pull_edges={})",
            self.inner.n,
            self.inner.lambda_e,
            self.inner.push_rates.len(),
            self.inner.pull_rates.len()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Exact average age of a node set; `inf` when no member is ever updated.
#[pyfunction]
fn solve_age(network: &PyNetwork, nodes: &Bound<'_, PyAny>) -> PyResult<f64> {
    solver::solve_age(&network.inner, &node_set(nodes)?).map_err(value_error)
}

/// Exact age of every node, in node order.
#[pyfunction]
fn solve_all_singletons(network: &PyNetwork) -> PyResult<Vec<f64>> {
    solver::solve_all_singletons(&network.inner)
        .map(|s| s.per_node)
        .map_err(value_error)
}

/// `(lower, upper)` around the age of a non-full set, built from the exact
/// ages of its one-node supersets.
#[pyfunction]
fn age_bounds(network: &PyNetwork, nodes: &Bound<'_, PyAny>) -> PyResult<(f64, f64)> {
    let set = node_set(nodes)?;
    let mut exact = solver::ExactSolver::new(&network.inner).map_err(value_error)?;
    for i in 1..=network.inner.n {
        if !set.contains(i) {
            exact.solve(&set.with(i)).map_err(value_error)?;
        }
    }
    let b = exact.bounds(&set, &exact.table()).map_err(value_error)?;
    Ok((b.lower, b.upper))
}

#[pyclass(name = "StarSolution", module = "gossip_age_py", frozen)]
struct PyStarSolution {
    inner: solver::StarSolution,
}

#[pymethods]
impl PyStarSolution {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    /// Age of the node the source feeds.
    #[getter]
    fn fed(&self) -> f64 {
        self.inner.fed
    }

    #[getter]
    fn center(&self) -> f64 {
        self.inner.center
    }

    #[getter]
    fn leaf(&self) -> f64 {
        self.inner.leaf
    }

    fn age_of_set(&self, nodes: &Bound<'_, PyAny>) -> PyResult<f64> {
        self.inner.age_of_set(&node_set(nodes)?).map_err(value_error)
    }

    fn __repr__(&self) -> String {
        format!(
            "StarSolution(n={}, fed={}, center={}, leaf={})",
            self.inner.n, self.inner.fed, self.inner.center, self.inner.leaf
        )
    }
}

/// Star ages from the symmetry-reduced recursion; `variant` is
/// `"center-fed"` or `"leaf-fed"`.
#[pyfunction]
#[pyo3(signature = (variant, n, protocol="pushpull", scale=1.0, lam=1.0, lambda_e=1.0))]
fn solve_star_reduced(
    variant: &str,
    n: usize,
    protocol: &str,
    scale: f64,
    lam: f64,
    lambda_e: f64,
) -> PyResult<PyStarSolution> {
    let mode = protocol_mode(protocol, scale)?;
    solver::solve_star_reduced(star_variant(variant)?, mode, n, lam, lambda_e)
        .map(|inner| PyStarSolution { inner })
        .map_err(value_error)
}

/// Monte Carlo estimate. Returns one dict per target with keys `target`
/// (sorted node list), `mean`, `std_error`, `diverged`, `per_replication`.
#[pyfunction]
#[pyo3(signature = (network, horizon, replications=5, seed=0, burn_in=None, targets=None))]
fn simulate<'py>(
    py: Python<'py>,
    network: &PyNetwork,
    horizon: f64,
    replications: usize,
    seed: u64,
    burn_in: Option<f64>,
    targets: Option<Vec<Bound<'py, PyAny>>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut config = SimConfig::new(horizon)
        .with_replications(replications)
        .with_seed(seed);
    if let Some(b) = burn_in {
        config = config.with_burn_in(b);
    }
    if let Some(targets) = targets {
        let sets = targets.iter().map(node_set).collect::<PyResult<Vec<_>>>()?;
        config = config.with_targets(sets);
    }
    let net = network.inner.clone();
    let est = py
        .detach(move || gossip_age::estimate(&net, &config))
        .map_err(value_error)?;
    est.targets
        .into_iter()
        .map(|t| {
            let d = PyDict::new(py);
            d.set_item("target", t.target.iter().collect::<Vec<_>>())?;
            d.set_item("mean", t.mean)?;
            d.set_item("std_error", t.std_error)?;
            d.set_item("diverged", t.diverged)?;
            d.set_item("per_replication", t.per_replication)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn gossip_age_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyStarSolution>()?;
    m.add_function(wrap_pyfunction!(solve_age, m)?)?;
    m.add_function(wrap_pyfunction!(solve_all_singletons, m)?)?;
    m.add_function(wrap_pyfunction!(age_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(solve_star_reduced, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("EXACT_NODE_CAP", solver::EXACT_NODE_CAP)?;
    Ok(())
}
