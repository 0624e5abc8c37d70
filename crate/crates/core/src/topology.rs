//! Benchmark network generators and the JSON network file format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{EdgeRates, GossipNetwork, NetworkError};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("{kind} needs n >= {min}, got {n}")]
    TooFewNodes {
        kind: &'static str,
        min: usize,
        n: usize,
    },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("malformed network document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate {kind} edge ({from},{to})")]
    DuplicateEdge {
        kind: &'static str,
        from: usize,
        to: usize,
    },
    #[error("invalid network: {0}")]
    Invalid(#[from] NetworkError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TopologyKind {
    StarCenterFed,
    StarLeafFed,
    Ring,
    Complete,
    Random,
    File,
}

impl TopologyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TopologyKind::StarCenterFed => "star-center-fed",
            TopologyKind::StarLeafFed => "star-leaf-fed",
            TopologyKind::Ring => "ring",
            TopologyKind::Complete => "complete",
            TopologyKind::Random => "random",
            TopologyKind::File => "file",
        }
    }
}

impl std::fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "star-center-fed" => TopologyKind::StarCenterFed,
            "star-leaf-fed" => TopologyKind::StarLeafFed,
            "ring" => TopologyKind::Ring,
            "complete" => TopologyKind::Complete,
            "random" => TopologyKind::Random,
            "file" => TopologyKind::File,
            other => return Err(format!("unknown topology {other:?}")),
        })
    }
}

/// Parameters of [`random_network`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub n: usize,
    pub edge_probability: f64,
    pub rate_low: f64,
    pub rate_high: f64,
    pub src_probability: f64,
    pub lambda_e: f64,
    pub seed: u64,
}

impl RandomParams {
    pub fn new(n: usize, edge_probability: f64, seed: u64) -> Self {
        Self {
            n,
            edge_probability,
            rate_low: 0.1,
            rate_high: 2.0,
            src_probability: 0.3,
            lambda_e: 1.0,
            seed,
        }
    }
}

/// Everything needed to build one network.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n: usize,
    /// Per-node gossip budget per rate type.
    pub lambda: f64,
    pub lambda_e: f64,
    pub random: Option<RandomParams>,
    pub path: Option<PathBuf>,
}

impl TopologySpec {
    pub fn named(kind: TopologyKind, n: usize, lambda: f64, lambda_e: f64) -> Self {
        Self {
            kind,
            n,
            lambda,
            lambda_e,
            random: None,
            path: None,
        }
    }

    pub fn build(&self) -> Result<GossipNetwork, TopologyError> {
        match self.kind {
            TopologyKind::StarCenterFed => star_center_fed(self.n, self.lambda, self.lambda_e),
            TopologyKind::StarLeafFed => star_leaf_fed(self.n, self.lambda, self.lambda_e),
            TopologyKind::Ring => ring(self.n, self.lambda, self.lambda_e),
            TopologyKind::Complete => complete(self.n, self.lambda, self.lambda_e),
            TopologyKind::Random => {
                let params = self.random.clone().ok_or_else(|| {
                    TopologyError::BadParameter("random topology needs random parameters".into())
                })?;
                random_network(&params)
            }
            TopologyKind::File => {
                let path = self.path.as_ref().ok_or_else(|| {
                    TopologyError::BadParameter("file topology needs a path".into())
                })?;
                read_network_file(path)
            }
        }
    }
}

fn check_budget(lambda: f64, lambda_e: f64) -> Result<(), TopologyError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(TopologyError::BadParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if !(lambda_e.is_finite() && lambda_e >= 0.0) {
        return Err(TopologyError::BadParameter(format!(
            "lambda_e must be non-negative, got {lambda_e}"
        )));
    }
    Ok(())
}

fn star_gossip(n: usize, lambda: f64, lambda_e: f64) -> Result<GossipNetwork, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes {
            kind: "star",
            min: 2,
            n,
        });
    }
    check_budget(lambda, lambda_e)?;
    let mut net = GossipNetwork::empty(n, lambda_e);
    let center = n;
    let spread = lambda / (n - 1) as f64;
    for leaf in 1..n {
        net.push_rates.insert((leaf, center), lambda);
        net.pull_rates.insert((leaf, center), lambda);
        net.push_rates.insert((center, leaf), spread);
        net.pull_rates.insert((center, leaf), spread);
    }
    Ok(net)
}

/// Star with center `n`; the source feeds only the center, at rate `lambda`.
///
/// Every leaf spends its whole budget on the center (`lambda` per rate
/// type), the center spreads its budget evenly (`lambda / (n - 1)`).
pub fn star_center_fed(n: usize, lambda: f64, lambda_e: f64) -> Result<GossipNetwork, TopologyError> {
    let mut net = star_gossip(n, lambda, lambda_e)?;
    net.source_rates[n - 1] = lambda;
    Ok(net)
}

/// Same gossip edges as [`star_center_fed`], but the source feeds leaf 1.
pub fn star_leaf_fed(n: usize, lambda: f64, lambda_e: f64) -> Result<GossipNetwork, TopologyError> {
    let mut net = star_gossip(n, lambda, lambda_e)?;
    net.source_rates[0] = lambda;
    Ok(net)
}

/// Ring `1 - 2 - ... - n - 1`; each node pushes and pulls to each ring
/// neighbour at `lambda / 2`, the source feeds every node at `lambda / n`.
pub fn ring(n: usize, lambda: f64, lambda_e: f64) -> Result<GossipNetwork, TopologyError> {
    if n < 3 {
        return Err(TopologyError::TooFewNodes {
            kind: "ring",
            min: 3,
            n,
        });
    }
    check_budget(lambda, lambda_e)?;
    let mut net = GossipNetwork::empty(n, lambda_e);
    net.source_rates = vec![lambda / n as f64; n];
    let half = lambda / 2.0;
    for i in 1..=n {
        let next = i % n + 1;
        let prev = if i == 1 { n } else { i - 1 };
        for j in [prev, next] {
            net.push_rates.insert((i, j), half);
            net.pull_rates.insert((i, j), half);
        }
    }
    Ok(net)
}

/// Fully connected network; per-edge rate `lambda / (n - 1)` for each rate
/// type and direction, source rate `lambda / n` per node.
pub fn complete(n: usize, lambda: f64, lambda_e: f64) -> Result<GossipNetwork, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooFewNodes {
            kind: "complete",
            min: 2,
            n,
        });
    }
    check_budget(lambda, lambda_e)?;
    let mut net = GossipNetwork::empty(n, lambda_e);
    net.source_rates = vec![lambda / n as f64; n];
    let rate = lambda / (n - 1) as f64;
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            net.push_rates.insert((i, j), rate);
            net.pull_rates.insert((i, j), rate);
        }
    }
    Ok(net)
}

fn check_probability(name: &str, p: f64) -> Result<(), TopologyError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(TopologyError::BadParameter(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

/// Seeded random network.
///
/// Ordered pairs are visited row-major; each gets a push edge and,
/// independently, a pull edge with probability `edge_probability`, rates
/// uniform in `[rate_low, rate_high]`. Each node is source-fed with
/// probability `src_probability` (rate drawn from the same range); if no
/// node was picked, one is chosen uniformly. The stream is ChaCha8 seeded
/// with `seed`.
pub fn random_network(params: &RandomParams) -> Result<GossipNetwork, TopologyError> {
    let RandomParams {
        n,
        edge_probability,
        rate_low,
        rate_high,
        src_probability,
        lambda_e,
        seed,
    } = *params;
    if n == 0 {
        return Err(TopologyError::TooFewNodes {
            kind: "random",
            min: 1,
            n,
        });
    }
    check_probability("edge_probability", edge_probability)?;
    check_probability("src_probability", src_probability)?;
    if !(rate_low.is_finite() && rate_high.is_finite() && 0.0 <= rate_low && rate_low <= rate_high) {
        return Err(TopologyError::BadParameter(format!(
            "rate range must satisfy 0 <= low <= high, got [{rate_low}, {rate_high}]"
        )));
    }
    if !(lambda_e.is_finite() && lambda_e >= 0.0) {
        return Err(TopologyError::BadParameter(format!(
            "lambda_e must be non-negative, got {lambda_e}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw_rate = |rng: &mut ChaCha8Rng| rng.random_range(rate_low..=rate_high);

    let mut net = GossipNetwork::empty(n, lambda_e);
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            if rng.random_bool(edge_probability) {
                let r = draw_rate(&mut rng);
                net.push_rates.insert((i, j), r);
            }
            if rng.random_bool(edge_probability) {
                let r = draw_rate(&mut rng);
                net.pull_rates.insert((i, j), r);
            }
        }
    }
    let mut fed = false;
    for i in 0..n {
        if rng.random_bool(src_probability) {
            net.source_rates[i] = draw_rate(&mut rng);
            fed = true;
        }
    }
    if !fed {
        let i = rng.random_range(0..n);
        net.source_rates[i] = draw_rate(&mut rng);
    }
    Ok(net)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: usize,
    to: usize,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDocument {
    n: usize,
    lambda_e: f64,
    source_rates: Vec<f64>,
    #[serde(default)]
    push_edges: Vec<EdgeRecord>,
    #[serde(default)]
    pull_edges: Vec<EdgeRecord>,
}

fn edges_to_records(map: &EdgeRates) -> Vec<EdgeRecord> {
    map.iter()
        .map(|(&(from, to), &rate)| EdgeRecord { from, to, rate })
        .collect()
}

fn records_to_edges(kind: &'static str, records: Vec<EdgeRecord>) -> Result<EdgeRates, TopologyError> {
    let mut map = EdgeRates::new();
    for EdgeRecord { from, to, rate } in records {
        if map.insert((from, to), rate).is_some() {
            return Err(TopologyError::DuplicateEdge { kind, from, to });
        }
    }
    Ok(map)
}

/// Serializes `net` as a JSON network document.
pub fn network_to_json(net: &GossipNetwork) -> String {
    let doc = NetworkDocument {
        n: net.n,
        lambda_e: net.lambda_e,
        source_rates: net.source_rates.clone(),
        push_edges: edges_to_records(&net.push_rates),
        pull_edges: edges_to_records(&net.pull_rates),
    };
    serde_json::to_string_pretty(&doc).expect("network documents always serialize")
}

/// Parses and validates a JSON network document.
pub fn network_from_json(text: &str) -> Result<GossipNetwork, TopologyError> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    let net = GossipNetwork {
        n: doc.n,
        lambda_e: doc.lambda_e,
        source_rates: doc.source_rates,
        push_rates: records_to_edges("push", doc.push_edges)?,
        pull_rates: records_to_edges("pull", doc.pull_edges)?,
    };
    net.validate()?;
    Ok(net)
}

pub fn read_network_file(path: impl AsRef<Path>) -> Result<GossipNetwork, TopologyError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    network_from_json(&text)
}

pub fn write_network_file(net: &GossipNetwork, path: impl AsRef<Path>) -> Result<(), TopologyError> {
    let path = path.as_ref();
    let mut text = network_to_json(net);
    text.push('\n');
    fs::write(path, text).map_err(|source| TopologyError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NodeSet;

    #[test]
    fn center_fed_star_rates() {
        let net = star_center_fed(3, 1.0, 1.0).unwrap();
        assert_eq!(net.source_rates, vec![0.0, 0.0, 1.0]);
        for leaf in [1, 2] {
            assert_eq!(net.push_rate(3, leaf), 0.5);
            assert_eq!(net.pull_rate(3, leaf), 0.5);
            assert_eq!(net.push_rate(leaf, 3), 1.0);
            assert_eq!(net.pull_rate(leaf, 3), 1.0);
        }
        assert_eq!(net.push_rate(1, 2), 0.0);
        net.validate().unwrap();
    }

    #[test]
    fn two_node_star_uses_full_budget_both_ways() {
        let net = star_center_fed(2, 1.5, 1.0).unwrap();
        assert_eq!(net.push_rate(2, 1), 1.5);
        assert_eq!(net.push_rate(1, 2), 1.5);
    }

    #[test]
    fn seven_node_stars_match_figure_layout() {
        let center = star_center_fed(7, 1.0, 1.0).unwrap();
        let leaf = star_leaf_fed(7, 1.0, 1.0).unwrap();
        assert_eq!(center.push_rates, leaf.push_rates);
        assert_eq!(center.pull_rates, leaf.pull_rates);
        assert_eq!(center.push_rates.len(), 12);
        assert_eq!(center.source_rates.iter().filter(|&&r| r > 0.0).count(), 1);
        assert_eq!(center.source_rate(7), 1.0);
        assert_eq!(leaf.source_rate(1), 1.0);
        assert_eq!(leaf.lambda_src_total(&NodeSet::singleton(7)).unwrap(), 0.0);
        assert_eq!(leaf.lambda_src_total(&NodeSet::singleton(1)).unwrap(), 1.0);
    }

    #[test]
    fn leaf_fed_star_leaf_neighbors_are_the_center() {
        for n in 4..9 {
            let net = star_leaf_fed(n, 1.0, 1.0).unwrap();
            assert_eq!(net.neighbors(&NodeSet::singleton(2)).unwrap(), NodeSet::singleton(n));
        }
    }

    #[test]
    fn ring_rates_and_degree() {
        let net = ring(4, 1.0, 1.0).unwrap();
        for i in 1..=4 {
            let out: Vec<_> = net.push_rates.keys().filter(|(a, _)| *a == i).collect();
            assert_eq!(out.len(), 2);
            let pulls = net.pull_rates.keys().filter(|(a, _)| *a == i).count();
            assert_eq!(pulls, 2);
        }
        assert!(net.push_rates.values().chain(net.pull_rates.values()).all(|&r| r == 0.5));
        assert!((net.total_source_rate() - 1.0).abs() < 1e-12);
        let merged = net.merged_rates();
        for i in 1..=4 {
            assert_eq!(merged.keys().filter(|(a, _)| *a == i).count(), 2);
        }
    }

    #[test]
    fn complete_budget_and_size() {
        let net = complete(2, 1.0, 1.0).unwrap();
        assert_eq!(net.push_rate(1, 2), 1.0);
        assert_eq!(net.pull_rate(2, 1), 1.0);
        let big = complete(100, 1.0, 1.0).unwrap();
        assert_eq!(big.push_rates.len(), 9900);
        let out: f64 = (2..=100).map(|j| big.push_rate(1, j)).sum();
        assert!((out - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generators_reject_small_n() {
        assert!(star_center_fed(1, 1.0, 1.0).is_err());
        assert!(ring(2, 1.0, 1.0).is_err());
        assert!(complete(1, 1.0, 1.0).is_err());
        assert!(complete(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn random_network_edges_and_determinism() {
        let empty = random_network(&RandomParams::new(6, 0.0, 3)).unwrap();
        assert!(empty.push_rates.is_empty() && empty.pull_rates.is_empty());
        assert!(empty.total_source_rate() > 0.0);

        let a = random_network(&RandomParams::new(6, 0.5, 11)).unwrap();
        let b = random_network(&RandomParams::new(6, 0.5, 11)).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert!(random_network(&RandomParams::new(6, 1.5, 1)).is_err());
        let mut bad = RandomParams::new(3, 0.5, 1);
        bad.rate_low = 2.0;
        bad.rate_high = 1.0;
        assert!(random_network(&bad).is_err());
    }

    #[test]
    fn missing_pull_edges_default_to_empty() {
        let text = r#"{"n": 2, "lambda_e": 1.0, "source_rates": [1.0, 0.0],
                       "push_edges": [{"from": 1, "to": 2, "rate": 0.5}]}"#;
        let net = network_from_json(text).unwrap();
        assert!(net.pull_rates.is_empty());
        assert_eq!(net.push_rate(1, 2), 0.5);
    }

    #[test]
    fn load_errors_name_the_problem() {
        let negative = r#"{"n": 2, "lambda_e": 1.0, "source_rates": [1.0, 0.0],
                           "pull_edges": [{"from": 2, "to": 1, "rate": -0.5}]}"#;
        let err = network_from_json(negative).unwrap_err().to_string();
        assert!(err.contains("pull edge (2,1)") && err.contains("negative"), "{err}");

        let unknown = r#"{"n": 1, "lambda_e": 1.0, "source_rates": [1.0], "extra": 3}"#;
        assert!(matches!(network_from_json(unknown), Err(TopologyError::Malformed(_))));

        let dup = r#"{"n": 2, "lambda_e": 1.0, "source_rates": [1.0, 0.0],
                      "push_edges": [{"from": 1, "to": 2, "rate": 1}, {"from": 1, "to": 2, "rate": 2}]}"#;
        assert!(matches!(network_from_json(dup), Err(TopologyError::DuplicateEdge { .. })));
    }

    #[test]
    fn star_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("star.json");
        let net = star_center_fed(3, 1.0, 1.0).unwrap();
        write_network_file(&net, &path).unwrap();
        assert_eq!(read_network_file(&path).unwrap(), net);
    }
}
