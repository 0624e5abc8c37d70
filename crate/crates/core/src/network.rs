//! Gossip network model: rates, node sets and protocol restriction.
//!
//! Nodes are labelled `1..=n`. The source is not a node; its rates live in
//! [`GossipNetwork::lambda_e`] (self-update) and
//! [`GossipNetwork::source_rates`] (one entry per node).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Sparse per-edge rates keyed by the ordered pair `(i, j)`. A missing key
/// means rate 0.
pub type EdgeRates = BTreeMap<(usize, usize), f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("network must have at least one node (n = 0)")]
    Empty,
    #[error("source_rates has length {got}, expected n = {expected}")]
    SourceRatesLength { expected: usize, got: usize },
    #[error("negative rate {rate} on {what}")]
    NegativeRate { what: String, rate: f64 },
    #[error("non-finite rate {rate} on {what}")]
    NonFiniteRate { what: String, rate: f64 },
    #[error("self-loop {kind} edge ({node},{node})")]
    SelfLoop { kind: &'static str, node: usize },
    #[error("{kind} edge ({from},{to}) references a node outside 1..={n}")]
    NodeOutOfRange {
        kind: &'static str,
        from: usize,
        to: usize,
        n: usize,
    },
    #[error("node {node} is outside 1..={n}")]
    BadNode { node: usize, n: usize },
    #[error("node set is empty")]
    EmptySet,
    #[error("node set {set} is not contained in 1..={n}")]
    SetOutOfRange { set: NodeSet, n: usize },
    #[error("rate scale must lie in (0, 1], got {0}")]
    BadScale(f64),
}

/// A directed gossip network fed by a single source.
///
/// `push_rates[(i, j)]` is the rate at which `i` pushes its packet to `j`;
/// `pull_rates[(i, j)]` is the rate at which `i` pulls the packet held by
/// `j`. Either way the information moves along the graph, so the rate of
/// information flow from `i` to `j` is `push[(i,j)] + pull[(j,i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipNetwork {
    pub n: usize,
    pub lambda_e: f64,
    /// `source_rates[i - 1]` is the rate at which the source updates node `i`.
    pub source_rates: Vec<f64>,
    pub push_rates: EdgeRates,
    pub pull_rates: EdgeRates,
}

fn check_rate(rate: f64, what: impl FnOnce() -> String) -> Result<(), NetworkError> {
    if !rate.is_finite() {
        return Err(NetworkError::NonFiniteRate { what: what(), rate });
    }
    if rate < 0.0 {
        return Err(NetworkError::NegativeRate { what: what(), rate });
    }
    Ok(())
}

impl GossipNetwork {
    /// A network with `n` nodes, no source feeds and no gossip edges.
    pub fn empty(n: usize, lambda_e: f64) -> Self {
        Self {
            n,
            lambda_e,
            source_rates: vec![0.0; n],
            push_rates: EdgeRates::new(),
            pull_rates: EdgeRates::new(),
        }
    }

    /// Checks every structural invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.n == 0 {
            return Err(NetworkError::Empty);
        }
        check_rate(self.lambda_e, || "lambda_e".to_string())?;
        if self.source_rates.len() != self.n {
            return Err(NetworkError::SourceRatesLength {
                expected: self.n,
                got: self.source_rates.len(),
            });
        }
        for (idx, &rate) in self.source_rates.iter().enumerate() {
            check_rate(rate, || format!("source rate of node {}", idx + 1))?;
        }
        for (kind, map) in [("push", &self.push_rates), ("pull", &self.pull_rates)] {
            for (&(from, to), &rate) in map {
                if from == to {
                    return Err(NetworkError::SelfLoop { kind, node: from });
                }
                if !(1..=self.n).contains(&from) || !(1..=self.n).contains(&to) {
                    return Err(NetworkError::NodeOutOfRange {
                        kind,
                        from,
                        to,
                        n: self.n,
                    });
                }
                check_rate(rate, || format!("{kind} edge ({from},{to})"))?;
            }
        }
        Ok(())
    }

    pub fn push_rate(&self, from: usize, to: usize) -> f64 {
        self.push_rates.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn pull_rate(&self, puller: usize, target: usize) -> f64 {
        self.pull_rates.get(&(puller, target)).copied().unwrap_or(0.0)
    }

    pub fn source_rate(&self, node: usize) -> f64 {
        self.source_rates[node - 1]
    }

    /// Total source injection rate `sum_i lambda_0i`.
    pub fn total_source_rate(&self) -> f64 {
        self.source_rates.iter().sum()
    }

    /// The merged transfer rate for every ordered pair with an edge:
    /// `push[(i,j)] + pull[(j,i)]`, i.e. the rate at which `j` adopts `i`'s
    /// packet.
    pub fn merged_rates(&self) -> EdgeRates {
        let mut merged = self.push_rates.clone();
        for (&(puller, target), &rate) in &self.pull_rates {
            *merged.entry((target, puller)).or_insert(0.0) += rate;
        }
        merged
    }

    fn check_node(&self, node: usize) -> Result<(), NetworkError> {
        if (1..=self.n).contains(&node) {
            Ok(())
        } else {
            Err(NetworkError::BadNode { node, n: self.n })
        }
    }

    fn check_query_set(&self, set: &NodeSet) -> Result<(), NetworkError> {
        if set.is_empty() {
            return Err(NetworkError::EmptySet);
        }
        if set.max_node().is_some_and(|m| m > self.n) || set.contains(0) {
            return Err(NetworkError::SetOutOfRange {
                set: set.clone(),
                n: self.n,
            });
        }
        Ok(())
    }

    /// `lambda_0(S)`: total rate at which the source updates members of `set`.
    pub fn lambda_src_total(&self, set: &NodeSet) -> Result<f64, NetworkError> {
        self.check_query_set(set)?;
        Ok(set.iter().map(|i| self.source_rate(i)).sum())
    }

    /// `lambda_i^pull(S)`: total rate at which members of `set` pull from
    /// `node`; zero when `node` is itself in `set`.
    pub fn lambda_pull_into(&self, node: usize, set: &NodeSet) -> Result<f64, NetworkError> {
        self.check_node(node)?;
        self.check_query_set(set)?;
        if set.contains(node) {
            return Ok(0.0);
        }
        Ok(set.iter().map(|j| self.pull_rate(j, node)).sum())
    }

    /// `lambda_i^push(S)`: total rate at which `node` pushes into `set`;
    /// zero when `node` is itself in `set`.
    pub fn lambda_push_into(&self, node: usize, set: &NodeSet) -> Result<f64, NetworkError> {
        self.check_node(node)?;
        self.check_query_set(set)?;
        if set.contains(node) {
            return Ok(0.0);
        }
        Ok(set.iter().map(|j| self.push_rate(node, j)).sum())
    }

    /// `N(S)`: nodes outside `set` from which information reaches `set` at a
    /// positive rate.
    pub fn neighbors(&self, set: &NodeSet) -> Result<NodeSet, NetworkError> {
        self.check_query_set(set)?;
        let mut out = NodeSet::new();
        let mut candidates: Vec<usize> = Vec::new();
        for &(from, to) in self.push_rates.keys() {
            if set.contains(to) && !set.contains(from) {
                candidates.push(from);
            }
        }
        for &(puller, target) in self.pull_rates.keys() {
            if set.contains(puller) && !set.contains(target) {
                candidates.push(target);
            }
        }
        for i in candidates {
            if out.contains(i) {
                continue;
            }
            if self.lambda_pull_into(i, set)? + self.lambda_push_into(i, set)? > 0.0 {
                out.insert(i);
            }
        }
        Ok(out)
    }

    /// Keeps only the gossip mechanisms enabled by `mode` and multiplies the
    /// surviving gossip rates by its scale. Source rates are untouched.
    pub fn restrict_protocol(&self, mode: ProtocolMode) -> GossipNetwork {
        let scaled = |map: &EdgeRates| -> EdgeRates {
            map.iter().map(|(&k, &r)| (k, r * mode.scale())).collect()
        };
        let protocol = mode.protocol();
        GossipNetwork {
            n: self.n,
            lambda_e: self.lambda_e,
            source_rates: self.source_rates.clone(),
            push_rates: if protocol.uses_push() {
                scaled(&self.push_rates)
            } else {
                EdgeRates::new()
            },
            pull_rates: if protocol.uses_pull() {
                scaled(&self.pull_rates)
            } else {
                EdgeRates::new()
            },
        }
    }

    /// The push-only network whose edge `(i, j)` carries the merged rate
    /// `push[(i,j)] + pull[(j,i)]`. Its version-age process is identical to
    /// that of `self`.
    pub fn superpose_to_push(&self) -> GossipNetwork {
        GossipNetwork {
            n: self.n,
            lambda_e: self.lambda_e,
            source_rates: self.source_rates.clone(),
            push_rates: self.merged_rates(),
            pull_rates: EdgeRates::new(),
        }
    }

    /// Nodes that can eventually receive a source update, following merged
    /// edges of positive rate from every source-fed node.
    pub fn reachable_from_source(&self) -> NodeSet {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n + 1];
        for (&(from, to), &rate) in &self.merged_rates() {
            if rate > 0.0 {
                adj[from].push(to);
            }
        }
        let mut seen = NodeSet::new();
        let mut stack: Vec<usize> = (1..=self.n)
            .filter(|&i| self.source_rate(i) > 0.0)
            .collect();
        for &i in &stack {
            seen.insert(i);
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen.contains(j) {
                    seen.insert(j);
                    stack.push(j);
                }
            }
        }
        seen
    }
}

/// A set of node labels (all `>= 1`), stored as a growable bit vector.
///
/// Bit `i - 1` represents node `i`. Trailing zero words are trimmed so that
/// equal sets compare and hash equal.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet {
    words: Vec<u64>,
}

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        (1..=n).collect()
    }

    pub fn singleton(node: usize) -> Self {
        let mut s = Self::new();
        s.insert(node);
        s
    }

    /// Builds a set from a mask over nodes `1..=64` (bit 0 is node 1).
    pub fn from_mask(mask: u64) -> Self {
        let mut s = Self { words: vec![mask] };
        s.trim();
        s
    }

    /// The bit mask of this set when every member is `<= 64`.
    pub fn to_mask(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    pub fn insert(&mut self, node: usize) {
        assert!(node >= 1, "node labels start at 1");
        let bit = node - 1;
        let (w, b) = (bit / 64, bit % 64);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1 << b;
    }

    pub fn remove(&mut self, node: usize) {
        if node == 0 {
            return;
        }
        let bit = node - 1;
        if let Some(word) = self.words.get_mut(bit / 64) {
            *word &= !(1 << (bit % 64));
        }
        self.trim();
    }

    pub fn contains(&self, node: usize) -> bool {
        if node == 0 {
            return false;
        }
        let bit = node - 1;
        self.words
            .get(bit / 64)
            .is_some_and(|w| w & (1 << (bit % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn max_node(&self) -> Option<usize> {
        let last = self.words.last()?;
        Some((self.words.len() - 1) * 64 + (64 - last.leading_zeros() as usize))
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + b + 1)
            })
        })
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        let len = self.words.len().max(other.words.len());
        let words = (0..len)
            .map(|k| self.words.get(k).copied().unwrap_or(0) | other.words.get(k).copied().unwrap_or(0))
            .collect();
        NodeSet { words }
    }

    pub fn with(&self, node: usize) -> NodeSet {
        let mut s = self.clone();
        s.insert(node);
        s
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(k, &w)| w & !other.words.get(k).copied().unwrap_or(0) == 0)
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & b == 0)
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = NodeSet::new();
        for i in iter {
            s.insert(i);
        }
        s
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid node set literal {0:?}: expected e.g. {{1,2,5}} or a single node")]
pub struct ParseNodeSetError(pub String);

impl FromStr for NodeSet {
    type Err = ParseNodeSetError;

    /// Accepts `{1,2,5}`, `{}` or a bare node label such as `3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseNodeSetError(s.to_string());
        let t = s.trim();
        let body = match t.strip_prefix('{') {
            Some(rest) => rest.strip_suffix('}').ok_or_else(err)?,
            None => t,
        };
        let mut set = NodeSet::new();
        for part in body.split(',') {
            let part = part.trim();
            if part.is_empty() {
                if body.trim().is_empty() {
                    continue;
                }
                return Err(err());
            }
            let node: usize = part.parse().map_err(|_| err())?;
            if node == 0 {
                return Err(err());
            }
            set.insert(node);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Push,
    Pull,
    PushPull,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Push, Protocol::Pull, Protocol::PushPull];

    pub fn uses_push(self) -> bool {
        matches!(self, Protocol::Push | Protocol::PushPull)
    }

    pub fn uses_pull(self) -> bool {
        matches!(self, Protocol::Pull | Protocol::PushPull)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Push => "push",
            Protocol::Pull => "pull",
            Protocol::PushPull => "pushpull",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "push" | "push-only" => Ok(Protocol::Push),
            "pull" | "pull-only" => Ok(Protocol::Pull),
            "pushpull" | "push-pull" => Ok(Protocol::PushPull),
            other => Err(format!("unknown protocol {other:?} (push, pull, pushpull)")),
        }
    }
}

/// Which gossip mechanisms are active, and the factor applied to their rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolMode {
    protocol: Protocol,
    scale: f64,
}

impl ProtocolMode {
    pub fn new(protocol: Protocol, scale: f64) -> Result<Self, NetworkError> {
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(NetworkError::BadScale(scale));
        }
        Ok(Self { protocol, scale })
    }

    pub fn full(protocol: Protocol) -> Self {
        Self {
            protocol,
            scale: 1.0,
        }
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Default for ProtocolMode {
    fn default() -> Self {
        Self::full(Protocol::PushPull)
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn arb_network() -> impl Strategy<Value = GossipNetwork> {
        (1usize..=6).prop_flat_map(|n| {
            let pairs = n * n;
            (
                Just(n),
                prop::collection::vec(prop::option::of(0.0f64..3.0), n),
                prop::collection::vec(prop::option::of(0.0f64..3.0), pairs),
                prop::collection::vec(prop::option::of(0.0f64..3.0), pairs),
            )
                .prop_map(|(n, src, push, pull)| {
                    let mut net = GossipNetwork::empty(n, 1.0);
                    net.source_rates = src.into_iter().map(|r| r.unwrap_or(0.0)).collect();
                    for (k, (p, q)) in push.into_iter().zip(pull).enumerate() {
                        let (i, j) = (k / n + 1, k % n + 1);
                        if i == j {
                            continue;
                        }
                        if let Some(r) = p {
                            net.push_rates.insert((i, j), r);
                        }
                        if let Some(r) = q {
                            net.pull_rates.insert((i, j), r);
                        }
                    }
                    net
                })
        })
    }

    fn arb_net_and_mask() -> impl Strategy<Value = (GossipNetwork, u64)> {
        arb_network().prop_flat_map(|net| {
            let full = (1u64 << net.n) - 1;
            (Just(net), 1..=full)
        })
    }

    proptest! {
        #[test]
        fn merged_rate_of_superposed_equals_push_plus_reversed_pull(net in arb_network()) {
            let sup = net.superpose_to_push();
            for i in 1..=net.n {
                for j in 1..=net.n {
                    if i == j { continue; }
                    let want = net.push_rate(i, j) + net.pull_rate(j, i);
                    prop_assert!((sup.push_rate(i, j) - want).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn inbound_rate_positive_iff_neighbor((net, mask) in arb_net_and_mask()) {
            let s = NodeSet::from_mask(mask);
            let nb = net.neighbors(&s).unwrap();
            for i in (1..=net.n).filter(|&i| !s.contains(i)) {
                let w = net.lambda_pull_into(i, &s).unwrap() + net.lambda_push_into(i, &s).unwrap();
                prop_assert_eq!(w > 0.0, nb.contains(i));
            }
            prop_assert!(nb.is_disjoint(&s));
        }

        #[test]
        fn restrict_protocol_is_idempotent(net in arb_network(), p in 0usize..3) {
            let mode = ProtocolMode::full(Protocol::ALL[p]);
            let once = net.restrict_protocol(mode);
            prop_assert_eq!(once.restrict_protocol(mode), once);
        }

        #[test]
        fn source_total_is_additive((net, mask) in arb_net_and_mask(), split in any::<u64>()) {
            let a = mask & split;
            let b = mask & !split;
            prop_assume!(a != 0 && b != 0);
            let whole = net.lambda_src_total(&NodeSet::from_mask(mask)).unwrap();
            let parts = net.lambda_src_total(&NodeSet::from_mask(a)).unwrap()
                + net.lambda_src_total(&NodeSet::from_mask(b)).unwrap();
            prop_assert!((whole - parts).abs() <= 1e-12);
        }
    }
}
