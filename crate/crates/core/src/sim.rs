//! Event-driven simulation of the version-age process.
//!
//! All event processes are Poisson with static rates, so the whole network
//! is a single Poisson clock of total rate `Λ` whose arrivals are labelled
//! by a categorical draw. State is kept as version counters: a source
//! self-update bumps `N_0` only, and each node's age is `N_0 - N_i`.
//! Time integrals are accumulated lazily, one counter at a time, so every
//! event costs `O(log m)` for the draw plus `O(1)` per tracked target that
//! contains the updated node.
//!
//! Replication `r` runs on `ChaCha8Rng::seed_from_u64(base_seed ^ r)`.
//! Replications run on the rayon pool and are aggregated in index order,
//! so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use thiserror::Error;

use crate::network::{GossipNetwork, NetworkError, NodeSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("total event rate is zero; nothing ever happens in this network")]
    StaticNetwork,
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    SourceSelf,
    /// The source sends its current version to this node.
    SourceToNode(usize),
    /// `to` adopts `from`'s packet if it is fresher (a push by `from` or a
    /// pull by `to`).
    Transfer { from: usize, to: usize },
}

/// Cumulative rate table over every process with a positive rate.
#[derive(Debug, Clone)]
pub struct EventTable {
    events: Vec<Event>,
    rates: Vec<f64>,
    cumulative: Vec<f64>,
    total: f64,
    waiting: Exp<f64>,
}

impl EventTable {
    pub fn new(net: &GossipNetwork) -> Result<Self, SimError> {
        net.validate()?;
        let mut events = Vec::new();
        let mut rates = Vec::new();
        if net.lambda_e > 0.0 {
            events.push(Event::SourceSelf);
            rates.push(net.lambda_e);
        }
        for (i, &r) in net.source_rates.iter().enumerate() {
            if r > 0.0 {
                events.push(Event::SourceToNode(i + 1));
                rates.push(r);
            }
        }
        for (&(from, to), &r) in &net.merged_rates() {
            if r > 0.0 {
                events.push(Event::Transfer { from, to });
                rates.push(r);
            }
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = rates
            .iter()
            .map(|r| {
                acc += r;
                acc
            })
            .collect();
        if acc <= 0.0 {
            return Err(SimError::StaticNetwork);
        }
        Ok(Self {
            events,
            rates,
            cumulative,
            total: acc,
            waiting: Exp::new(acc).expect("positive rate"),
        })
    }

    pub fn total_rate(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `(event, rate)` pairs in table order.
    pub fn processes(&self) -> impl Iterator<Item = (Event, f64)> + '_ {
        self.events.iter().copied().zip(self.rates.iter().copied())
    }

    /// Waiting time to the next event and which process fired.
    pub fn next_event<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Event) {
        let dt = self.waiting.sample(rng);
        let x = rng.random::<f64>() * self.total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= x)
            .min(self.events.len() - 1);
        (dt, self.events[k])
    }
}

/// Running integral of a piecewise-constant counter restricted to
/// `[window_start, ∞)`.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    integral: f64,
    since: f64,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            integral: 0.0,
            since: 0.0,
        }
    }

    /// Adds `value * (now - since)` over the part of the interval inside the
    /// window, then restarts at `now`.
    fn absorb(&mut self, value: u64, now: f64, window_start: f64) {
        let from = self.since.max(window_start);
        if now > from {
            self.integral += value as f64 * (now - from);
        }
        self.since = now;
    }
}

#[derive(Debug, Clone)]
struct TrackedSet {
    members: Vec<usize>,
    /// `max_{i in S} N_i`.
    freshest: u64,
    acc: Accumulator,
}

/// Version counters of one simulated trajectory plus the integrals of the
/// tracked targets.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub clock: f64,
    source_version: u64,
    node_versions: Vec<u64>,
    window_start: f64,
    source_acc: Accumulator,
    tracked: Vec<TrackedSet>,
    /// `membership[i]` lists the tracked sets containing node `i`.
    membership: Vec<Vec<usize>>,
}

impl SimulationState {
    /// Everyone starts at version 0, i.e. age zero. Integrals only count
    /// time after `window_start`.
    pub fn new(n: usize, targets: &[NodeSet], window_start: f64) -> Self {
        let mut membership = vec![Vec::new(); n + 1];
        let tracked = targets
            .iter()
            .enumerate()
            .map(|(t, set)| {
                let members: Vec<usize> = set.iter().collect();
                for &i in &members {
                    membership[i].push(t);
                }
                TrackedSet {
                    members,
                    freshest: 0,
                    acc: Accumulator::new(),
                }
            })
            .collect();
        Self {
            clock: 0.0,
            source_version: 0,
            node_versions: vec![0; n + 1],
            window_start,
            source_acc: Accumulator::new(),
            tracked,
            membership,
        }
    }

    pub fn source_version(&self) -> u64 {
        self.source_version
    }

    pub fn node_version(&self, node: usize) -> u64 {
        self.node_versions[node]
    }

    /// `X_i = N_0 - N_i`.
    pub fn age(&self, node: usize) -> u64 {
        self.source_version - self.node_versions[node]
    }

    /// `X_S = min_{i in S} X_i`.
    pub fn set_age(&self, set: &NodeSet) -> u64 {
        set.iter().map(|i| self.age(i)).min().unwrap_or(0)
    }

    fn raise_node(&mut self, node: usize, version: u64) {
        if version <= self.node_versions[node] {
            return;
        }
        self.node_versions[node] = version;
        let now = self.clock;
        for &t in &self.membership[node] {
            let target = &mut self.tracked[t];
            if version > target.freshest {
                target.acc.absorb(target.freshest, now, self.window_start);
                target.freshest = version;
            }
        }
    }

    /// Applies `event` at the current clock.
    pub fn apply_event(&mut self, event: Event) {
        match event {
            Event::SourceSelf => {
                self.source_acc
                    .absorb(self.source_version, self.clock, self.window_start);
                self.source_version += 1;
            }
            Event::SourceToNode(node) => self.raise_node(node, self.source_version),
            Event::Transfer { from, to } => self.raise_node(to, self.node_versions[from]),
        }
        debug_assert!(self.node_versions.iter().all(|&v| v <= self.source_version));
    }

    /// Closes all integrals at `end` and returns the time-average age of
    /// every tracked target over `[window_start, end]`.
    pub fn finish(mut self, end: f64) -> Vec<f64> {
        self.source_acc
            .absorb(self.source_version, end, self.window_start);
        let span = end - self.window_start;
        let source_integral = self.source_acc.integral;
        self.tracked
            .iter_mut()
            .map(|t| {
                t.acc.absorb(t.freshest, end, self.window_start);
                ((source_integral - t.acc.integral) / span).max(0.0)
            })
            .collect()
    }

    pub fn targets(&self) -> impl Iterator<Item = &[usize]> {
        self.tracked.iter().map(|t| t.members.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub burn_in: f64,
    pub replications: usize,
    pub base_seed: u64,
    /// Sets whose age is estimated; `None` tracks every singleton.
    pub targets: Option<Vec<NodeSet>>,
}

impl SimConfig {
    /// Burn-in defaults to a tenth of the horizon.
    pub fn new(horizon: f64) -> Self {
        Self {
            horizon,
            burn_in: horizon / 10.0,
            replications: 1,
            base_seed: 0,
            targets: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_replications(mut self, replications: usize) -> Self {
        self.replications = replications;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_targets(mut self, targets: Vec<NodeSet>) -> Self {
        self.targets = Some(targets);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon.is_finite() && self.burn_in.is_finite()) {
            return Err(SimError::BadConfig("horizon and burn-in must be finite".into()));
        }
        if !(0.0 <= self.burn_in && self.burn_in < self.horizon) {
            return Err(SimError::BadConfig(format!(
                "need 0 <= burn-in < horizon, got burn-in {} and horizon {}",
                self.burn_in, self.horizon
            )));
        }
        if self.replications == 0 {
            return Err(SimError::BadConfig("need at least one replication".into()));
        }
        Ok(())
    }

    pub fn replication_seed(&self, replication: usize) -> u64 {
        self.base_seed ^ replication as u64
    }

    fn resolved_targets(&self, net: &GossipNetwork) -> Result<Vec<NodeSet>, SimError> {
        let targets = match &self.targets {
            Some(t) => t.clone(),
            None => (1..=net.n).map(NodeSet::singleton).collect(),
        };
        for t in &targets {
            if t.is_empty() {
                return Err(NetworkError::EmptySet.into());
            }
            if t.max_node().is_some_and(|m| m > net.n) {
                return Err(NetworkError::SetOutOfRange { set: t.clone(), n: net.n }.into());
            }
        }
        Ok(targets)
    }
}

/// One replication's time-average age per target, in target order.
pub fn run_replication(
    net: &GossipNetwork,
    config: &SimConfig,
    replication: usize,
) -> Result<Vec<f64>, SimError> {
    config.validate()?;
    let table = EventTable::new(net)?;
    let targets = config.resolved_targets(net)?;
    Ok(replicate(&table, net.n, &targets, config, replication))
}

fn replicate(
    table: &EventTable,
    n: usize,
    targets: &[NodeSet],
    config: &SimConfig,
    replication: usize,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.replication_seed(replication));
    let mut state = SimulationState::new(n, targets, config.burn_in);
    loop {
        let (dt, event) = table.next_event(&mut rng);
        let t = state.clock + dt;
        if t > config.horizon {
            break;
        }
        state.clock = t;
        state.apply_event(event);
    }
    state.finish(config.horizon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub target: NodeSet,
    /// Mean over replications of the time-average age.
    pub mean: f64,
    /// Sample standard deviation over `sqrt(R)`; `None` when `R = 1`.
    pub std_error: Option<f64>,
    /// No member can ever receive a source update, so the age grows without
    /// bound and `mean` is only a finite-horizon artefact.
    pub diverged: bool,
    pub per_replication: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgeEstimate {
    pub targets: Vec<TargetEstimate>,
    pub replications: usize,
    pub horizon: f64,
    pub burn_in: f64,
    pub base_seed: u64,
}

impl AgeEstimate {
    pub fn get(&self, target: &NodeSet) -> Option<&TargetEstimate> {
        self.targets.iter().find(|t| &t.target == target)
    }

    /// Mean and standard error of the per-replication average over the
    /// singleton targets, when there is at least one.
    pub fn singleton_average(&self) -> Option<(f64, Option<f64>)> {
        let singles: Vec<&TargetEstimate> =
            self.targets.iter().filter(|t| t.target.len() == 1).collect();
        if singles.is_empty() {
            return None;
        }
        let per_rep: Vec<f64> = (0..self.replications)
            .map(|r| singles.iter().map(|t| t.per_replication[r]).sum::<f64>() / singles.len() as f64)
            .collect();
        Some(mean_and_se(&per_rep))
    }
}

/// Sample mean and `stddev / sqrt(len)`; the error is `None` for one sample.
pub fn mean_and_se(samples: &[f64]) -> (f64, Option<f64>) {
    let r = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / r;
    if samples.len() < 2 {
        return (mean, None);
    }
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, Some((var / r).sqrt()))
}

/// Runs every replication and aggregates per target.
pub fn estimate(net: &GossipNetwork, config: &SimConfig) -> Result<AgeEstimate, SimError> {
    config.validate()?;
    let table = EventTable::new(net)?;
    let targets = config.resolved_targets(net)?;
    let runs: Vec<Vec<f64>> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(&table, net.n, &targets, config, r))
        .collect();
    let reachable = net.reachable_from_source();
    let estimates = targets
        .iter()
        .enumerate()
        .map(|(t, set)| {
            let per_replication: Vec<f64> = runs.iter().map(|run| run[t]).collect();
            let (mean, std_error) = mean_and_se(&per_replication);
            TargetEstimate {
                target: set.clone(),
                mean,
                std_error,
                diverged: net.lambda_e > 0.0 && set.is_disjoint(&reachable),
                per_replication,
            }
        })
        .collect();
    Ok(AgeEstimate {
        targets: estimates,
        replications: config.replications,
        horizon: config.horizon,
        burn_in: config.burn_in,
        base_seed: config.base_seed,
    })
}
