//! Experiment records, the CSV schema, and the figure presets.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::network::{GossipNetwork, NodeSet, Protocol, ProtocolMode};
use crate::sim::{estimate, AgeEstimate, SimConfig, SimError};
use crate::solver::{solve_star_reduced, ExactSolver, SolveError, StarVariant};
use crate::topology::{complete, ring, star_center_fed, star_leaf_fed, TopologyError, TopologyKind};

pub const CSV_HEADER: [&str; 11] = [
    "topology", "protocol", "scale", "n", "target", "method", "value", "stderr", "seed", "horizon",
    "reps",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad record: {0}")]
    BadRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Exact,
    Reduced,
    Simulated,
    BoundLower,
    BoundUpper,
    ReferenceCurve,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Reduced => "reduced",
            Method::Simulated => "simulated",
            Method::BoundLower => "bound-lower",
            Method::BoundUpper => "bound-upper",
            Method::ReferenceCurve => "reference-curve",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "exact" => Method::Exact,
            "reduced" => Method::Reduced,
            "simulated" => Method::Simulated,
            "bound-lower" => Method::BoundLower,
            "bound-upper" => Method::BoundUpper,
            "reference-curve" => Method::ReferenceCurve,
            other => return Err(format!("unknown method {other:?}")),
        })
    }
}

/// What a row measures: one node, a set of nodes, or the network mean of
/// the singleton ages.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Node(usize),
    Set(NodeSet),
    Average,
}

impl Target {
    /// Singleton sets collapse to [`Target::Node`].
    pub fn from_set(set: NodeSet) -> Self {
        if set.len() == 1 {
            Target::Node(set.iter().next().unwrap())
        } else {
            Target::Set(set)
        }
    }

    pub fn as_set(&self) -> Option<NodeSet> {
        match self {
            Target::Node(i) => Some(NodeSet::singleton(*i)),
            Target::Set(s) => Some(s.clone()),
            Target::Average => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Node(i) => write!(f, "{i}"),
            Target::Set(s) => write!(f, "{s}"),
            Target::Average => f.write_str("average"),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "average" {
            return Ok(Target::Average);
        }
        let set: NodeSet = s.parse().map_err(|e| format!("{e}"))?;
        if set.is_empty() {
            return Err("empty target set".into());
        }
        Ok(Target::from_set(set))
    }
}

/// Parameters of a simulated row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRun {
    pub seed: u64,
    pub horizon: f64,
    pub reps: usize,
    pub stderr: Option<f64>,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub topology: String,
    pub protocol: Protocol,
    pub scale: f64,
    pub n: usize,
    pub target: Target,
    pub method: Method,
    /// Non-negative, possibly infinite.
    pub value: f64,
    /// Present exactly when `method` is [`Method::Simulated`].
    pub run: Option<SimRun>,
}

fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64, ExperimentError> {
    field
        .parse()
        .map_err(|_| ExperimentError::BadRecord(format!("{what}: cannot parse {field:?}")))
}

impl ExperimentRecord {
    pub fn new(
        topology: impl Into<String>,
        mode: ProtocolMode,
        n: usize,
        target: Target,
        method: Method,
        value: f64,
    ) -> Self {
        Self {
            topology: topology.into(),
            protocol: mode.protocol(),
            scale: mode.scale(),
            n,
            target,
            method,
            value,
            run: None,
        }
    }

    pub fn simulated(mut self, run: SimRun) -> Self {
        self.run = Some(run);
        self
    }

    pub fn fields(&self) -> [String; 11] {
        let (stderr, seed, horizon, reps) = match &self.run {
            Some(r) => (
                r.stderr.map(fmt_value).unwrap_or_default(),
                r.seed.to_string(),
                r.horizon.to_string(),
                r.reps.to_string(),
            ),
            None => Default::default(),
        };
        [
            self.topology.clone(),
            self.protocol.to_string(),
            self.scale.to_string(),
            self.n.to_string(),
            self.target.to_string(),
            self.method.to_string(),
            fmt_value(self.value),
            stderr,
            seed,
            horizon,
            reps,
        ]
    }

    pub fn from_fields(row: &[&str]) -> Result<Self, ExperimentError> {
        let bad = |m: String| ExperimentError::BadRecord(m);
        if row.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected {} fields, got {}", CSV_HEADER.len(), row.len())));
        }
        let method: Method = row[5].parse().map_err(bad)?;
        let value = parse_f64(row[6], "value")?;
        if value.is_nan() || value < 0.0 {
            return Err(bad(format!("value must be >= 0 or inf, got {}", row[6])));
        }
        let optional = [row[7], row[8], row[9], row[10]];
        let run = if method == Method::Simulated {
            if row[8].is_empty() || row[9].is_empty() || row[10].is_empty() {
                return Err(bad("simulated rows need seed, horizon and reps".into()));
            }
            Some(SimRun {
                stderr: if row[7].is_empty() {
                    None
                } else {
                    Some(parse_f64(row[7], "stderr")?)
                },
                seed: row[8].parse().map_err(|_| bad(format!("seed: {:?}", row[8])))?,
                horizon: parse_f64(row[9], "horizon")?,
                reps: row[10].parse().map_err(|_| bad(format!("reps: {:?}", row[10])))?,
            })
        } else {
            if optional.iter().any(|f| !f.is_empty()) {
                return Err(bad(format!("{method} rows carry no stderr/seed/horizon/reps")));
            }
            None
        };
        Ok(Self {
            topology: row[0].to_string(),
            protocol: row[1].parse().map_err(bad)?,
            scale: parse_f64(row[2], "scale")?,
            n: row[3].parse().map_err(|_| bad(format!("n: {:?}", row[3])))?,
            target: row[4].parse().map_err(bad)?,
            method,
            value,
            run,
        })
    }

    fn sort_key(&self) -> (&str, Protocol, u64, usize, &Target, Method) {
        (
            &self.topology,
            self.protocol,
            self.scale.to_bits(),
            self.n,
            &self.target,
            self.method,
        )
    }
}

/// Sorts rows by (topology, protocol, scale, n, target, method).
pub fn sort_records(records: &mut [ExperimentRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

pub fn write_csv<W: Write>(out: W, records: &[ExperimentRecord]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(ExperimentError::BadRecord(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    rdr.records()
        .map(|row| {
            let row = row?;
            let fields: Vec<&str> = row.iter().collect();
            ExperimentRecord::from_fields(&fields)
        })
        .collect()
}

/// Exact rows for `targets` of one network.
pub fn exact_records(
    topology: &str,
    net: &GossipNetwork,
    mode: ProtocolMode,
    targets: &[Target],
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mut solver = ExactSolver::new(net)?;
    let mut rows = Vec::with_capacity(targets.len());
    for target in targets {
        let value = match target.as_set() {
            Some(set) => solver.solve(&set)?,
            None => {
                let mut total = 0.0;
                for i in 1..=net.n {
                    total += solver.solve(&NodeSet::singleton(i))?;
                }
                total / net.n as f64
            }
        };
        rows.push(ExperimentRecord::new(topology, mode, net.n, target.clone(), Method::Exact, value));
    }
    Ok(rows)
}

/// Lower/upper bound rows; the superset ages come from the exact solver.
pub fn bound_records(
    topology: &str,
    net: &GossipNetwork,
    mode: ProtocolMode,
    targets: &[Target],
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mut solver = ExactSolver::new(net)?;
    let mut rows = Vec::new();
    for target in targets {
        let set = target.as_set().ok_or_else(|| {
            ExperimentError::BadRecord("bounds are defined for node sets, not the average".into())
        })?;
        let nb = net.neighbors(&set).map_err(SolveError::from)?;
        for i in nb.iter() {
            solver.solve(&set.with(i))?;
        }
        let b = solver.bounds(&set, &solver.table())?;
        rows.push(ExperimentRecord::new(topology, mode, net.n, target.clone(), Method::BoundLower, b.lower));
        rows.push(ExperimentRecord::new(topology, mode, net.n, target.clone(), Method::BoundUpper, b.upper));
    }
    Ok(rows)
}

/// Reduced-solver rows for a star.
pub fn reduced_records(
    variant: StarVariant,
    mode: ProtocolMode,
    n: usize,
    lambda: f64,
    lambda_e: f64,
    targets: &[Target],
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let sol = solve_star_reduced(variant, mode, n, lambda, lambda_e)?;
    let topology = star_kind(variant).as_str();
    targets
        .iter()
        .map(|target| {
            let value = match target.as_set() {
                Some(set) => sol.age_of_set(&set)?,
                None => (1..=n)
                    .map(|i| sol.age_of_set(&NodeSet::singleton(i)))
                    .sum::<Result<f64, _>>()?
                    / n as f64,
            };
            Ok(ExperimentRecord::new(topology, mode, n, target.clone(), Method::Reduced, value))
        })
        .collect()
}

/// Simulated rows; `average` is the replication-level mean over singletons.
pub fn simulated_records(
    topology: &str,
    net: &GossipNetwork,
    mode: ProtocolMode,
    targets: &[Target],
    config: &SimConfig,
) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let want_average = targets.contains(&Target::Average);
    let mut sets: Vec<NodeSet> = targets.iter().filter_map(Target::as_set).collect();
    if want_average {
        for i in 1..=net.n {
            let s = NodeSet::singleton(i);
            if !sets.contains(&s) {
                sets.push(s);
            }
        }
    }
    let config = config.clone().with_targets(sets);
    let est = estimate(net, &config)?;
    Ok(records_from_estimate(topology, mode, net.n, targets, &est))
}

fn records_from_estimate(
    topology: &str,
    mode: ProtocolMode,
    n: usize,
    targets: &[Target],
    est: &AgeEstimate,
) -> Vec<ExperimentRecord> {
    let run = |stderr| SimRun {
        seed: est.base_seed,
        horizon: est.horizon,
        reps: est.replications,
        stderr,
    };
    targets
        .iter()
        .filter_map(|target| {
            let (value, stderr) = match target.as_set() {
                Some(set) => {
                    let t = est.get(&set)?;
                    (t.mean, t.std_error)
                }
                None => est.singleton_average()?,
            };
            Some(
                ExperimentRecord::new(topology, mode, n, target.clone(), Method::Simulated, value)
                    .simulated(run(stderr)),
            )
        })
        .collect()
}

pub fn star_kind(variant: StarVariant) -> TopologyKind {
    match variant {
        StarVariant::CenterFed => TopologyKind::StarCenterFed,
        StarVariant::LeafFed => TopologyKind::StarLeafFed,
    }
}

/// Representative targets of a star: the fed node, the center and one
/// unfed leaf (deduplicated for the center-fed star).
pub fn star_targets(variant: StarVariant, n: usize) -> Vec<Target> {
    match variant {
        StarVariant::CenterFed => vec![Target::Node(1), Target::Node(n)],
        StarVariant::LeafFed => vec![Target::Node(1), Target::Node(2), Target::Node(n)],
    }
}

/// Simulation settings shared by the presets.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub horizon: f64,
    pub burn_in: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

impl SimSettings {
    pub fn config(&self) -> SimConfig {
        let mut c = SimConfig::new(self.horizon)
            .with_replications(self.reps)
            .with_seed(self.seed);
        if let Some(b) = self.burn_in {
            c = c.with_burn_in(b);
        }
        c
    }
}

/// Star protocol comparison sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSweep {
    pub ns: Vec<usize>,
    pub lambda: f64,
    pub lambda_e: f64,
    pub scale: f64,
    /// `None` skips the simulated rows.
    pub sim: Option<SimSettings>,
}

impl Default for StarSweep {
    fn default() -> Self {
        Self {
            ns: (1..=10).map(|k| 100 * k).collect(),
            lambda: 1.0,
            lambda_e: 1.0,
            scale: 1.0,
            sim: Some(SimSettings {
                horizon: 2_000.0,
                burn_in: None,
                reps: 3,
                seed: 1,
            }),
        }
    }
}

pub fn figure_star(sweep: &StarSweep) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mut points = Vec::new();
    for variant in [StarVariant::CenterFed, StarVariant::LeafFed] {
        for protocol in Protocol::ALL {
            for &n in &sweep.ns {
                points.push((variant, protocol, n));
            }
        }
    }
    let chunks: Vec<Vec<ExperimentRecord>> = points
        .par_iter()
        .map(|&(variant, protocol, n)| -> Result<_, ExperimentError> {
            let mode = ProtocolMode::new(protocol, sweep.scale).map_err(SolveError::from)?;
            let targets = star_targets(variant, n);
            let mut rows = reduced_records(variant, mode, n, sweep.lambda, sweep.lambda_e, &targets)?;
            if let Some(sim) = &sweep.sim {
                let base = match variant {
                    StarVariant::CenterFed => star_center_fed(n, sweep.lambda, sweep.lambda_e)?,
                    StarVariant::LeafFed => star_leaf_fed(n, sweep.lambda, sweep.lambda_e)?,
                };
                let net = base.restrict_protocol(mode);
                rows.extend(simulated_records(
                    star_kind(variant).as_str(),
                    &net,
                    mode,
                    &targets,
                    &sim.config(),
                )?);
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;
    let mut records: Vec<ExperimentRecord> = chunks.into_iter().flatten().collect();
    sort_records(&mut records);
    Ok(records)
}

/// `sqrt(pi/2) * sqrt(n)`, the single-node push-only ring reference.
pub fn ring_reference(n: usize) -> f64 {
    (std::f64::consts::FRAC_PI_2 * n as f64).sqrt()
}

/// `ln n`, the single-node push-only complete-network reference.
pub fn complete_reference(n: usize) -> f64 {
    (n as f64).ln()
}

/// Ring and complete network sweep under scaled push-pull.
#[derive(Debug, Clone, PartialEq)]
pub struct RingFcSweep {
    pub ns: Vec<usize>,
    pub lambda: f64,
    pub lambda_e: f64,
    pub scale: f64,
    pub sim: SimSettings,
}

impl Default for RingFcSweep {
    fn default() -> Self {
        Self {
            ns: (1..=10).map(|k| 100 * k).collect(),
            lambda: 1.0,
            lambda_e: 1.0,
            scale: 0.5,
            sim: SimSettings {
                horizon: 10_000.0,
                burn_in: None,
                reps: 5,
                seed: 1,
            },
        }
    }
}

pub fn figure_ring_fc(sweep: &RingFcSweep) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mode = ProtocolMode::new(Protocol::PushPull, sweep.scale).map_err(SolveError::from)?;
    let targets = [Target::Node(1), Target::Average];
    let mut records = Vec::new();
    for kind in [TopologyKind::Ring, TopologyKind::Complete] {
        for &n in &sweep.ns {
            let base = match kind {
                TopologyKind::Ring => ring(n, sweep.lambda, sweep.lambda_e)?,
                _ => complete(n, sweep.lambda, sweep.lambda_e)?,
            };
            let net = base.restrict_protocol(mode);
            records.extend(simulated_records(kind.as_str(), &net, mode, &targets, &sweep.sim.config())?);
            let reference = match kind {
                TopologyKind::Ring => ring_reference(n),
                _ => complete_reference(n),
            };
            records.push(ExperimentRecord::new(
                kind.as_str(),
                mode,
                n,
                Target::Node(1),
                Method::ReferenceCurve,
                reference,
            ));
        }
    }
    sort_records(&mut records);
    Ok(records)
}
