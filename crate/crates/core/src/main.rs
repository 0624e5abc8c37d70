use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gossip_age::experiment::{
    bound_records, exact_records, figure_ring_fc, figure_star, reduced_records, simulated_records,
    sort_records, write_csv, ExperimentRecord, RingFcSweep, SimSettings, StarSweep, Target,
};
use gossip_age::network::{GossipNetwork, Protocol, ProtocolMode};
use gossip_age::solver::StarVariant;
use gossip_age::topology::{
    network_to_json, write_network_file, RandomParams, TopologyKind, TopologySpec,
};

#[derive(Parser)]
#[command(name = "gossip-age", version, about = "Version age of information in gossip networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact, star-reduced or bound values of the limiting average age.
    Solve(SolveArgs),
    /// Monte Carlo estimates of the average age.
    Simulate(SimulateArgs),
    /// Star protocol comparison sweep (reduced solver plus simulation).
    ///
    /// Defaults: n = 100..1000 step 100, lambda = lambda_e = 1, horizon
    /// 2000 with burn-in 200, 3 replications. A push star at n = 1000 takes
    /// a few seconds per replication at these settings.
    FigureStar(FigureStarArgs),
    /// Ring and complete network sweep under half-rate push-pull, with the
    /// sqrt(pi/2)*sqrt(n) and ln n reference curves.
    ///
    /// Defaults: n = 100..1000 step 100, lambda_e = 1, horizon 10^4 with
    /// burn-in 10^3, 5 replications; each complete-network point at
    /// n = 1000 takes a few seconds.
    FigureRingFc(FigureRingFcArgs),
    /// Checks a network file (or generated topology) against the model's
    /// invariants.
    Validate(NetworkArgs),
    /// Writes a generated (or protocol-restricted) network as a JSON document.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Topology {
    StarCenterFed,
    StarLeafFed,
    Ring,
    Complete,
    Random,
}

impl From<Topology> for TopologyKind {
    fn from(t: Topology) -> Self {
        match t {
            Topology::StarCenterFed => TopologyKind::StarCenterFed,
            Topology::StarLeafFed => TopologyKind::StarLeafFed,
            Topology::Ring => TopologyKind::Ring,
            Topology::Complete => TopologyKind::Complete,
            Topology::Random => TopologyKind::Random,
        }
    }
}

#[derive(Args)]
struct NetworkArgs {
    /// Generated topology.
    #[arg(long, value_enum, required_unless_present = "file", conflicts_with = "file")]
    topology: Option<Topology>,
    /// JSON network document.
    #[arg(long)]
    file: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Per-node gossip budget per rate type.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Source self-update rate.
    #[arg(long = "lambda-e", default_value_t = 1.0)]
    lambda_e: f64,
    /// push, pull or pushpull.
    #[arg(long, default_value = "pushpull")]
    protocol: Protocol,
    /// Factor applied to the surviving gossip rates, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Random topology: per-pair edge probability.
    #[arg(long, default_value_t = 0.4)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0.1)]
    rate_low: f64,
    #[arg(long, default_value_t = 2.0)]
    rate_high: f64,
    /// Random topology: probability that a node is source-fed.
    #[arg(long, default_value_t = 0.3)]
    src_prob: f64,
    /// Random topology seed.
    #[arg(long, default_value_t = 0)]
    graph_seed: u64,
}

impl NetworkArgs {
    fn mode(&self) -> Result<ProtocolMode> {
        Ok(ProtocolMode::new(self.protocol, self.scale)?)
    }

    fn kind(&self) -> TopologyKind {
        self.topology.map(Into::into).unwrap_or(TopologyKind::File)
    }

    /// The base network, before protocol restriction.
    fn base(&self) -> Result<GossipNetwork> {
        let kind = self.kind();
        let mut spec = TopologySpec::named(kind, self.n, self.lambda, self.lambda_e);
        spec.path = self.file.clone();
        if kind == TopologyKind::Random {
            spec.random = Some(RandomParams {
                n: self.n,
                edge_probability: self.edge_prob,
                rate_low: self.rate_low,
                rate_high: self.rate_high,
                src_probability: self.src_prob,
                lambda_e: self.lambda_e,
                seed: self.graph_seed,
            });
        }
        let net = spec.build().with_context(|| match &self.file {
            Some(p) => format!("loading {}", p.display()),
            None => format!("building {kind} network"),
        })?;
        Ok(net)
    }

    fn network(&self) -> Result<GossipNetwork> {
        Ok(self.base()?.restrict_protocol(self.mode()?))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Exact,
    Reduced,
    Bounds,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, value_enum, default_value = "exact")]
    method: SolveMethod,
    /// Targets: node labels, set literals such as {1,2,5}, or `average`.
    /// Defaults to every node plus the average.
    #[arg(long, num_args = 1..)]
    sets: Vec<Target>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, default_value_t = 10_000.0)]
    horizon: f64,
    /// Defaults to a tenth of the horizon.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, num_args = 1..)]
    sets: Vec<Target>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value_t = 100)]
    n_min: usize,
    #[arg(long, default_value_t = 1000)]
    n_max: usize,
    #[arg(long, default_value_t = 100)]
    n_step: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long = "lambda-e", default_value_t = 1.0)]
    lambda_e: f64,
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SweepArgs {
    fn ns(&self) -> Result<Vec<usize>> {
        if self.n_step == 0 || self.n_min > self.n_max {
            bail!("sweep needs n-min <= n-max and n-step > 0");
        }
        Ok((self.n_min..=self.n_max).step_by(self.n_step).collect())
    }
}

#[derive(Args)]
struct FigureStarArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = 2_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Only emit the reduced-solver rows.
    #[arg(long)]
    no_sim: bool,
    #[arg(long, default_value = "figure_star.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct FigureRingFcArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, default_value_t = 0.5)]
    scale: f64,
    #[arg(long, default_value_t = 10_000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "figure_ring_fc.csv")]
    out: PathBuf,
}

fn default_targets(n: usize) -> Vec<Target> {
    let mut t: Vec<Target> = (1..=n).map(Target::Node).collect();
    t.push(Target::Average);
    t
}

fn emit(records: &[ExperimentRecord], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(BufWriter::new(file), records)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_csv(&mut lock, records)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn topology_label(args: &NetworkArgs) -> &'static str {
    args.kind().as_str()
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let mode = args.net.mode()?;
    let label = topology_label(&args.net);
    let mut records = match args.method {
        SolveMethod::Reduced => {
            let variant = match args.net.topology {
                Some(Topology::StarCenterFed) => StarVariant::CenterFed,
                Some(Topology::StarLeafFed) => StarVariant::LeafFed,
                _ => bail!("the reduced method only applies to star-center-fed and star-leaf-fed"),
            };
            let targets = if args.sets.is_empty() {
                default_targets(args.net.n)
            } else {
                args.sets.clone()
            };
            reduced_records(variant, mode, args.net.n, args.net.lambda, args.net.lambda_e, &targets)?
        }
        method => {
            let net = args.net.network()?;
            let targets = if args.sets.is_empty() {
                default_targets(net.n)
            } else {
                args.sets.clone()
            };
            if method == SolveMethod::Exact {
                exact_records(label, &net, mode, &targets)?
            } else {
                let targets: Vec<Target> =
                    targets.into_iter().filter(|t| *t != Target::Average).collect();
                bound_records(label, &net, mode, &targets)?
            }
        }
    };
    sort_records(&mut records);
    emit(&records, args.out.as_ref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mode = args.net.mode()?;
    let net = args.net.network()?;
    let settings = SimSettings {
        horizon: args.horizon,
        burn_in: args.burn_in,
        reps: args.reps,
        seed: args.seed,
    };
    let targets = if args.sets.is_empty() {
        default_targets(net.n)
    } else {
        args.sets.clone()
    };
    let mut records =
        simulated_records(topology_label(&args.net), &net, mode, &targets, &settings.config())?;
    for r in &records {
        if let Some(set) = r.target.as_set() {
            if set.is_disjoint(&net.reachable_from_source()) && net.lambda_e > 0.0 {
                eprintln!("warning: target {} never receives updates; its age diverges", r.target);
            }
        }
    }
    sort_records(&mut records);
    emit(&records, args.out.as_ref())
}

fn cmd_figure_star(args: FigureStarArgs) -> Result<()> {
    let sweep = StarSweep {
        ns: args.sweep.ns()?,
        lambda: args.sweep.lambda,
        lambda_e: args.sweep.lambda_e,
        scale: args.scale,
        sim: (!args.no_sim).then_some(SimSettings {
            horizon: args.horizon,
            burn_in: args.sweep.burn_in,
            reps: args.reps,
            seed: args.sweep.seed,
        }),
    };
    let records = figure_star(&sweep)?;
    emit(&records, Some(&args.out))
}

fn cmd_figure_ring_fc(args: FigureRingFcArgs) -> Result<()> {
    let sweep = RingFcSweep {
        ns: args.sweep.ns()?,
        lambda: args.sweep.lambda,
        lambda_e: args.sweep.lambda_e,
        scale: args.scale,
        sim: SimSettings {
            horizon: args.horizon,
            burn_in: args.sweep.burn_in,
            reps: args.reps,
            seed: args.sweep.seed,
        },
    };
    let records = figure_ring_fc(&sweep)?;
    emit(&records, Some(&args.out))
}

fn cmd_validate(args: NetworkArgs) -> Result<()> {
    let net = args.network()?;
    net.validate()?;
    println!(
        "ok: n = {}, {} push edges, {} pull edges, total source rate {}",
        net.n,
        net.push_rates.len(),
        net.pull_rates.len(),
        net.total_source_rate()
    );
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let net = args.net.network()?;
    match &args.out {
        Some(path) => write_network_file(&net, path)?,
        None => println!("{}", network_to_json(&net)),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::FigureStar(a) => cmd_figure_star(a),
        Command::FigureRingFc(a) => cmd_figure_ring_fc(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
