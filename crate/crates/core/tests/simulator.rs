mod common;

use std::collections::BTreeMap;

use gossip_age::sim::{run_replication, Event, EventTable, SimulationState};
use gossip_age::topology::{complete, random_network, star_center_fed, star_leaf_fed, RandomParams};
use gossip_age::{estimate, solve_age, GossipNetwork, NodeSet, Protocol, ProtocolMode, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn key(e: Event) -> (u8, usize, usize) {
    match e {
        Event::SourceSelf => (0, 0, 0),
        Event::SourceToNode(i) => (1, i, 0),
        Event::Transfer { from, to } => (2, from, to),
    }
}

#[test]
fn event_frequencies_match_rates() {
    let mut params = RandomParams::new(5, 0.5, 77);
    params.src_probability = 0.6;
    let net = random_network(&params).unwrap();
    let table = EventTable::new(&net).unwrap();
    let total = table.total_rate();
    let draws = 1_000_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts: BTreeMap<(u8, usize, usize), usize> = BTreeMap::new();
    let mut elapsed = 0.0;
    for _ in 0..draws {
        let (dt, e) = table.next_event(&mut rng);
        elapsed += dt;
        *counts.entry(key(e)).or_default() += 1;
    }
    for (event, rate) in table.processes() {
        let p = rate / total;
        let want = p * draws as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let got = counts.get(&key(event)).copied().unwrap_or(0) as f64;
        assert!((got - want).abs() <= 3.0 * sigma.max(1.0), "{event:?}: {got} vs {want}");
    }
    assert_eq!(counts.len(), table.len());
    // Mean gap 1/total with relative sd 1/sqrt(draws).
    let mean_gap = elapsed / draws as f64;
    assert!((mean_gap * total - 1.0).abs() <= 3.0 / (draws as f64).sqrt());
}

/// Recomputes every target's integral by brute force on the same trace.
#[test]
fn lazy_integrals_match_naive_integration() {
    for (k, net) in common::regression_networks(12, 6, 500).into_iter().enumerate() {
        let Ok(table) = EventTable::new(&net) else { continue };
        let mut targets: Vec<NodeSet> = (1..=net.n).map(NodeSet::singleton).collect();
        targets.push(NodeSet::full(net.n));
        targets.push([1, net.n].into_iter().collect());
        let window = 3.0;
        let end = 40.0;
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let mut state = SimulationState::new(net.n, &targets, window);
        let mut naive = vec![0.0; targets.len()];
        let mut last = 0.0f64;
        let mut advance = |state: &SimulationState, to: f64, naive: &mut Vec<f64>| {
            let from = last.max(window);
            if to > from {
                for (acc, set) in naive.iter_mut().zip(&targets) {
                    *acc += state.set_age(set) as f64 * (to - from);
                }
            }
            last = to;
        };
        loop {
            let (dt, e) = table.next_event(&mut rng);
            let t = state.clock + dt;
            if t > end {
                break;
            }
            advance(&state, t, &mut naive);
            state.clock = t;
            state.apply_event(e);
        }
        advance(&state, end, &mut naive);
        let lazy = state.finish(end);
        for (l, n) in lazy.iter().zip(&naive) {
            let n = n / (end - window);
            assert!((l - n).abs() <= 1e-12 * n.abs().max(1.0), "{l} vs {n}");
        }
    }
}

#[test]
fn superposed_network_gives_identical_trajectories() {
    for net in common::regression_networks(10, 6, 900) {
        if EventTable::new(&net).is_err() {
            continue;
        }
        let config = SimConfig::new(500.0).with_replications(3).with_seed(5);
        let a = estimate(&net, &config).unwrap();
        let b = estimate(&net.superpose_to_push(), &config).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn single_node_age_is_ratio_of_rates() {
    let mut net = GossipNetwork::empty(1, 1.0);
    net.source_rates[0] = 1.0;
    let config = SimConfig::new(2e5).with_replications(1).with_seed(11);
    let v = run_replication(&net, &config, 0).unwrap()[0];
    // Stationary age is geometric with mean 1; the time average over
    // 1.8e5 time units has sd about 0.005.
    assert!((v - 1.0).abs() < 0.03, "{v}");
}

#[test]
fn unreachable_targets_are_flagged() {
    let mut net = GossipNetwork::empty(3, 1.0);
    net.source_rates[0] = 1.0;
    net.push_rates.insert((1, 2), 1.0);
    net.push_rates.insert((3, 1), 1.0);
    let config = SimConfig::new(1000.0)
        .with_replications(2)
        .with_targets(vec![NodeSet::singleton(2), NodeSet::singleton(3), "{2,3}".parse().unwrap()]);
    let est = estimate(&net, &config).unwrap();
    let flags: Vec<bool> = est.targets.iter().map(|t| t.diverged).collect();
    assert_eq!(flags, [false, true, false]);
    assert!(solve_age(&net, &NodeSet::singleton(3)).unwrap().is_infinite());
    // Age of node 3 grows linearly, so its time average is near T/2.
    assert!(est.targets[1].mean > 300.0);
}

#[test]
fn fixed_seed_is_reproducible() {
    let net = star_leaf_fed(6, 1.0, 1.0).unwrap();
    let config = SimConfig::new(2000.0).with_replications(5).with_seed(99);
    let a = estimate(&net, &config).unwrap();
    let b = estimate(&net, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.replications, 5);
    assert!(a.targets.iter().all(|t| t.std_error.is_some()));
    let c = estimate(&net, &config.clone().with_seed(100)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn complete_push_only_matches_exact() {
    let net = complete(8, 1.0, 1.0)
        .unwrap()
        .restrict_protocol(ProtocolMode::full(Protocol::Push));
    let config = SimConfig::new(5e4).with_replications(5).with_seed(3);
    let est = estimate(&net, &config).unwrap();
    for t in &est.targets {
        let exact = solve_age(&net, &t.target).unwrap();
        let se = t.std_error.unwrap();
        assert!((t.mean - exact).abs() <= 4.0 * se + 0.01 * exact, "{}: {} vs {exact}", t.target, t.mean);
    }
}

#[test]
fn center_fed_star_pull_leaf_stays_bounded() {
    let n = 200;
    let net = star_center_fed(n, 1.0, 1.0)
        .unwrap()
        .restrict_protocol(ProtocolMode::full(Protocol::Pull));
    let config = SimConfig::new(2e4)
        .with_replications(3)
        .with_seed(8)
        .with_targets(vec![NodeSet::singleton(1), NodeSet::singleton(n)]);
    let est = estimate(&net, &config).unwrap();
    let leaf = est.targets[0].mean;
    assert!((1.0..=2.2).contains(&leaf), "{leaf}");
    assert!((est.targets[1].mean - 1.0).abs() < 0.1);
}

#[test]
fn leaf_fed_full_set_tracks_source_ratio() {
    let n = 10;
    let net = star_leaf_fed(n, 2.0, 1.0).unwrap();
    let config = SimConfig::new(5e4)
        .with_replications(3)
        .with_seed(4)
        .with_targets(vec![NodeSet::full(n)]);
    let v = estimate(&net, &config).unwrap().targets[0].mean;
    assert!((v - 0.5).abs() < 0.03, "{v}");
}

#[test]
fn paired_seeds_show_dominance() {
    for net in common::regression_networks(6, 6, 1300) {
        let push = net.restrict_protocol(ProtocolMode::full(Protocol::Push));
        let (Ok(_), Ok(_)) = (EventTable::new(&net), EventTable::new(&push)) else { continue };
        let config = SimConfig::new(2e4).with_replications(3).with_seed(21);
        let both = estimate(&net, &config).unwrap();
        let one = estimate(&push, &config).unwrap();
        for (b, o) in both.targets.iter().zip(&one.targets) {
            if o.diverged {
                continue;
            }
            let se = b.std_error.unwrap().hypot(o.std_error.unwrap());
            assert!(b.mean <= o.mean + 3.0 * se + 1e-9, "{}: {} vs {}", b.target, b.mean, o.mean);
        }
    }
}
