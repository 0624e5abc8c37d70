#![allow(dead_code)]

use gossip_age::solver::{StarClass, StarSolution, StarVariant};
use gossip_age::topology::{random_network, RandomParams};
use gossip_age::{GossipNetwork, NodeSet};

/// Seeded random networks with `2 <= n <= max_n`, cycling n with the index.
pub fn regression_networks(count: usize, max_n: usize, seed_base: u64) -> Vec<GossipNetwork> {
    (0..count)
        .map(|k| {
            let n = 2 + k % (max_n - 1);
            let mut params = RandomParams::new(n, 0.4, seed_base + k as u64);
            params.rate_low = 0.1;
            params.rate_high = 2.0;
            params.src_probability = 0.3;
            random_network(&params).expect("valid parameters")
        })
        .collect()
}

/// A concrete node set belonging to `class` in the star `sol` describes.
pub fn star_representative(sol: &StarSolution, class: StarClass) -> NodeSet {
    let first_leaf = match sol.variant {
        StarVariant::CenterFed => 1,
        StarVariant::LeafFed => 2,
    };
    let mut set: NodeSet = (first_leaf..first_leaf + class.leaves).collect();
    if class.fed_leaf {
        set.insert(1);
    }
    if class.center {
        set.insert(sol.n);
    }
    set
}
