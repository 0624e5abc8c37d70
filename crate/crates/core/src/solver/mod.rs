//! Exact limiting average version age via the subset recursion
//!
//! ```text
//! v_S = (lambda_e + sum_{i in N(S)} lambda_i(S) v_{S+i}) / (lambda_0(S) + sum_{i in N(S)} lambda_i(S))
//! ```
//!
//! where `lambda_i(S) = lambda_i^pull(S) + lambda_i^push(S)`. Every term on
//! the right refers to a strictly larger set, so the recursion terminates at
//! the full node set, whose age is `lambda_e / lambda_0(N)`.
//!
//! Ages are `f64`; `f64::INFINITY` marks a set that never hears from the
//! source (its denominator is zero, or it only hears from such sets).
//!
//! Each [`ExactSolver`] owns a private memo table and is not shared across
//! threads; concurrent queries need separate solvers. Results do not depend
//! on query order.

mod star;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::network::{GossipNetwork, NetworkError, NodeSet};

pub use star::{solve_star_reduced, StarClass, StarSolution, StarVariant};

/// Width of the bit mask used to key memoized sets.
pub const EXACT_NODE_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("n exceeds exact-solver cap (n = {n}, cap = {cap})")]
    TooLarge { n: usize, cap: usize },
    #[error("superset age for {0} is missing")]
    MissingSuperset(NodeSet),
    #[error("{0}")]
    BadArgument(String),
}

/// Ages keyed by node set.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgeTable {
    entries: BTreeMap<NodeSet, f64>,
}

impl AgeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, set: NodeSet, age: f64) {
        self.entries.insert(set, age);
    }

    pub fn get(&self, set: &NodeSet) -> Option<f64> {
        self.entries.get(set).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeSet, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    /// First stored pair `(S, T)` with `S ⊂ T` and `v_T > v_S + tol`.
    pub fn monotonicity_violation(&self, tol: f64) -> Option<(NodeSet, NodeSet)> {
        for (small, &vs) in &self.entries {
            for (big, &vt) in &self.entries {
                if small != big && small.is_subset(big) && vt > vs + tol {
                    return Some((small.clone(), big.clone()));
                }
            }
        }
        None
    }
}

/// Memoizing evaluator of the subset recursion for one network.
pub struct ExactSolver {
    n: usize,
    lambda_e: f64,
    full: u64,
    source: Vec<f64>,
    /// `inflow[j]`: `(i, rate)` contributions of information moving from
    /// `i` into `j`, one entry per push edge `(i, j)` and per pull edge
    /// `(j, i)`. Kept separate rather than merged.
    inflow: Vec<Vec<(usize, f64)>>,
    memo: HashMap<u64, f64>,
}

fn bit(node: usize) -> u64 {
    1u64 << (node - 1)
}

impl ExactSolver {
    pub fn new(net: &GossipNetwork) -> Result<Self, SolveError> {
        net.validate()?;
        if net.n > EXACT_NODE_CAP {
            return Err(SolveError::TooLarge {
                n: net.n,
                cap: EXACT_NODE_CAP,
            });
        }
        let mut inflow = vec![Vec::new(); net.n + 1];
        for (&(from, to), &rate) in &net.push_rates {
            if rate > 0.0 {
                inflow[to].push((from, rate));
            }
        }
        for (&(puller, target), &rate) in &net.pull_rates {
            if rate > 0.0 {
                inflow[puller].push((target, rate));
            }
        }
        let full = if net.n == 64 {
            u64::MAX
        } else {
            (1u64 << net.n) - 1
        };
        Ok(Self {
            n: net.n,
            lambda_e: net.lambda_e,
            full,
            source: net.source_rates.clone(),
            inflow,
            memo: HashMap::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn mask_of(&self, set: &NodeSet) -> Result<u64, SolveError> {
        if set.is_empty() {
            return Err(NetworkError::EmptySet.into());
        }
        match set.to_mask() {
            Some(mask) if mask & !self.full == 0 => Ok(mask),
            _ => Err(NetworkError::SetOutOfRange {
                set: set.clone(),
                n: self.n,
            }
            .into()),
        }
    }

    /// `lambda_0(S)` and the positive `(i, lambda_i(S))` pairs for `mask`.
    fn local_rates(&self, mask: u64) -> (f64, Vec<(usize, f64)>) {
        let mut src = 0.0;
        let mut weights = [0.0f64; EXACT_NODE_CAP + 1];
        let mut rest = mask;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize + 1;
            rest &= rest - 1;
            src += self.source[j - 1];
            for &(i, rate) in &self.inflow[j] {
                if mask & bit(i) == 0 {
                    weights[i] += rate;
                }
            }
        }
        let neighbors = (1..=self.n)
            .filter(|&i| weights[i] > 0.0)
            .map(|i| (i, weights[i]))
            .collect();
        (src, neighbors)
    }

    fn solve_mask(&mut self, mask: u64) -> f64 {
        if let Some(&v) = self.memo.get(&mask) {
            return v;
        }
        let (src, neighbors) = self.local_rates(mask);
        let mut numerator = self.lambda_e;
        let mut denominator = src;
        for &(i, w) in &neighbors {
            let v = self.solve_mask(mask | bit(i));
            numerator += w * v;
            denominator += w;
        }
        let age = if denominator > 0.0 {
            numerator / denominator
        } else {
            f64::INFINITY
        };
        self.memo.insert(mask, age);
        age
    }

    /// `v_S` for a non-empty set.
    pub fn solve(&mut self, set: &NodeSet) -> Result<f64, SolveError> {
        let mask = self.mask_of(set)?;
        Ok(self.solve_mask(mask))
    }

    /// Every set evaluated so far.
    pub fn table(&self) -> AgeTable {
        let mut table = AgeTable::new();
        for (&mask, &age) in &self.memo {
            table.insert(NodeSet::from_mask(mask), age);
        }
        table
    }

    /// Upper and lower bounds on `v_S` built from the extreme neighbour rate
    /// and the extreme superset age.
    ///
    /// With `m = |N(S)|`, the upper bound pairs `m * min lambda_i(S)` with
    /// `max v_{S+i}` and the lower bound pairs `m * max lambda_i(S)` with
    /// `min v_{S+i}`. When `N(S)` is empty both collapse to
    /// `lambda_e / lambda_0(S)`.
    pub fn bounds(&self, set: &NodeSet, superset_ages: &AgeTable) -> Result<AgeBounds, SolveError> {
        let mask = self.mask_of(set)?;
        let (src, neighbors) = self.local_rates(mask);
        if neighbors.is_empty() {
            let v = if src > 0.0 {
                self.lambda_e / src
            } else {
                f64::INFINITY
            };
            return Ok(AgeBounds { lower: v, upper: v });
        }
        let mut rate_min = f64::INFINITY;
        let mut rate_max = 0.0f64;
        let mut age_min = f64::INFINITY;
        let mut age_max = f64::NEG_INFINITY;
        for &(i, w) in &neighbors {
            let sup = NodeSet::from_mask(mask | bit(i));
            let v = superset_ages
                .get(&sup)
                .ok_or(SolveError::MissingSuperset(sup))?;
            rate_min = rate_min.min(w);
            rate_max = rate_max.max(w);
            age_min = age_min.min(v);
            age_max = age_max.max(v);
        }
        let m = neighbors.len() as f64;
        let eval = |rate: f64, age: f64| (self.lambda_e + m * rate * age) / (src + m * rate);
        Ok(AgeBounds {
            lower: eval(rate_max, age_min),
            upper: eval(rate_min, age_max),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `v_S` for one set, using a fresh solver.
pub fn solve_age(net: &GossipNetwork, set: &NodeSet) -> Result<f64, SolveError> {
    ExactSolver::new(net)?.solve(set)
}

/// Bounds on `v_S` from the ages of its one-larger supersets.
pub fn age_bounds(
    net: &GossipNetwork,
    set: &NodeSet,
    superset_ages: &AgeTable,
) -> Result<AgeBounds, SolveError> {
    ExactSolver::new(net)?.bounds(set, superset_ages)
}

/// Singleton ages of every node, with the memo table they were computed from.
#[derive(Debug, Clone)]
pub struct SingletonAges {
    /// `per_node[i - 1] = v_{i}`.
    pub per_node: Vec<f64>,
    pub table: AgeTable,
}

impl SingletonAges {
    /// `(1/n) sum_i v_{i}`; infinite if any node is.
    pub fn average(&self) -> f64 {
        self.per_node.iter().sum::<f64>() / self.per_node.len() as f64
    }

    /// Nodes whose age is infinite.
    pub fn infinite_nodes(&self) -> Vec<usize> {
        self.per_node
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_infinite())
            .map(|(i, _)| i + 1)
            .collect()
    }
}

pub fn solve_all_singletons(net: &GossipNetwork) -> Result<SingletonAges, SolveError> {
    let mut solver = ExactSolver::new(net)?;
    let per_node = (1..=net.n)
        .map(|i| solver.solve(&NodeSet::singleton(i)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SingletonAges {
        per_node,
        table: solver.table(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Protocol, ProtocolMode};
    use crate::topology::{complete, random_network, star_center_fed, star_leaf_fed, RandomParams};

    const TOL: f64 = 1e-9;

    fn set(items: &[usize]) -> NodeSet {
        items.iter().copied().collect()
    }

    #[test]
    fn single_node_base_case() {
        let mut net = GossipNetwork::empty(1, 3.0);
        net.source_rates = vec![1.5];
        assert!((solve_age(&net, &set(&[1])).unwrap() - 2.0).abs() < TOL);
    }

    #[test]
    fn two_node_chain() {
        let mut net = GossipNetwork::empty(2, 1.0);
        net.source_rates = vec![2.0, 0.0];
        net.push_rates.insert((1, 2), 3.0);
        let mut solver = ExactSolver::new(&net).unwrap();
        assert!((solver.solve(&set(&[1])).unwrap() - 0.5).abs() < TOL);
        assert!((solver.solve(&set(&[1, 2])).unwrap() - 0.5).abs() < TOL);
        assert!((solver.solve(&set(&[2])).unwrap() - 5.0 / 6.0).abs() < TOL);
    }

    #[test]
    fn center_fed_star_three_protocols() {
        let base = star_center_fed(3, 1.0, 1.0).unwrap();
        for (protocol, want) in [
            (Protocol::Pull, 2.0),
            (Protocol::Push, 3.0),
            (Protocol::PushPull, 5.0 / 3.0),
        ] {
            let net = base.restrict_protocol(ProtocolMode::full(protocol));
            let v = solve_age(&net, &set(&[1])).unwrap();
            assert!((v - want).abs() < TOL, "{protocol}: {v}");
        }
    }

    #[test]
    fn leaf_fed_star_sets_with_fed_node_are_exact() {
        for n in [3, 5, 8] {
            let net = star_leaf_fed(n, 1.0, 1.0).unwrap();
            let mut solver = ExactSolver::new(&net).unwrap();
            for mask in 1..(1u64 << n) {
                if mask & 1 == 0 {
                    continue;
                }
                let v = solver.solve(&NodeSet::from_mask(mask)).unwrap();
                assert!((v - 1.0).abs() < TOL, "n={n} mask={mask:b}: {v}");
            }
        }
    }

    #[test]
    fn unreachable_sets_are_infinite() {
        let mut net = GossipNetwork::empty(3, 1.0);
        net.source_rates = vec![1.0, 0.0, 0.0];
        net.push_rates.insert((1, 2), 1.0);
        // node 3 only pushes outward and is never fed
        net.push_rates.insert((3, 2), 1.0);
        let ages = solve_all_singletons(&net).unwrap();
        assert!(ages.per_node[0].is_finite() && ages.per_node[1].is_finite());
        assert!(ages.per_node[2].is_infinite());
        assert!(ages.average().is_infinite());
        assert_eq!(ages.infinite_nodes(), vec![3]);
        assert!(solve_age(&net, &set(&[2, 3])).unwrap().is_finite());
    }

    #[test]
    fn nothing_fed_means_everything_infinite() {
        let mut net = GossipNetwork::empty(2, 0.0);
        net.push_rates.insert((1, 2), 1.0);
        assert!(solve_age(&net, &NodeSet::full(2)).unwrap().is_infinite());
        assert!(solve_age(&net, &set(&[2])).unwrap().is_infinite());
    }

    #[test]
    fn complete_network_singletons_agree() {
        let net = complete(6, 1.0, 1.0).unwrap();
        let ages = solve_all_singletons(&net).unwrap();
        for v in &ages.per_node {
            assert!((v - ages.per_node[0]).abs() < TOL);
        }
        assert!(ages.table.monotonicity_violation(TOL).is_none());
    }

    #[test]
    fn leaf_fed_star_singletons() {
        let net = star_leaf_fed(6, 1.0, 2.0).unwrap();
        let ages = solve_all_singletons(&net).unwrap();
        assert!((ages.per_node[0] - 2.0).abs() < TOL);
        for i in 2..5 {
            assert!((ages.per_node[i] - ages.per_node[1]).abs() < TOL);
        }
    }

    #[test]
    fn errors_on_empty_set_and_cap() {
        let net = star_center_fed(3, 1.0, 1.0).unwrap();
        assert!(matches!(
            solve_age(&net, &NodeSet::new()),
            Err(SolveError::Network(NetworkError::EmptySet))
        ));
        assert!(matches!(
            solve_age(&net, &set(&[4])),
            Err(SolveError::Network(NetworkError::SetOutOfRange { .. }))
        ));
        let big = GossipNetwork::empty(70, 1.0);
        assert!(matches!(
            ExactSolver::new(&big),
            Err(SolveError::TooLarge { n: 70, .. })
        ));
    }

    #[test]
    fn bounds_collapse_on_symmetric_neighborhood() {
        let net = complete(5, 1.0, 1.0).unwrap();
        let mut solver = ExactSolver::new(&net).unwrap();
        let s = set(&[1, 2]);
        let v = solver.solve(&s).unwrap();
        let b = solver.bounds(&s, &solver.table()).unwrap();
        assert!((b.lower - v).abs() < TOL && (b.upper - v).abs() < TOL);
    }

    #[test]
    fn bounds_bracket_star_leaf() {
        let net = star_center_fed(3, 1.0, 1.0).unwrap();
        let mut solver = ExactSolver::new(&net).unwrap();
        let v = solver.solve(&set(&[1])).unwrap();
        let b = solver.bounds(&set(&[1]), &solver.table()).unwrap();
        assert!(b.lower <= v + TOL && v <= b.upper + TOL, "{b:?} vs {v}");
    }

    #[test]
    fn bounds_need_superset_ages_and_handle_no_neighbors() {
        let net = star_center_fed(3, 1.0, 1.0).unwrap();
        let solver = ExactSolver::new(&net).unwrap();
        assert!(matches!(
            solver.bounds(&set(&[1]), &AgeTable::new()),
            Err(SolveError::MissingSuperset(_))
        ));
        let full = solver.bounds(&NodeSet::full(3), &AgeTable::new()).unwrap();
        assert_eq!(full, AgeBounds { lower: 1.0, upper: 1.0 });
    }

    #[test]
    fn bounds_hold_on_random_network_for_every_set() {
        let net = random_network(&RandomParams::new(6, 0.4, 42)).unwrap();
        let mut solver = ExactSolver::new(&net).unwrap();
        let full = (1u64 << 6) - 1;
        for mask in 1..full {
            solver.solve(&NodeSet::from_mask(mask)).unwrap();
        }
        let table = solver.table();
        for mask in 1..full {
            let s = NodeSet::from_mask(mask);
            let v = table.get(&s).unwrap();
            let b = solver.bounds(&s, &table).unwrap();
            assert!(b.lower <= v + TOL, "{s}: {b:?} vs {v}");
            assert!(v <= b.upper + TOL, "{s}: {b:?} vs {v}");
        }
    }
}
