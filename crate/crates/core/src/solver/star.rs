//! Subset recursion on the two star networks, reduced by leaf symmetry.
//!
//! In both stars (center `n`) all leaves that the source does not feed
//! are interchangeable, so `v_S` depends only on how many of them `S`
//! holds, whether `S` holds the center, and, for the leaf-fed star, whether
//! `S` holds the fed leaf `1`. That leaves `O(n)` classes instead of `2^n`
//! sets.

use crate::network::{NetworkError, NodeSet, ProtocolMode};

use super::SolveError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StarVariant {
    /// The source feeds the center.
    CenterFed,
    /// The source feeds leaf 1.
    LeafFed,
}

/// One equivalence class of node sets in a star.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StarClass {
    /// Number of interchangeable (unfed) leaves in the set.
    pub leaves: usize,
    /// Whether the fed leaf (node 1) is in the set. Always false for
    /// [`StarVariant::CenterFed`].
    pub fed_leaf: bool,
    pub center: bool,
}

/// Class ages of a star, indexed by `(fed_leaf, center)` layer and leaf count.
#[derive(Debug, Clone)]
pub struct StarSolution {
    pub variant: StarVariant,
    pub n: usize,
    /// Age of the node the source feeds.
    pub fed: f64,
    pub center: f64,
    /// Age of any single unfed leaf.
    pub leaf: f64,
    layers: [Vec<f64>; 4],
}

fn layer_index(fed_leaf: bool, center: bool) -> usize {
    (fed_leaf as usize) * 2 + center as usize
}

impl StarSolution {
    /// Number of interchangeable leaves.
    pub fn symmetric_leaves(&self) -> usize {
        match self.variant {
            StarVariant::CenterFed => self.n - 1,
            StarVariant::LeafFed => self.n - 2,
        }
    }

    /// Age of a class, or `None` for the empty set or an impossible class.
    pub fn class_age(&self, class: StarClass) -> Option<f64> {
        if class.leaves > self.symmetric_leaves()
            || (class.fed_leaf && self.variant == StarVariant::CenterFed)
            || (class.leaves == 0 && !class.fed_leaf && !class.center)
        {
            return None;
        }
        self.layers[layer_index(class.fed_leaf, class.center)]
            .get(class.leaves)
            .copied()
    }

    /// The class a concrete node set belongs to.
    pub fn classify(&self, set: &NodeSet) -> Result<StarClass, SolveError> {
        if set.is_empty() {
            return Err(NetworkError::EmptySet.into());
        }
        if set.contains(0) || set.max_node().is_some_and(|m| m > self.n) {
            return Err(NetworkError::SetOutOfRange {
                set: set.clone(),
                n: self.n,
            }
            .into());
        }
        let center = set.contains(self.n);
        let fed_leaf = self.variant == StarVariant::LeafFed && set.contains(1);
        let leaves = set.len() - center as usize - fed_leaf as usize;
        Ok(StarClass {
            leaves,
            fed_leaf,
            center,
        })
    }

    pub fn age_of_set(&self, set: &NodeSet) -> Result<f64, SolveError> {
        let class = self.classify(set)?;
        Ok(self
            .class_age(class)
            .expect("classify only yields valid classes"))
    }

    /// Every stored class with its age.
    pub fn classes(&self) -> impl Iterator<Item = (StarClass, f64)> + '_ {
        [(false, false), (false, true), (true, false), (true, true)]
            .into_iter()
            .flat_map(move |(fed_leaf, center)| {
                self.layers[layer_index(fed_leaf, center)]
                    .iter()
                    .enumerate()
                    .map(move |(leaves, &age)| {
                        (
                            StarClass {
                                leaves,
                                fed_leaf,
                                center,
                            },
                            age,
                        )
                    })
            })
            .filter(|&(class, _)| self.class_age(class).is_some())
    }
}

fn ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        numerator / denominator
    } else {
        f64::INFINITY
    }
}

/// Exact star ages for the star built by `star_center_fed` /
/// `star_leaf_fed` with the same `(n, lambda, lambda_e)` under `mode`.
pub fn solve_star_reduced(
    variant: StarVariant,
    mode: ProtocolMode,
    n: usize,
    lambda: f64,
    lambda_e: f64,
) -> Result<StarSolution, SolveError> {
    if n < 3 {
        return Err(SolveError::BadArgument(format!(
            "reduced star solver needs n >= 3, got {n}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0 && lambda_e.is_finite() && lambda_e >= 0.0) {
        return Err(SolveError::BadArgument(format!(
            "need lambda > 0 and lambda_e >= 0, got {lambda} and {lambda_e}"
        )));
    }
    let spread = lambda / (n - 1) as f64;
    let protocol = mode.protocol();
    let push = if protocol.uses_push() { mode.scale() } else { 0.0 };
    let pull = if protocol.uses_pull() { mode.scale() } else { 0.0 };
    // Flow rate leaf -> center (leaf pushes, center pulls) and
    // center -> leaf (center pushes, leaf pulls).
    let to_center = lambda * push + spread * pull;
    let to_leaf = spread * push + lambda * pull;

    let leaf_fed = variant == StarVariant::LeafFed;
    let m = if leaf_fed { n - 2 } else { n - 1 };
    let source_rate = |fed_leaf: bool, center: bool| -> f64 {
        let fed = if leaf_fed { fed_leaf } else { center };
        if fed {
            lambda
        } else {
            0.0
        }
    };

    let mut layers: [Vec<f64>; 4] = std::array::from_fn(|_| vec![f64::NAN; m + 1]);
    let fed_layers: &[bool] = if leaf_fed { &[true, false] } else { &[false] };

    // Center in S: outside leaves join at `to_center` each.
    for &fed_leaf in fed_layers {
        for k in (0..=m).rev() {
            let mut num = lambda_e;
            let mut den = source_rate(fed_leaf, true);
            let outside = (m - k) as f64;
            if k < m && to_center > 0.0 {
                let w = outside * to_center;
                num += w * layers[layer_index(fed_leaf, true)][k + 1];
                den += w;
            }
            if leaf_fed && !fed_leaf && to_center > 0.0 {
                num += to_center * layers[layer_index(true, true)][k];
                den += to_center;
            }
            layers[layer_index(fed_leaf, true)][k] = ratio(num, den);
        }
    }
    // Center outside S: only the center can feed S, at `to_leaf` per leaf in S.
    for &fed_leaf in fed_layers {
        #[allow(clippy::needless_range_loop)]
        for k in 0..=m {
            let held = k + fed_leaf as usize;
            if held == 0 {
                continue;
            }
            let mut num = lambda_e;
            let mut den = source_rate(fed_leaf, false);
            if to_leaf > 0.0 {
                let w = held as f64 * to_leaf;
                num += w * layers[layer_index(fed_leaf, true)][k];
                den += w;
            }
            layers[layer_index(fed_leaf, false)][k] = ratio(num, den);
        }
    }

    let center = layers[layer_index(false, true)][0];
    let leaf = layers[layer_index(false, false)][1];
    let fed = if leaf_fed {
        layers[layer_index(true, false)][0]
    } else {
        center
    };
    Ok(StarSolution {
        variant,
        n,
        fed,
        center,
        leaf,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Protocol;

    #[test]
    fn center_fed_pull_three_nodes() {
        let sol = solve_star_reduced(
            StarVariant::CenterFed,
            ProtocolMode::full(Protocol::Pull),
            3,
            1.0,
            1.0,
        )
        .unwrap();
        assert!((sol.leaf - 2.0).abs() < 1e-9);
        assert_eq!(sol.fed, sol.center);
    }

    #[test]
    fn rejects_small_n() {
        assert!(solve_star_reduced(StarVariant::LeafFed, ProtocolMode::default(), 2, 1.0, 1.0).is_err());
    }

    #[test]
    fn classify_sets() {
        let sol = solve_star_reduced(StarVariant::LeafFed, ProtocolMode::default(), 6, 1.0, 1.0).unwrap();
        let class = sol.classify(&"{1,3,6}".parse().unwrap()).unwrap();
        assert_eq!(
            class,
            StarClass {
                leaves: 1,
                fed_leaf: true,
                center: true
            }
        );
        assert!(sol.classify(&NodeSet::new()).is_err());
        assert!(sol.classify(&NodeSet::singleton(7)).is_err());
        assert_eq!(sol.classes().count(), 4 * 5 - 1);
        let cf = solve_star_reduced(StarVariant::CenterFed, ProtocolMode::default(), 6, 1.0, 1.0).unwrap();
        assert_eq!(cf.classes().count(), 2 * 6 - 1);
    }
}
