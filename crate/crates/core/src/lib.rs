//! Version age of information in gossip networks.
//!
//! A source updates itself at rate `lambda_e` and injects its current
//! version into nodes; nodes exchange packets by push, pull or both. The
//! crate provides:
//!
//! - [`network`]: the rate model, node sets, protocol restriction and the
//!   push-only superposition of a push-pull network;
//! - [`topology`]: star, ring, complete and seeded random generators and
//!   the JSON network format;
//! - [`solver`]: the exact subset recursion for the limiting average age,
//!   its neighbour bounds, and an `O(n)` solver for the two star networks;
//! - [`sim`]: an event-driven Monte Carlo estimator with replications;
//! - [`experiment`]: CSV records and the figure presets used by the CLI.

pub mod experiment;
pub mod network;
pub mod sim;
pub mod solver;
pub mod topology;

pub use network::{GossipNetwork, NetworkError, NodeSet, Protocol, ProtocolMode};
pub use sim::{estimate, AgeEstimate, SimConfig, SimError};
pub use solver::{age_bounds, solve_age, solve_all_singletons, solve_star_reduced, AgeTable, SolveError};
