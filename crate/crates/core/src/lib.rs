//! Temporal starvation analysis for CSMA wireless networks.
//!
//! In a carrier-sense network, links that look healthy on long-run average
//! throughput can still starve for seconds at a time: the network settles
//! into one set of mutually compatible transmitters, and everyone else waits
//! until a rare sequence of events dislodges it. This crate quantifies that
//! effect for the idealized-CSMA model:
//!
//! * [`graph`] — contention graphs describing which links interfere;
//! * [`statespace`] — the reversible Markov chain over independent sets of
//!   active links, its product-form stationary distribution, and per-link
//!   equilibrium throughput;
//! * [`traps`] — hierarchical decomposition of the state space into traps,
//!   the regions responsible for temporal starvation;
//! * [`sojourn`] — how long the chain stays inside a trap once captured
//!   (birth–death aggregation, closed forms, and an exact linear-system
//!   oracle);
//! * [`passage`] — how long a starved link waits for its trap to be entered,
//!   via a simplified chain that collapses each trap to a point;
//! * [`sim`] — an event-driven simulator of the same model, used to validate
//!   every analytical quantity against sample paths;
//! * [`report`] — starvation classification and a unified equilibrium +
//!   temporal starvation bound.
//!
//! Throughput is normalized so the mean transmission duration is 1; the one
//! free parameter is the access intensity `rho`, the ratio of mean
//! transmission time to mean backoff countdown time.

pub mod error;
pub mod graph;
pub mod passage;
pub mod report;
pub mod sim;
pub mod sojourn;
pub mod solve;
pub mod statespace;
pub mod traps;

pub use error::{Error, Result};
pub use graph::ContentionGraph;
// `Ratio` appears in public signatures (asymptotic throughputs, sojourn
// coefficients); re-export it so downstream code can name those results
// without depending on num-rational directly.
pub use num_rational::Ratio;
pub use report::{StarvationReport, Thresholds};
pub use sim::{DistributionSpec, SimConfig, SimTrace};
pub use statespace::{StateGraph, SystemState};
pub use traps::{Trap, TrapForest};

/// Access intensity of a typical IEEE 802.11 deployment (mean transmission
/// time over mean backoff time), used as the reference operating point.
pub const TYPICAL_ACCESS_INTENSITY: f64 = 5.35;
