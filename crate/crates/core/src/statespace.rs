//! The feasible-state space of an idealized CSMA network.
//!
//! At any instant the set of transmitting links must be an independent set
//! of the contention graph — carrier sensing prevents two interfering links
//! from overlapping. The continuous-time dynamics (unit-rate transmissions,
//! rate-ρ countdown completions) form a reversible Markov chain over these
//! independent sets whose stationary distribution has the product form
//! `P(s) = ρ^|s| / Z`. This module enumerates the states, organizes them
//! into columns by cardinality, records the one-link-apart transition edges,
//! and evaluates the equilibrium quantities exactly (integer polynomials in
//! ρ) or numerically (at a concrete ρ).

use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::ContentionGraph;

/// Default cap on the number of enumerated states (2²²). The state space is
/// exponential in the number of links; past this size the dense analyses
/// downstream stop being practical anyway.
pub const DEFAULT_STATE_CAP: usize = 1 << 22;

/// Index of a state within a [`StateGraph`]'s canonical ordering.
pub type StateId = usize;

/// A set of concurrently transmitting links, packed as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SystemState(pub u64);

impl SystemState {
    /// The empty state: no link transmitting.
    pub const EMPTY: SystemState = SystemState(0);

    /// Number of active links (the state's column index).
    pub fn cardinality(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Whether link `i` is transmitting in this state.
    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    /// Iterates the active link indices in ascending order.
    pub fn links(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Debug for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.links().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// The column-structured transition diagram over all feasible states.
///
/// States are held in a canonical order — ascending cardinality, ties broken
/// by ascending bitmask value — so that state and trap identifiers are
/// reproducible run to run. Immutable after construction; all queries are
/// read-only and safe to share across threads.
pub struct StateGraph {
    graph: ContentionGraph,
    states: Vec<SystemState>,
    index: HashMap<u64, StateId>,
    /// `columns[n]` lists the ids of all cardinality-`n` states, ascending.
    columns: Vec<Vec<StateId>>,
    /// `up_edges[s]` = (state with one more link, the link added).
    up_edges: Vec<Vec<(StateId, usize)>>,
    /// `down_edges[s]` = (state with one fewer link, the link removed).
    down_edges: Vec<Vec<(StateId, usize)>>,
}

impl fmt::Debug for StateGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "StateGraph({} states, columns {:?})",
            self.states.len(),
            self.column_counts()
        )
    }
}

impl StateGraph {
    pub fn graph(&self) -> &ContentionGraph {
        &self.graph
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> SystemState {
        self.states[id]
    }

    /// Looks up a state's id by bitmask; `None` if the mask is infeasible.
    pub fn id_of(&self, state: SystemState) -> Option<StateId> {
        self.index.get(&state.0).copied()
    }

    /// Largest independent-set size (index of the last column).
    pub fn max_cardinality(&self) -> usize {
        self.columns.len() - 1
    }

    /// Ids of all states with exactly `n` active links.
    pub fn column(&self, n: usize) -> Result<&[StateId]> {
        self.columns.get(n).map(Vec::as_slice).ok_or(Error::ColumnOutOfRange {
            level: n,
            max: self.max_cardinality(),
        })
    }

    /// `c[n]` = number of independent sets of size `n`; also the exact
    /// coefficients of the normalizing polynomial Z(ρ).
    pub fn column_counts(&self) -> Vec<u64> {
        self.columns.iter().map(|c| c.len() as u64).collect()
    }

    pub fn up_edges(&self, s: StateId) -> &[(StateId, usize)] {
        &self.up_edges[s]
    }

    pub fn down_edges(&self, s: StateId) -> &[(StateId, usize)] {
        &self.down_edges[s]
    }

    /// JSON dump of the full diagram (bitmask states, column counts, and
    /// up-edge lists), for golden tests and external tooling.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Dump<'a> {
            states: &'a [SystemState],
            column_counts: Vec<u64>,
            up_edges: &'a [Vec<(StateId, usize)>],
        }
        serde_json::to_string(&Dump {
            states: &self.states,
            column_counts: self.column_counts(),
            up_edges: &self.up_edges,
        })
        .expect("state graph serialization cannot fail")
    }
}

/// Enumerates all independent sets of `g` with the default state cap.
pub fn enumerate_states(g: &ContentionGraph) -> Result<StateGraph> {
    enumerate_states_capped(g, DEFAULT_STATE_CAP)
}

/// Enumerates all independent sets, failing with [`Error::StateSpaceTooLarge`]
/// once more than `cap` states have been found.
pub fn enumerate_states_capped(g: &ContentionGraph, cap: usize) -> Result<StateGraph> {
    let n = g.n_links();
    let adjacency: Vec<u64> = (0..n).map(|i| g.neighbor_mask(i).expect("i < n")).collect();

    // Branch on each link in index order: either leave it out, or (when no
    // already-chosen neighbor blocks it) put it in. The blocked mask makes
    // infeasible branches die immediately.
    let mut states = Vec::new();
    fn recurse(
        link: usize,
        n: usize,
        current: u64,
        blocked: u64,
        adjacency: &[u64],
        out: &mut Vec<SystemState>,
        cap: usize,
    ) -> Result<()> {
        if link == n {
            if out.len() >= cap {
                return Err(Error::StateSpaceTooLarge { cap });
            }
            out.push(SystemState(current));
            return Ok(());
        }
        recurse(link + 1, n, current, blocked, adjacency, out, cap)?;
        if blocked & (1 << link) == 0 {
            recurse(
                link + 1,
                n,
                current | (1 << link),
                blocked | adjacency[link],
                adjacency,
                out,
                cap,
            )?;
        }
        Ok(())
    }
    recurse(0, n, 0, 0, &adjacency, &mut states, cap)?;

    states.sort_by_key(|s| (s.cardinality(), s.0));

    let index: HashMap<u64, StateId> =
        states.iter().enumerate().map(|(id, s)| (s.0, id)).collect();

    let max_card = states.last().map_or(0, |s| s.cardinality());
    let mut columns = vec![Vec::new(); max_card + 1];
    for (id, s) in states.iter().enumerate() {
        columns[s.cardinality()].push(id);
    }

    let mut up_edges = vec![Vec::new(); states.len()];
    let mut down_edges = vec![Vec::new(); states.len()];
    for (id, s) in states.iter().enumerate() {
        for i in 0..n {
            if !s.contains(i) && s.0 & adjacency[i] == 0 {
                let child = index[&(s.0 | (1 << i))];
                up_edges[id].push((child, i));
                down_edges[child].push((id, i));
            }
        }
    }
    for list in &mut down_edges {
        list.sort_by_key(|&(_, link)| link);
    }

    Ok(StateGraph { graph: g.clone(), states, index, columns, up_edges, down_edges })
}

/// Polynomial in the access intensity ρ with exact non-negative integer
/// coefficients; `coeffs[k]` multiplies ρ^k.
#[derive(Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RhoPolynomial {
    coeffs: Vec<u64>,
}

impl RhoPolynomial {
    /// Wraps a coefficient vector, trimming trailing zeros (the zero
    /// polynomial is represented as a single zero coefficient).
    pub fn new(mut coeffs: Vec<u64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0);
        }
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading_coefficient(&self) -> u64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs == [0]
    }

    /// Evaluates at a concrete ρ (Horner's rule).
    pub fn eval(&self, rho: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * rho + c as f64)
    }
}

impl fmt::Display for RhoPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0 && !(self.is_zero() && k == 0) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 if c == 1 => write!(f, "rho")?,
                1 => write!(f, "{c} rho")?,
                _ if c == 1 => write!(f, "rho^{k}")?,
                _ => write!(f, "{c} rho^{k}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for RhoPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RhoPolynomial({self})")
    }
}

/// The normalizing polynomial Z(ρ) = Σ_n c[n] ρ^n.
pub fn partition_polynomial(sg: &StateGraph) -> RhoPolynomial {
    RhoPolynomial::new(sg.column_counts())
}

/// Stationary probability of every state at access intensity `rho`:
/// `P(s) = ρ^|s| / Z(ρ)`, in the state graph's canonical order.
pub fn stationary_distribution(sg: &StateGraph, rho: f64) -> Vec<f64> {
    let z = partition_polynomial(sg).eval(rho);
    sg.states().iter().map(|s| rho.powi(s.cardinality() as i32) / z).collect()
}

/// Long-run fraction of time link `i` spends transmitting:
/// `Th_i = Σ_{s ∋ i} P(s)`.
pub fn link_throughput(sg: &StateGraph, rho: f64, i: usize) -> Result<f64> {
    let (num, den) = throughput_polynomials(sg, i)?;
    Ok(num.eval(rho) / den.eval(rho))
}

/// Exact numerator and denominator of link `i`'s equilibrium throughput as
/// integer polynomials in ρ: `numerator[n]` counts the size-`n` independent
/// sets containing `i`, and the denominator is Z's coefficient vector.
pub fn throughput_polynomials(
    sg: &StateGraph,
    i: usize,
) -> Result<(RhoPolynomial, RhoPolynomial)> {
    if i >= sg.graph().n_links() {
        return Err(Error::UnknownLink(i));
    }
    let mut num = vec![0u64; sg.max_cardinality() + 1];
    for s in sg.states() {
        if s.contains(i) {
            num[s.cardinality()] += 1;
        }
    }
    Ok((RhoPolynomial::new(num), partition_polynomial(sg)))
}

/// Limit of link `i`'s throughput as ρ → ∞, as an exact rational: the ratio
/// of the two polynomials' coefficients at the denominator's degree (zero if
/// the numerator's degree falls short, i.e. `i` is in no maximum independent
/// set).
pub fn asymptotic_throughput(sg: &StateGraph, i: usize) -> Result<Ratio<u64>> {
    let (num, den) = throughput_polynomials(sg, i)?;
    if num.degree() < den.degree() || num.is_zero() {
        return Ok(Ratio::new(0, 1));
    }
    Ok(Ratio::new(num.leading_coefficient(), den.leading_coefficient()))
}
