//! Expected first-passage time between traps.
//!
//! Between long stays in traps the process moves quickly, so passage times
//! are computed on a *simplified chain*: every trap in a pairwise-disjoint
//! trap set collapses to a single node that holds the process for its
//! ergodic sojourn time and then exits through its bottom column, while all
//! remaining states keep their original dynamics. Expected hitting times on
//! this much smaller chain approximate first-passage times on the full
//! state space — exactly in the symmetric fixtures, and within a few percent
//! elsewhere (the trap sojourn is treated as exponential, which is the one
//! approximation inherent to the method).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sojourn::sojourn_time;
use crate::solve::solve_dense;
use crate::statespace::{StateGraph, StateId};
use crate::traps::{Trap, TrapForest};

/// Identity of a node in the simplified chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    /// A state of the full diagram that belongs to no selected trap.
    State(StateId),
    /// A whole trap, collapsed; the payload indexes the trap slice the
    /// chain was built from.
    Trap(usize),
}

/// The collapsed-trap jump chain: per-node total exit rates and jump
/// distributions.
pub struct SimplifiedChain {
    nodes: Vec<Node>,
    /// Maps every StateId of the full diagram to its node index.
    node_of_state: Vec<usize>,
    /// Node index of each trap in the slice the chain was built from.
    trap_nodes: Vec<usize>,
    /// ν̂: total rate of leaving each node.
    exit_rates: Vec<f64>,
    /// Per node: (target node, probability), sorted by target.
    jump_probs: Vec<Vec<(usize, f64)>>,
}

impl SimplifiedChain {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, idx: usize) -> Node {
        self.nodes[idx]
    }

    /// Node holding the given full-diagram state.
    pub fn node_of_state(&self, id: StateId) -> usize {
        self.node_of_state[id]
    }

    /// Node of the k-th trap passed to [`build_simplified_chain`].
    pub fn node_of_trap(&self, k: usize) -> usize {
        self.trap_nodes[k]
    }

    /// Total rate ν̂ of leaving this node.
    pub fn exit_rate(&self, idx: usize) -> f64 {
        self.exit_rates[idx]
    }

    /// Jump distribution of this node, sorted by target node index.
    pub fn jump_probs(&self, idx: usize) -> &[(usize, f64)] {
        &self.jump_probs[idx]
    }
}

/// Chooses the trap set for a passage computation: the two endpoints plus
/// every further trap that fits disjointly, taken deepest-first (ties by
/// id) so the selection is deterministic. Errors with [`Error::NestedTraps`]
/// when the endpoints themselves overlap — their passage time is defined as
/// zero and the caller handles it.
pub fn select_trap_set(forest: &TrapForest, i: usize, j: usize) -> Result<Vec<usize>> {
    let ti = forest.get(i).ok_or(Error::Validation(format!("no trap {i}")))?;
    let tj = forest.get(j).ok_or(Error::Validation(format!("no trap {j}")))?;
    if i == j {
        return Err(Error::InvalidParameter("passage endpoints must differ".into()));
    }
    if overlaps(ti, tj) {
        return Err(Error::NestedTraps);
    }
    let mut selected = vec![i, j];
    let mut candidates: Vec<&Trap> = forest.traps().iter().collect();
    candidates.sort_by_key(|t| (std::cmp::Reverse(t.depth), t.id));
    for t in candidates {
        if selected.contains(&t.id) {
            continue;
        }
        if selected.iter().all(|&sid| !overlaps(t, forest.get(sid).unwrap())) {
            selected.push(t.id);
        }
    }
    selected.sort_unstable();
    Ok(selected)
}

fn overlaps(a: &Trap, b: &Trap) -> bool {
    // In a trap forest two traps intersect only as ancestor/descendant, but
    // the direct state check is cheap and assumes nothing.
    let (small, large) = if a.states.len() <= b.states.len() { (a, b) } else { (b, a) };
    small.states.iter().any(|&id| large.contains_state(id))
}

/// Builds the simplified chain over a pairwise-disjoint trap set.
///
/// Non-trap states keep their full-diagram dynamics: total rate
/// `ν = m + n·ρ` (m transmissions running, n countdowns live), downward
/// jumps with probability `1/ν` each and upward with `ρ/ν` each, where jumps
/// into any member of a selected trap merge onto that trap's node. A trap
/// node exits at rate `1 / T_V` (its ergodic sojourn time) and lands on each
/// state below its bottom column with probability proportional to the
/// number of transitions connecting that state into the column.
pub fn build_simplified_chain(
    sg: &StateGraph,
    traps: &[&Trap],
    rho: f64,
) -> SimplifiedChain {
    for (a, ta) in traps.iter().enumerate() {
        for tb in &traps[a + 1..] {
            assert!(!overlaps(ta, tb), "trap set must be pairwise disjoint");
        }
    }

    // Nodes: non-trap states in ascending id order, then one node per trap.
    let mut node_of_state = vec![usize::MAX; sg.n_states()];
    let mut nodes = Vec::new();
    for id in 0..sg.n_states() {
        if traps.iter().all(|t| !t.contains_state(id)) {
            node_of_state[id] = nodes.len();
            nodes.push(Node::State(id));
        }
    }
    let mut trap_nodes = Vec::with_capacity(traps.len());
    for (k, t) in traps.iter().enumerate() {
        let node = nodes.len();
        nodes.push(Node::Trap(k));
        trap_nodes.push(node);
        for &id in &t.states {
            node_of_state[id] = node;
        }
    }

    let mut exit_rates = vec![0.0; nodes.len()];
    let mut jump_probs = vec![Vec::new(); nodes.len()];
    let accumulate = |weights: &mut HashMap<usize, f64>, node: usize, w: f64| {
        *weights.entry(node).or_insert(0.0) += w;
    };

    for (idx, &node) in nodes.iter().enumerate() {
        let mut weights: HashMap<usize, f64> = HashMap::new();
        match node {
            Node::State(id) => {
                let m = sg.state(id).cardinality() as f64;
                let n = sg.up_edges(id).len() as f64;
                let nu = m + n * rho;
                exit_rates[idx] = nu;
                for &(down, _) in sg.down_edges(id) {
                    accumulate(&mut weights, node_of_state[down], 1.0 / nu);
                }
                for &(up, _) in sg.up_edges(id) {
                    accumulate(&mut weights, node_of_state[up], rho / nu);
                }
            }
            Node::Trap(k) => {
                let trap = traps[k];
                exit_rates[idx] = 1.0 / sojourn_time(sg, trap, rho).value;
                let bottom: Vec<StateId> = trap
                    .states
                    .iter()
                    .copied()
                    .filter(|&id| sg.state(id).cardinality() == trap.level)
                    .collect();
                let total = (bottom.len() * trap.level) as f64;
                for &id in &bottom {
                    for &(down, _) in sg.down_edges(id) {
                        accumulate(&mut weights, node_of_state[down], 1.0 / total);
                    }
                }
            }
        }
        let mut probs: Vec<(usize, f64)> = weights.into_iter().collect();
        probs.sort_by_key(|&(target, _)| target);
        jump_probs[idx] = probs;
    }

    SimplifiedChain { nodes, node_of_state, trap_nodes, exit_rates, jump_probs }
}

/// Expected first-passage time from trap `i` to trap `j` on the simplified
/// chain, in units of mean transmission time. Returns 0 when one endpoint
/// contains the other (the process is already inside the deeper one).
pub fn first_passage(
    sg: &StateGraph,
    forest: &TrapForest,
    i: usize,
    j: usize,
    rho: f64,
) -> Result<f64> {
    let selected = match select_trap_set(forest, i, j) {
        Ok(set) => set,
        Err(Error::NestedTraps) => return Ok(0.0),
        Err(e) => return Err(e),
    };
    let traps: Vec<&Trap> = selected.iter().map(|&id| forest.get(id).unwrap()).collect();
    let chain = build_simplified_chain(sg, &traps, rho);
    let source = chain.node_of_trap(selected.iter().position(|&id| id == i).unwrap());
    let target = chain.node_of_trap(selected.iter().position(|&id| id == j).unwrap());
    expected_hitting_time(&chain, source, target)
}

/// Solves `e_s = 1/ν̂_s + Σ_{s'} p(s→s')·e_{s'}` with `e_target = 0` and
/// returns `e_source`.
fn expected_hitting_time(chain: &SimplifiedChain, source: usize, target: usize) -> Result<f64> {
    if source == target {
        return Ok(0.0);
    }
    // Unknowns: all nodes except the target, renumbered densely.
    let n = chain.n_nodes() - 1;
    let row_of = |node: usize| if node < target { node } else { node - 1 };
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for node in 0..chain.n_nodes() {
        if node == target {
            continue;
        }
        let r = row_of(node);
        a[r * n + r] += 1.0;
        b[r] = 1.0 / chain.exit_rate(node);
        for &(next, p) in chain.jump_probs(node) {
            if next != target {
                a[r * n + row_of(next)] -= p;
            }
        }
    }
    let e = solve_dense(n, a, b)?;
    Ok(e[row_of(source)])
}
