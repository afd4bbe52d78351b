//! Hierarchical trap decomposition of the state space.
//!
//! Truncate the transition diagram at column `l` — keep only states with at
//! least `l` active links — and it can fall apart into disconnected pieces.
//! A piece spanning two or more columns is a *trap*: once the process wanders
//! in, it can only leave through the bottleneck states of column `l`, and at
//! high access intensity it stays for a long time. Links absent from every
//! state of the trap transmit nothing for that entire stay, which is exactly
//! the temporal-starvation mechanism this crate quantifies.
//!
//! Traps nest: re-truncating a trap's own states at higher columns can split
//! it again into sub-traps. `find_traps` builds the full forest.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::statespace::{partition_polynomial, RhoPolynomial, StateGraph, StateId};

/// One region of the state space that captures the process.
///
/// `states` is sorted ascending by id (so ascending by cardinality, then by
/// bitmask), `roots` are the members of maximum cardinality, and `depth` is
/// that maximum cardinality minus `level`. Ids index into the owning
/// [`TrapForest`] and are stable for a given input graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trap {
    pub id: usize,
    /// Leftmost retained column: every member has at least this many links.
    pub level: usize,
    /// Number of columns above the level; always ≥ 1.
    pub depth: usize,
    pub states: Vec<StateId>,
    pub roots: Vec<StateId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

impl Trap {
    /// Cardinality of the roots (`level + depth`).
    pub fn max_cardinality(&self) -> usize {
        self.level + self.depth
    }

    /// Whether state `id` belongs to this trap.
    pub fn contains_state(&self, id: StateId) -> bool {
        self.states.binary_search(&id).is_ok()
    }

    /// Whether any member state has link `i` active.
    pub fn involves_link(&self, sg: &StateGraph, i: usize) -> bool {
        self.states.iter().any(|&id| sg.state(id).contains(i))
    }

    /// Member states grouped by cardinality: entry `k` holds the members
    /// with `level + k` active links, for `k` in `0..=depth`.
    pub fn columns(&self, sg: &StateGraph) -> Vec<Vec<StateId>> {
        let mut cols = vec![Vec::new(); self.depth + 1];
        for &id in &self.states {
            cols[sg.state(id).cardinality() - self.level].push(id);
        }
        cols
    }

    /// `|A_{level+k}|` for `k` in `0..=depth`.
    pub fn column_sizes(&self, sg: &StateGraph) -> Vec<usize> {
        self.columns(sg).iter().map(Vec::len).collect()
    }
}

/// The trap hierarchy of one state graph. Possibly empty: networks whose
/// truncated diagrams never disconnect (rings, short chains) have no traps.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrapForest {
    traps: Vec<Trap>,
    first_level: Vec<usize>,
}

impl TrapForest {
    pub fn traps(&self) -> &[Trap] {
        &self.traps
    }

    pub fn get(&self, id: usize) -> Option<&Trap> {
        self.traps.get(id)
    }

    /// Ids of the traps found at the outermost decomposition level.
    pub fn first_level(&self) -> &[usize] {
        &self.first_level
    }

    pub fn len(&self) -> usize {
        self.traps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traps.is_empty()
    }
}

/// The state graph restricted to columns `level` and above.
pub struct TruncatedView<'a> {
    sg: &'a StateGraph,
    level: usize,
    retained: Vec<StateId>,
}

impl<'a> TruncatedView<'a> {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Retained state ids, ascending.
    pub fn states(&self) -> &[StateId] {
        &self.retained
    }

    /// Connected components over the retained states and the edges between
    /// them, each sorted ascending, ordered by smallest member state.
    pub fn connected_components(&self) -> Vec<Vec<StateId>> {
        components_within(self.sg, &self.retained, self.level)
    }
}

/// Restricts `sg` to states with at least `l` active links.
pub fn truncate(sg: &StateGraph, l: usize) -> Result<TruncatedView<'_>> {
    if l > sg.max_cardinality() {
        return Err(Error::ColumnOutOfRange { level: l, max: sg.max_cardinality() });
    }
    let retained = (0..sg.n_states())
        .filter(|&id| sg.state(id).cardinality() >= l)
        .collect();
    Ok(TruncatedView { sg, level: l, retained })
}

/// Connected components of `members` (must be sorted ascending) after
/// dropping states below column `l`, using only edges internal to the set.
fn components_within(sg: &StateGraph, members: &[StateId], l: usize) -> Vec<Vec<StateId>> {
    let retained: Vec<StateId> = members
        .iter()
        .copied()
        .filter(|&id| sg.state(id).cardinality() >= l)
        .collect();
    let in_set: HashSet<StateId> = retained.iter().copied().collect();
    let mut seen: HashSet<StateId> = HashSet::new();
    let mut comps = Vec::new();
    for &start in &retained {
        if seen.contains(&start) {
            continue;
        }
        seen.insert(start);
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(s) = stack.pop() {
            comp.push(s);
            let neighbors = sg.up_edges(s).iter().chain(sg.down_edges(s).iter());
            for &(nb, _) in neighbors {
                if in_set.contains(&nb) && seen.insert(nb) {
                    stack.push(nb);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Whether a component spans more than one column once truncated at `l`.
/// (Every component of a truncation touches its own column `l`, so this is
/// equivalent to containing a state above `l`; equivalently, to having more
/// than one state, since equal-cardinality states are never adjacent.)
fn spans_multiple_columns(sg: &StateGraph, comp: &[StateId], l: usize) -> bool {
    comp.iter().any(|&id| sg.state(id).cardinality() > l)
}

/// Decomposes the state space into its trap forest.
///
/// Scans `l = 1, 2, …` for the smallest truncation that disconnects the
/// diagram into at least two components with at least one spanning two or
/// more columns; those multi-column components are the first-level traps.
/// Each trap is then re-truncated over its own states (scanning from its
/// level + 1) and split the same way, recursively, until nothing decomposes
/// further. Returns an empty forest when no truncation ever disconnects the
/// diagram — such networks have no temporal-starvation structure.
pub fn find_traps(sg: &StateGraph) -> TrapForest {
    find_traps_filtered(sg, 1)
}

/// [`find_traps`] keeping only traps of at least `min_depth` columns above
/// their level. Children are always at least one column shallower than their
/// parent, so the filter prunes whole subtrees.
pub fn find_traps_filtered(sg: &StateGraph, min_depth: usize) -> TrapForest {
    let min_depth = min_depth.max(1);
    let mut forest = TrapForest::default();
    let all: Vec<StateId> = (0..sg.n_states()).collect();
    if let Some((l, comps)) = first_split(sg, &all, 1) {
        for comp in comps {
            let id = add_trap(sg, &mut forest, comp, l, None, min_depth);
            if let Some(id) = id {
                forest.first_level.push(id);
            }
        }
    }
    forest
}

/// Finds the smallest `l ≥ from` at which `members` splits into two or more
/// components with at least one spanning multiple columns; returns that `l`
/// and the multi-column components only.
fn first_split(
    sg: &StateGraph,
    members: &[StateId],
    from: usize,
) -> Option<(usize, Vec<Vec<StateId>>)> {
    let top = members
        .iter()
        .map(|&id| sg.state(id).cardinality())
        .max()
        .unwrap_or(0);
    for l in from..=top {
        let comps = components_within(sg, members, l);
        if comps.len() < 2 {
            continue;
        }
        let multi: Vec<Vec<StateId>> = comps
            .into_iter()
            .filter(|c| spans_multiple_columns(sg, c, l))
            .collect();
        if !multi.is_empty() {
            return Some((l, multi));
        }
    }
    None
}

/// Registers one trap and recursively decomposes it; returns its id, or
/// `None` when the depth filter prunes it (and therefore its subtree).
fn add_trap(
    sg: &StateGraph,
    forest: &mut TrapForest,
    states: Vec<StateId>,
    level: usize,
    parent: Option<usize>,
    min_depth: usize,
) -> Option<usize> {
    let top = states.iter().map(|&id| sg.state(id).cardinality()).max().unwrap();
    let depth = top - level;
    if depth < min_depth {
        return None;
    }
    let roots: Vec<StateId> = states
        .iter()
        .copied()
        .filter(|&id| sg.state(id).cardinality() == top)
        .collect();
    let id = forest.traps.len();
    forest.traps.push(Trap {
        id,
        level,
        depth,
        states: states.clone(),
        roots,
        parent,
        children: Vec::new(),
    });
    if let Some((l, comps)) = first_split(sg, &states, level + 1) {
        for comp in comps {
            if let Some(child) = add_trap(sg, forest, comp, l, Some(id), min_depth) {
                forest.traps[id].children.push(child);
            }
        }
    }
    Some(id)
}

/// Throughput of link `i` conditioned on the process being inside the trap:
/// the stationary weight of member states where `i` is active, over the
/// weight of all member states. The normalizing constant cancels.
pub fn conditional_throughput(
    sg: &StateGraph,
    trap: &Trap,
    rho: f64,
    i: usize,
) -> Result<f64> {
    if i >= sg.graph().n_links() {
        return Err(Error::UnknownLink(i));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &id in &trap.states {
        let s = sg.state(id);
        let w = rho.powi(s.cardinality() as i32);
        den += w;
        if s.contains(i) {
            num += w;
        }
    }
    Ok(num / den)
}

/// Links whose conditional throughput inside the trap falls below
/// `th_temp` — the links that starve for the whole of a visit to the trap.
/// Returned ascending.
pub fn starving_links(sg: &StateGraph, trap: &Trap, rho: f64, th_temp: f64) -> Vec<usize> {
    (0..sg.graph().n_links())
        .filter(|&i| {
            conditional_throughput(sg, trap, rho, i).expect("link index in range") < th_temp
        })
        .collect()
}

/// Stationary probability of finding the process inside the trap.
pub fn trap_probability(sg: &StateGraph, trap: &Trap, rho: f64) -> f64 {
    let (num, den) = trap_probability_polynomials(sg, trap);
    num.eval(rho) / den.eval(rho)
}

/// The trap's stationary probability as an exact ratio of integer
/// polynomials: the numerator counts member states per column, the
/// denominator is the full normalizing polynomial Z.
pub fn trap_probability_polynomials(
    sg: &StateGraph,
    trap: &Trap,
) -> (RhoPolynomial, RhoPolynomial) {
    let mut counts = vec![0u64; trap.max_cardinality() + 1];
    for &id in &trap.states {
        counts[sg.state(id).cardinality()] += 1;
    }
    (RhoPolynomial::new(counts), partition_polynomial(sg))
}

/// Traps in which link `i` never transmits: no member state contains `i`,
/// so `i` is silent for the entire duration of every visit. Returned as
/// ascending trap ids.
pub fn frozen_traps(sg: &StateGraph, forest: &TrapForest, i: usize) -> Result<Vec<usize>> {
    if i >= sg.graph().n_links() {
        return Err(Error::UnknownLink(i));
    }
    Ok(forest
        .traps()
        .iter()
        .filter(|t| !t.involves_link(sg, i))
        .map(|t| t.id)
        .collect())
}

#[derive(Serialize)]
struct TrapRecord {
    id: usize,
    level: usize,
    depth: usize,
    roots: Vec<u64>,
    state_count: usize,
    parent: Option<usize>,
    starving_links: Vec<usize>,
    probability_at_rho: f64,
}

/// Serializes the forest as a JSON array of per-trap records, with roots as
/// state bitmasks and the ρ-dependent fields evaluated at the given point.
pub fn forest_to_json(sg: &StateGraph, forest: &TrapForest, rho: f64, th_temp: f64) -> String {
    let records: Vec<TrapRecord> = forest
        .traps()
        .iter()
        .map(|t| TrapRecord {
            id: t.id,
            level: t.level,
            depth: t.depth,
            roots: t.roots.iter().map(|&id| sg.state(id).0).collect(),
            state_count: t.states.len(),
            parent: t.parent,
            starving_links: starving_links(sg, t, rho, th_temp),
            probability_at_rho: trap_probability(sg, t, rho),
        })
        .collect();
    serde_json::to_string(&records).expect("trap forest serialization cannot fail")
}
