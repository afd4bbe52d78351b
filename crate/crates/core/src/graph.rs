//! Contention graphs: which pairs of wireless links can hear each other.
//!
//! A vertex is a link (a transmitter–receiver pair) and an edge joins two
//! links whose transmissions interfere, so carrier sensing forbids them from
//! being active simultaneously. Everything downstream — the state space, the
//! trap decomposition, the simulator — is driven by this adjacency structure.
//!
//! Link indices are 0-based internally. Human-facing output (reports, CLI)
//! may add 1 to match the usual figure labelling conventions.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of links so that a system state (a set of
/// concurrently-active links) fits in a single `u64` bitmask.
pub const MAX_LINKS: usize = 63;

/// An undirected conflict graph over wireless links.
///
/// Immutable after construction, so it is safe to share across threads
/// (e.g. between parallel simulation runs).
#[derive(Clone, PartialEq, Eq)]
pub struct ContentionGraph {
    n_links: usize,
    /// Normalized edge set: each pair stored once as `(min, max)`.
    edges: BTreeSet<(usize, usize)>,
    /// `adjacency[i]` has bit `j` set iff links `i` and `j` interfere.
    adjacency: Vec<u64>,
}

/// Serialized form of a graph file: `{"links": N, "edges": [[i,j], ...]}`.
#[derive(Serialize, Deserialize)]
struct GraphFile {
    links: usize,
    edges: Vec<(usize, usize)>,
}

impl ContentionGraph {
    /// Builds a graph from a link count and an edge list.
    ///
    /// Rejects self-loops, duplicate edges (in either orientation),
    /// out-of-range indices, and more than [`MAX_LINKS`] links.
    pub fn new(n_links: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n_links == 0 {
            return Err(Error::Validation("graph must have at least one link".into()));
        }
        if n_links > MAX_LINKS {
            return Err(Error::Validation(format!(
                "{n_links} links exceeds the maximum of {MAX_LINKS}"
            )));
        }
        let mut edges = BTreeSet::new();
        for &(a, b) in edge_list {
            if a == b {
                return Err(Error::Validation(format!("self-loop on link {a}")));
            }
            if a >= n_links || b >= n_links {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a link outside 0..{n_links}"
                )));
            }
            let pair = (a.min(b), a.max(b));
            if !edges.insert(pair) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    pair.0, pair.1
                )));
            }
        }
        let mut adjacency = vec![0u64; n_links];
        for &(a, b) in &edges {
            adjacency[a] |= 1 << b;
            adjacency[b] |= 1 << a;
        }
        Ok(Self { n_links, edges, adjacency })
    }

    /// Number of links (vertices).
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    /// Number of interference edges.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in normalized `(min, max)` form, lexicographically sorted.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Bitmask of the links adjacent to `i`.
    pub fn neighbor_mask(&self, i: usize) -> Result<u64> {
        self.adjacency.get(i).copied().ok_or(Error::UnknownLink(i))
    }

    /// Number of links adjacent to `i`.
    pub fn degree(&self, i: usize) -> Result<usize> {
        Ok(self.neighbor_mask(i)?.count_ones() as usize)
    }

    /// Whether links `a` and `b` interfere.
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n_links && b < self.n_links && self.adjacency[a] & (1 << b) != 0
    }

    /// Parses the JSON graph-file format.
    pub fn parse(text: &str) -> Result<Self> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.links, &file.edges)
    }

    /// Serializes to the JSON graph-file format, edges sorted
    /// lexicographically so output is stable.
    pub fn to_json(&self) -> String {
        let file = GraphFile {
            links: self.n_links,
            edges: self.edges.iter().copied().collect(),
        };
        serde_json::to_string(&file).expect("graph serialization cannot fail")
    }
}

impl fmt::Debug for ContentionGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentionGraph({} links, {} edges)", self.n_links, self.edges.len())
    }
}

/// Ring of `n` links: link `i` interferes with links `i±1 (mod n)`.
pub fn gen_ring(n: usize) -> Result<ContentionGraph> {
    if n < 3 {
        return Err(Error::InvalidSize(format!("ring needs at least 3 links, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    ContentionGraph::new(n, &edges)
}

/// Path of `n` links: link `i` interferes with `i+1`.
pub fn gen_linear(n: usize) -> Result<ContentionGraph> {
    if n < 1 {
        return Err(Error::InvalidSize("linear network needs at least 1 link".into()));
    }
    let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    ContentionGraph::new(n, &edges)
}

/// `rows × cols` lattice of links with 4-neighborhood interference.
pub fn gen_grid(rows: usize, cols: usize) -> Result<ContentionGraph> {
    if rows < 1 || cols < 1 {
        return Err(Error::InvalidSize("grid needs at least one row and column".into()));
    }
    let n = rows
        .checked_mul(cols)
        .filter(|&n| n <= MAX_LINKS)
        .ok_or_else(|| Error::InvalidSize(format!("{rows}x{cols} grid exceeds {MAX_LINKS} links")))?;
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
            }
        }
    }
    ContentionGraph::new(n, &edges)
}

/// Random graph where each of the `n(n-1)/2` possible edges is included
/// independently with probability `avg_degree / (n - 1)`, giving the stated
/// expected degree. Deterministic for a fixed `(n, avg_degree, seed)`.
pub fn gen_random(n: usize, avg_degree: f64, seed: u64) -> Result<ContentionGraph> {
    if n < 1 || n > MAX_LINKS {
        return Err(Error::InvalidSize(format!("need 1..={MAX_LINKS} links, got {n}")));
    }
    if !avg_degree.is_finite() || avg_degree < 0.0 || (n > 1 && avg_degree >= n as f64) {
        return Err(Error::InvalidParameter(format!(
            "average degree {avg_degree} not in [0, {})",
            n.max(2) - 1
        )));
    }
    let p = if n > 1 { avg_degree / (n - 1) as f64 } else { 0.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    ContentionGraph::new(n, &edges)
}

/// A 7-link network whose trap structure nests two levels deep, used as a
/// worked fixture throughout the test suite.
///
/// Links 4 and 6 (0-based) each interfere with all of {0, 1, 2, 3, 5} but
/// not with each other; links {0, 1, 2, 3} additionally form a 4-cycle
/// 0–1–3–2. The maximal independent sets are {0, 3, 5} and {1, 2, 5}, and
/// truncating the state space reveals one three-column trap containing both,
/// alongside the shallow trap built on {4, 6}.
pub fn nested_traps_example() -> ContentionGraph {
    // 1-based labelling from the analysis notes: 5 and 7 are the two hubs,
    // 1-2, 1-3, 2-4, 3-4 close the square.
    let edges = [
        (4, 0), (4, 1), (4, 2), (4, 3), (4, 5),
        (6, 0), (6, 1), (6, 2), (6, 3), (6, 5),
        (0, 1), (0, 2), (1, 3), (2, 3),
    ];
    ContentionGraph::new(7, &edges).expect("fixture edges are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_self_loop() {
        let err = ContentionGraph::parse(r#"{"links":2,"edges":[[0,0]]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_duplicate_edge_even_reversed() {
        assert!(ContentionGraph::new(3, &[(0, 1), (1, 0)]).is_err());
        assert!(ContentionGraph::new(3, &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn rejects_out_of_range_and_oversized() {
        assert!(ContentionGraph::new(2, &[(0, 2)]).is_err());
        assert!(ContentionGraph::new(64, &[]).is_err());
        assert!(ContentionGraph::new(63, &[]).is_ok());
    }

    #[test]
    fn parse_three_link_chain() {
        let g = ContentionGraph::parse(r#"{"links":3,"edges":[[0,1],[1,2]]}"#).unwrap();
        assert_eq!(g.n_links(), 3);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
    }

    #[test]
    fn parse_single_isolated_link() {
        let g = ContentionGraph::parse(r#"{"links":1,"edges":[]}"#).unwrap();
        assert_eq!(g.n_links(), 1);
        assert_eq!(g.n_edges(), 0);
    }

    #[test]
    fn json_round_trip() {
        for g in [
            gen_ring(5).unwrap(),
            gen_linear(4).unwrap(),
            gen_grid(2, 3).unwrap(),
            gen_random(20, 3.0, 7).unwrap(),
            nested_traps_example(),
        ] {
            let back = ContentionGraph::parse(&g.to_json()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn ring_shape() {
        let g = gen_ring(4).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);

        let g5 = gen_ring(5).unwrap();
        assert_eq!(g5.n_edges(), 5);
        for i in 0..5 {
            assert_eq!(g5.degree(i).unwrap(), 2);
        }

        assert!(matches!(gen_ring(2), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn linear_shape() {
        assert_eq!(gen_linear(1).unwrap().n_edges(), 0);
        assert_eq!(gen_linear(5).unwrap().n_edges(), 4);
        assert!(gen_linear(0).is_err());
    }

    #[test]
    fn grid_matches_linear_when_one_row() {
        let grid = gen_grid(1, 3).unwrap();
        let line = gen_linear(3).unwrap();
        assert_eq!(grid, line);
        assert_eq!(gen_grid(1, 1).unwrap().n_links(), 1);
    }

    #[test]
    fn grid_2x3_shape() {
        let g = gen_grid(2, 3).unwrap();
        assert_eq!(g.n_links(), 6);
        assert_eq!(g.n_edges(), 7);
    }

    #[test]
    fn grid_overflow_rejected() {
        assert!(gen_grid(8, 8).is_err());
        assert!(gen_grid(usize::MAX, 2).is_err());
    }

    #[test]
    fn random_graph_is_deterministic_per_seed() {
        let a = gen_random(20, 3.0, 42).unwrap();
        let b = gen_random(20, 3.0, 42).unwrap();
        let c = gen_random(20, 3.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c, "different seeds should essentially always differ");
    }

    #[test]
    fn random_graph_hits_target_degree_on_average() {
        // Mean degree over many seeds should concentrate near the target.
        let mut total_degree = 0usize;
        let mut total_links = 0usize;
        for seed in 0..1000 {
            let g = gen_random(20, 3.0, seed).unwrap();
            total_degree += 2 * g.n_edges();
            total_links += g.n_links();
        }
        let mean = total_degree as f64 / total_links as f64;
        assert!((mean - 3.0).abs() < 0.2, "mean degree {mean} too far from 3");
    }

    #[test]
    fn random_graph_edge_cases() {
        assert_eq!(gen_random(5, 0.0, 1).unwrap().n_edges(), 0);
        assert!(gen_random(5, 5.0, 1).is_err());
        assert!(gen_random(5, -1.0, 1).is_err());
        assert!(gen_random(5, f64::NAN, 1).is_err());
    }

    #[test]
    fn nested_fixture_shape() {
        let g = nested_traps_example();
        assert_eq!(g.n_links(), 7);
        assert_eq!(g.n_edges(), 14);
        // The two hubs block everything except each other.
        for x in [0, 1, 2, 3, 5] {
            assert!(g.has_edge(4, x));
            assert!(g.has_edge(6, x));
        }
        assert!(!g.has_edge(4, 6));
    }
}
