//! How long the process stays inside a trap once captured.
//!
//! Within a trap the dynamics are approximated by collapsing each column
//! into one aggregate state, producing a birth–death chain whose downward
//! rate from column `i` is `i` (any of the `i` transmissions finishing) and
//! whose upward rate restores detailed balance against the column weights
//! `|A_i| ρ^i`. The expected first-passage time from the bottom column to
//! just below the trap then has a closed polynomial form in ρ — the *ergodic
//! sojourn time* — whose leading term `β ρ^d` shows that trap durations grow
//! polynomially in the access intensity with exponent equal to the trap's
//! depth.
//!
//! The aggregation is exact when every column is homogeneous in its count of
//! in-trap up-neighbors; a per-state linear-system oracle
//! ([`exact_exit_times`]) provides the ground truth in all cases.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::solve::solve_dense;
use crate::statespace::{StateGraph, StateId};
use crate::traps::Trap;

/// Column-aggregated dynamics of one trap: a birth–death chain on levels
/// `l..=l+d`, with absorption one step below `l`.
#[derive(Clone, Debug)]
pub struct BirthDeathChain {
    level: usize,
    depth: usize,
    /// `column_sizes[k]` = |A_{level+k}|, the member count of each column.
    column_sizes: Vec<usize>,
    /// Access intensity the rates below were built at.
    rho: f64,
    /// `up_rates[k]` = rate from level+k to level+k+1 (empty slot at the
    /// top is omitted; the vector has `depth` entries).
    up_rates: Vec<f64>,
    /// `down_rates[k]` = rate from level+k to level+k−1, always `level+k`.
    down_rates: Vec<f64>,
}

impl BirthDeathChain {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn column_sizes(&self) -> &[usize] {
        &self.column_sizes
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Rate of moving from level `i` up to `i+1`; zero at the top level.
    pub fn up_rate(&self, i: usize) -> f64 {
        if i >= self.level && i < self.level + self.depth {
            self.up_rates[i - self.level]
        } else {
            0.0
        }
    }

    /// Rate of moving from level `i` down to `i−1`.
    pub fn down_rate(&self, i: usize) -> f64 {
        self.down_rates[i - self.level]
    }
}

/// Collapses each column of the trap into one state of a birth–death chain.
///
/// Downward rate from level `i` is `i`. Upward rate from level `i` is
/// `(|A_{i+1}| / |A_i|) · (i+1) · ρ`, which uses the edge-count identity
/// that the columns of a trap are joined by exactly `|A_{i+1}|·(i+1)`
/// up-edges (each size-(i+1) member keeps all i+1 of its sub-states, which
/// lie in the trap too).
pub fn aggregate_birth_death(sg: &StateGraph, trap: &Trap, rho: f64) -> BirthDeathChain {
    let sizes = trap.column_sizes(sg);
    let l = trap.level;
    let up_rates: Vec<f64> = (0..trap.depth)
        .map(|k| (sizes[k + 1] as f64 / sizes[k] as f64) * (l + k + 1) as f64 * rho)
        .collect();
    let down_rates: Vec<f64> = (0..=trap.depth).map(|k| (l + k) as f64).collect();
    BirthDeathChain {
        level: l,
        depth: trap.depth,
        column_sizes: sizes,
        rho,
        up_rates,
        down_rates,
    }
}

/// Expected first-passage time from aggregate level `i` to level `l−1`
/// (just outside the trap), evaluated at access intensity `rho`:
///
/// ```text
/// T(i → l−1) = Σ_{k=0}^{d} [ Σ_{j=0}^{min(k, i−l)} |A_{l+d−k+j}| / ((l+j)·|A_{l+j}|) ] ρ^{d−k}
/// ```
pub fn bd_passage_time(chain: &BirthDeathChain, i: usize, rho: f64) -> Result<f64> {
    let l = chain.level;
    let d = chain.depth;
    if i < l || i > l + d {
        return Err(Error::LevelOutOfRange { level: i, lo: l, hi: l + d });
    }
    let size = |lvl: usize| chain.column_sizes[lvl - l] as f64;
    let mut total = 0.0;
    for k in 0..=d {
        let mut coeff = 0.0;
        for j in 0..=k.min(i - l) {
            coeff += size(l + d - k + j) / ((l + j) as f64 * size(l + j));
        }
        total += coeff * rho.powi((d - k) as i32);
    }
    Ok(total)
}

/// Sojourn time of a trap with the exactness flag attached.
#[derive(Clone, Debug, PartialEq)]
pub struct SojournResult {
    /// Expected time inside the trap, in units of mean transmission time.
    pub value: f64,
    /// Exact leading coefficient: β = |A_{l+d}| / (l·|A_l|).
    pub beta: Ratio<u64>,
    /// Trap depth d; the sojourn grows as β·ρ^d.
    pub depth: usize,
    /// Whether the column-homogeneity condition held, making `value` exact
    /// rather than an aggregation estimate.
    pub exact: bool,
}

/// Coefficients of the ergodic sojourn time polynomial, as exact rationals:
/// the coefficient of ρ^j is `|A_{l+j}| / (l·|A_l|)`.
pub fn sojourn_coefficients(sg: &StateGraph, trap: &Trap) -> Vec<Ratio<u64>> {
    let sizes = trap.column_sizes(sg);
    let den = trap.level as u64 * sizes[0] as u64;
    sizes.iter().map(|&a| Ratio::new(a as u64, den)).collect()
}

/// Ergodic sojourn time of the trap: the expected time to leave, starting
/// from the bottom column, under the birth–death aggregation.
pub fn sojourn_time(sg: &StateGraph, trap: &Trap, rho: f64) -> SojournResult {
    let coeffs = sojourn_coefficients(sg, trap);
    let value = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| ratio_to_f64(*c) * rho.powi(j as i32))
        .sum();
    let (beta, depth) = asymptotic_sojourn(sg, trap);
    SojournResult { value, beta, depth, exact: is_uniform(sg, trap) }
}

/// Leading-order law of the sojourn time: `(β, d)` such that the expected
/// stay grows as β·ρ^d for large ρ.
pub fn asymptotic_sojourn(sg: &StateGraph, trap: &Trap) -> (Ratio<u64>, usize) {
    let sizes = trap.column_sizes(sg);
    let beta = Ratio::new(
        sizes[trap.depth] as u64,
        trap.level as u64 * sizes[0] as u64,
    );
    (beta, trap.depth)
}

/// Column-homogeneity test: true iff in every column of the trap all member
/// states have the same number of up-neighbors *inside the trap*. When it
/// holds, the birth–death aggregation introduces no error and the sojourn
/// polynomial is exact. (Sufficient, not necessary.)
pub fn is_uniform(sg: &StateGraph, trap: &Trap) -> bool {
    for column in trap.columns(sg) {
        let mut expected: Option<usize> = None;
        for &id in &column {
            let ups = sg
                .up_edges(id)
                .iter()
                .filter(|&&(up, _)| trap.contains_state(up))
                .count();
            match expected {
                None => expected = Some(ups),
                Some(e) if e != ups => return false,
                Some(_) => {}
            }
        }
    }
    true
}

/// Exact expected exit times, one per member state (parallel to
/// `trap.states`): how long until the process first leaves the trap when
/// started in each state.
///
/// Solves the dynamic equations `(m_s + n_s·ρ)·T_s = 1 + Σ_c T_c + ρ·Σ_p T_p`
/// where `m_s = |s|` counts the downward transitions, `n_s` the upward ones,
/// `c` ranges over in-trap states one link smaller, `p` over in-trap states
/// one link larger, and exit states contribute zero.
pub fn exact_exit_times(sg: &StateGraph, trap: &Trap, rho: f64) -> Result<Vec<f64>> {
    let n = trap.states.len();
    let pos = |id: StateId| trap.states.binary_search(&id).ok();
    let mut a = vec![0.0; n * n];
    let b = vec![1.0; n];
    for (row, &id) in trap.states.iter().enumerate() {
        let m = sg.state(id).cardinality() as f64;
        let mut ups_in_trap = 0usize;
        for &(up, _) in sg.up_edges(id) {
            if let Some(col) = pos(up) {
                ups_in_trap += 1;
                a[row * n + col] -= rho;
            }
        }
        for &(down, _) in sg.down_edges(id) {
            if let Some(col) = pos(down) {
                a[row * n + col] -= 1.0;
            }
        }
        a[row * n + row] += m + ups_in_trap as f64 * rho;
    }
    solve_dense(n, a, b)
}

/// Exact ergodic sojourn time: the mean of [`exact_exit_times`] over the
/// bottom column, which is where every entry into the trap lands.
pub fn exact_sojourn_time(sg: &StateGraph, trap: &Trap, rho: f64) -> Result<f64> {
    let times = exact_exit_times(sg, trap, rho)?;
    let bottom: Vec<f64> = trap
        .states
        .iter()
        .zip(&times)
        .filter(|(&id, _)| sg.state(id).cardinality() == trap.level)
        .map(|(_, &t)| t)
        .collect();
    Ok(bottom.iter().sum::<f64>() / bottom.len() as f64)
}

fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
