//! Starvation classification and the combined analysis report.
//!
//! Three distinct notions of starvation come together here. A link is
//! *equilibrium-starved* when its long-run throughput sits below a floor —
//! visible in any time-average measurement. It is *temporally starved* when
//! some sufficiently deep trap shuts it out for stretches of order ρ^d even
//! though its long-run average may be fine. The *unified bound* covers both
//! at once: summing `Pr{Tr}·T_V(Tr)` over disjoint traps that freeze the
//! link lower-bounds its mean residual waiting time, so a bound that grows
//! with ρ certifies starvation without simulation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::ContentionGraph;
use crate::passage::first_passage;
use crate::sim::{EventKind, SimTrace};
use crate::sojourn::{asymptotic_sojourn, sojourn_time};
use crate::statespace::{
    asymptotic_throughput, enumerate_states, link_throughput, StateGraph,
};
use crate::traps::{
    find_traps, frozen_traps, starving_links, trap_probability, trap_probability_polynomials,
    Trap, TrapForest,
};

/// Cutoffs the classifications are judged against.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Thresholds {
    /// Long-run throughput floor: below it a link counts as
    /// equilibrium-starved.
    pub th_equil: f64,
    /// In-trap conditional throughput floor defining a trap's starving
    /// links.
    pub th_temp: f64,
    /// Minimum trap depth for a trap to count as temporal starvation.
    pub d_target: usize,
    /// Mean residual-wait target for the unified bound, in mean
    /// transmission times.
    pub x_target: f64,
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.th_equil > 0.0) {
            return Err(Error::InvalidThreshold(format!(
                "th_equil {} must be strictly positive",
                self.th_equil
            )));
        }
        if !(self.th_temp > 0.0) {
            return Err(Error::InvalidThreshold(format!(
                "th_temp {} must be strictly positive",
                self.th_temp
            )));
        }
        if self.d_target < 1 {
            return Err(Error::InvalidThreshold("d_target must be at least 1".into()));
        }
        if !(self.x_target > 0.0) {
            return Err(Error::InvalidThreshold(format!(
                "x_target {} must be strictly positive",
                self.x_target
            )));
        }
        Ok(())
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { th_equil: 0.05, th_temp: 0.05, d_target: 1, x_target: 10.0 }
    }
}

/// Long-run test: is the link's stationary throughput below the floor?
pub fn classify_equilibrium(
    sg: &StateGraph,
    rho: f64,
    th: &Thresholds,
    i: usize,
) -> Result<bool> {
    th.validate()?;
    Ok(link_throughput(sg, rho, i)? < th.th_equil)
}

/// Trap test: which traps of depth ≥ `d_target` starve the link? Returns
/// the verdict together with the supporting trap ids.
pub fn classify_temporal(
    sg: &StateGraph,
    forest: &TrapForest,
    rho: f64,
    th: &Thresholds,
    i: usize,
) -> Result<(bool, Vec<usize>)> {
    th.validate()?;
    if i >= sg.graph().n_links() {
        return Err(Error::UnknownLink(i));
    }
    let supporting: Vec<usize> = forest
        .traps()
        .iter()
        .filter(|t| t.depth >= th.d_target && starving_links(sg, t, rho, th.th_temp).contains(&i))
        .map(|t| t.id)
        .collect();
    Ok((!supporting.is_empty(), supporting))
}

/// Lower bound on the link's mean residual waiting time, plus the leading
/// ρ-exponent of its symbolic form (None when no trap freezes the link).
///
/// Traps in the hierarchy overlap, and summing overlapping traps would
/// double-count waiting time, so the bound greedily keeps pairwise-disjoint
/// frozen traps in decreasing `Pr·T_V` order. A positive exponent means the
/// wait grows without bound in ρ.
pub fn unified_bound(
    sg: &StateGraph,
    forest: &TrapForest,
    rho: f64,
    i: usize,
) -> Result<(f64, Option<i64>, Vec<usize>)> {
    let frozen = frozen_traps(sg, forest, i)?;
    let mut scored: Vec<(f64, usize)> = frozen
        .iter()
        .map(|&id| {
            let t = forest.get(id).unwrap();
            (trap_probability(sg, t, rho) * sojourn_time(sg, t, rho).value, id)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut chosen: Vec<&Trap> = Vec::new();
    let mut bound = 0.0;
    let mut exponent: Option<i64> = None;
    for (score, id) in scored {
        let t = forest.get(id).unwrap();
        if chosen.iter().any(|c| states_overlap(c, t)) {
            continue;
        }
        bound += score;
        let (numer, z) = trap_probability_polynomials(sg, t);
        let (_, depth) = asymptotic_sojourn(sg, t);
        let e = numer.degree() as i64 - z.degree() as i64 + depth as i64;
        exponent = Some(exponent.map_or(e, |cur| cur.max(e)));
        chosen.push(t);
    }
    let mut ids: Vec<usize> = chosen.iter().map(|t| t.id).collect();
    ids.sort_unstable();
    Ok((bound, exponent, ids))
}

fn states_overlap(a: &Trap, b: &Trap) -> bool {
    let (small, large) = if a.states.len() <= b.states.len() { (a, b) } else { (b, a) };
    small.states.iter().any(|&id| large.contains_state(id))
}

/// Per-link slice of the report.
#[derive(Clone, Debug, Serialize)]
pub struct LinkReport {
    pub link: usize,
    /// Stationary throughput at the report's ρ.
    pub throughput: f64,
    /// Exact large-ρ throughput limit, as a rational string like "1/2".
    pub asymptotic_throughput: String,
    pub equilibrium_starved: bool,
    pub temporally_starved: bool,
    /// Traps of sufficient depth that starve this link.
    pub temporal_traps: Vec<usize>,
    /// Σ Pr{Tr}·T_V(Tr) over the disjoint frozen traps below.
    pub residual_wait_bound: f64,
    /// Leading ρ-exponent of the bound; growth with ρ means starvation at
    /// large access intensity.
    pub residual_wait_exponent: Option<i64>,
    pub frozen_traps_used: Vec<usize>,
    pub unified_starved: bool,
}

/// Per-trap slice of the report.
#[derive(Clone, Debug, Serialize)]
pub struct TrapSummary {
    pub id: usize,
    pub level: usize,
    pub depth: usize,
    pub state_count: usize,
    /// Maximum-cardinality states, as sorted link lists.
    pub roots: Vec<Vec<usize>>,
    pub parent: Option<usize>,
    pub probability: f64,
    pub sojourn_time: f64,
    /// Leading sojourn coefficient β as a rational string; the trap holds
    /// for about β·ρ^depth at large ρ.
    pub sojourn_beta: String,
    pub sojourn_is_exact: bool,
    pub starving_links: Vec<usize>,
}

/// One direction of a trap-to-trap passage computation.
#[derive(Clone, Debug, Serialize)]
pub struct PassageSummary {
    pub from: usize,
    pub to: usize,
    pub time: f64,
}

/// Everything the analysis pipeline produces for one (graph, ρ,
/// thresholds) input. Serialization is deterministic: equal inputs give
/// byte-identical JSON.
#[derive(Clone, Debug, Serialize)]
pub struct StarvationReport {
    pub schema: u32,
    pub n_links: usize,
    pub rho: f64,
    pub thresholds: Thresholds,
    pub links: Vec<LinkReport>,
    pub traps: Vec<TrapSummary>,
    /// Passage times between same-level disjoint trap pairs, both
    /// directions.
    pub passages: Vec<PassageSummary>,
    pub notes: Vec<String>,
}

impl StarvationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Runs the full pipeline: state space, traps, probabilities, sojourns,
/// passages, and all three per-link classifications.
pub fn full_report(g: &ContentionGraph, rho: f64, th: &Thresholds) -> Result<StarvationReport> {
    th.validate()?;
    let sg = enumerate_states(g)?;
    let forest = find_traps(&sg);

    let mut links = Vec::with_capacity(g.n_links());
    for i in 0..g.n_links() {
        let (temporally_starved, temporal_traps) = classify_temporal(&sg, &forest, rho, th, i)?;
        let (bound, exponent, used) = unified_bound(&sg, &forest, rho, i)?;
        let limit = asymptotic_throughput(&sg, i)?;
        links.push(LinkReport {
            link: i,
            throughput: link_throughput(&sg, rho, i)?,
            asymptotic_throughput: format!("{}/{}", limit.numer(), limit.denom()),
            equilibrium_starved: classify_equilibrium(&sg, rho, th, i)?,
            temporally_starved,
            temporal_traps,
            residual_wait_bound: bound,
            residual_wait_exponent: exponent,
            frozen_traps_used: used,
            unified_starved: bound >= th.x_target,
        });
    }

    let traps: Vec<TrapSummary> = forest
        .traps()
        .iter()
        .map(|t| {
            let sojourn = sojourn_time(&sg, t, rho);
            TrapSummary {
                id: t.id,
                level: t.level,
                depth: t.depth,
                state_count: t.states.len(),
                roots: t
                    .roots
                    .iter()
                    .map(|&id| sg.state(id).links().collect())
                    .collect(),
                parent: t.parent,
                probability: trap_probability(&sg, t, rho),
                sojourn_time: sojourn.value,
                sojourn_beta: format!("{}/{}", sojourn.beta.numer(), sojourn.beta.denom()),
                sojourn_is_exact: sojourn.exact,
                starving_links: starving_links(&sg, t, rho, th.th_temp),
            }
        })
        .collect();

    let mut passages = Vec::new();
    for a in forest.traps() {
        for b in forest.traps() {
            if a.id < b.id && a.level == b.level && !states_overlap(a, b) {
                passages.push(PassageSummary {
                    from: a.id,
                    to: b.id,
                    time: first_passage(&sg, &forest, a.id, b.id, rho)?,
                });
                passages.push(PassageSummary {
                    from: b.id,
                    to: a.id,
                    time: first_passage(&sg, &forest, b.id, a.id, rho)?,
                });
            }
        }
    }

    Ok(StarvationReport {
        schema: 1,
        n_links: g.n_links(),
        rho,
        thresholds: *th,
        links,
        traps,
        passages,
        notes: vec![
            "residual_wait_bound sums Pr·T_V over greedily chosen pairwise-disjoint \
             frozen traps (decreasing Pr·T_V); overlapping traps would double-count"
                .into(),
            "times are in units of mean transmission duration".into(),
        ],
    })
}

/// Plain-text rendering of a report for terminal output.
pub fn render_text(report: &StarvationReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "{} links at rho = {}", report.n_links, report.rho).unwrap();
    if report.traps.is_empty() {
        writeln!(out, "no traps").unwrap();
    } else {
        writeln!(out, "{} trap(s):", report.traps.len()).unwrap();
        for t in &report.traps {
            writeln!(
                out,
                "  trap {}: level {}, depth {}, {} states, Pr = {:.4}, T_V = {:.4} \
                 (~{} rho^{}), starving links {:?}{}",
                t.id,
                t.level,
                t.depth,
                t.state_count,
                t.probability,
                t.sojourn_time,
                t.sojourn_beta,
                t.depth,
                t.starving_links,
                t.parent.map_or(String::new(), |p| format!(", inside trap {p}")),
            )
            .unwrap();
        }
    }
    for p in &report.passages {
        writeln!(out, "  passage trap {} -> trap {}: T_p = {:.4}", p.from, p.to, p.time)
            .unwrap();
    }
    writeln!(out, "links:").unwrap();
    for l in &report.links {
        let mut flags = Vec::new();
        if l.equilibrium_starved {
            flags.push("equilibrium".to_string());
        }
        if l.temporally_starved {
            flags.push(format!("temporal via {:?}", l.temporal_traps));
        }
        if l.unified_starved {
            flags.push(format!("residual-wait bound {:.2}", l.residual_wait_bound));
        }
        let verdict =
            if flags.is_empty() { "ok".to_string() } else { format!("STARVED: {}", flags.join("; ")) };
        writeln!(
            out,
            "  link {}: Th = {:.4} (limit {}), {}",
            l.link, l.throughput, l.asymptotic_throughput, verdict
        )
        .unwrap();
    }
    out
}

/// Estimates the mean residual wait E[X_i]: the expected time from a
/// uniformly random instant until link `i` next starts transmitting.
/// Observation instants are Poisson epochs over the post-warmup trace, so
/// the estimate is unbiased for the time average; epochs with no later
/// start are discarded.
pub fn residual_wait_estimate(
    trace: &SimTrace,
    link: usize,
    n_epochs: usize,
    seed: u64,
) -> Result<f64> {
    let starts: Vec<f64> = trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Start && e.link as usize == link)
        .map(|e| e.time)
        .collect();
    if starts.is_empty() {
        return Err(Error::InsufficientSamples { got: 0, need: 1 });
    }
    let span = trace.horizon - trace.warmup;
    let mean_gap = span / n_epochs as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = trace.warmup;
    let mut total = 0.0;
    let mut count = 0usize;
    loop {
        t += -mean_gap * (1.0 - rng.gen::<f64>()).ln();
        if t >= trace.horizon {
            break;
        }
        let idx = starts.partition_point(|&s| s < t);
        if idx == starts.len() {
            break;
        }
        total += starts[idx] - t;
        count += 1;
    }
    if count < 30 {
        return Err(Error::InsufficientSamples { got: count, need: 30 });
    }
    Ok(total / count as f64)
}
