//! Event-driven simulator of the idealized CSMA network.
//!
//! Links run independent backoff countdowns that freeze — retaining their
//! exact residual — whenever a neighbor transmits, resume when the medium
//! clears, and trigger a transmission on reaching zero. Time is normalized
//! so the mean transmission duration is 1 and the mean countdown is `1/ρ`.
//! Backoff and transmission durations can follow different distributions;
//! because the frozen residual is kept exactly (not redrawn), long-run
//! statistics are insensitive to those distribution shapes, and the
//! measurement helpers here exist to check exactly that against the
//! analytic results of the other modules.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ContentionGraph;
use crate::statespace::{StateGraph, SystemState};
use crate::traps::Trap;

/// Time discarded from the start of every run before statistics, unless
/// overridden.
pub const DEFAULT_WARMUP: f64 = 100.0;

/// Minimum number of visits/samples for the measurement helpers to report a
/// mean.
pub const MIN_SAMPLES: usize = 30;

/// Shape of a backoff or transmission duration distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistributionSpec {
    Exponential { mean: f64 },
    Constant { mean: f64 },
    /// Uniform on `[a, b)`; the mean is `(a + b) / 2`.
    Uniform { a: f64, b: f64 },
}

impl DistributionSpec {
    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { mean } | DistributionSpec::Constant { mean } => mean,
            DistributionSpec::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mean = self.mean();
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidConfig(format!("distribution mean {mean} must be positive")));
        }
        if let DistributionSpec::Uniform { a, b } = *self {
            if !(0.0 <= a && a < b) {
                return Err(Error::InvalidConfig(format!(
                    "uniform bounds ({a}, {b}) must satisfy 0 <= a < b"
                )));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DistributionSpec::Exponential { mean } => {
                // 1 - U lies in (0, 1], keeping the logarithm finite.
                -mean * (1.0 - rng.gen::<f64>()).ln()
            }
            DistributionSpec::Constant { mean } => mean,
            DistributionSpec::Uniform { a, b } => a + (b - a) * rng.gen::<f64>(),
        }
    }
}

/// Full description of one simulation run.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub graph: ContentionGraph,
    /// Access intensity ρ; fixes the backoff mean at `1/ρ`.
    pub rho: f64,
    pub backoff: DistributionSpec,
    pub transmission: DistributionSpec,
    /// End of simulated time, in mean transmission durations.
    pub horizon: f64,
    pub seed: u64,
    /// Initial stretch excluded from all statistics.
    pub warmup: f64,
}

impl SimConfig {
    /// Memoryless run: exponential transmission (mean 1) and backoff (mean
    /// `1/ρ`), warmup [`DEFAULT_WARMUP`].
    pub fn exponential(graph: ContentionGraph, rho: f64, horizon: f64, seed: u64) -> SimConfig {
        SimConfig {
            graph,
            rho,
            backoff: DistributionSpec::Exponential { mean: 1.0 / rho },
            transmission: DistributionSpec::Exponential { mean: 1.0 },
            horizon,
            seed,
            warmup: DEFAULT_WARMUP,
        }
    }

    pub fn with_distributions(
        mut self,
        transmission: DistributionSpec,
        backoff: DistributionSpec,
    ) -> SimConfig {
        self.transmission = transmission;
        self.backoff = backoff;
        self
    }

    pub fn with_warmup(mut self, warmup: f64) -> SimConfig {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.n_links() == 0 {
            return Err(Error::InvalidConfig("graph has no links".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("rho {} must be positive", self.rho)));
        }
        self.backoff.validate()?;
        self.transmission.validate()?;
        if (self.transmission.mean() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "transmission mean {} must be 1 (time unit)",
                self.transmission.mean()
            )));
        }
        if (self.backoff.mean() * self.rho - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "backoff mean {} must equal 1/rho = {}",
                self.backoff.mean(),
                1.0 / self.rho
            )));
        }
        if !(self.warmup >= 0.0 && self.horizon.is_finite() && self.horizon > self.warmup) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= warmup ({}) < horizon ({})",
                self.warmup, self.horizon
            )));
        }
        Ok(())
    }
}

/// One link's countdown clock.
#[derive(Clone, Copy, Debug)]
pub struct LinkTimer {
    /// Remaining countdown; decreases only while every neighbor is idle.
    pub remaining: f64,
    /// True while a transmitting neighbor holds the countdown still.
    pub frozen: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Start,
    End,
}

/// One change of link activity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub link: u32,
    pub kind: EventKind,
}

/// Timestamp-ordered record of a run. Activity intervals are half-open
/// `[start, end)`, so back-to-back handovers between neighbors never
/// overlap.
#[derive(Clone, Debug)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    /// Active set at the horizon.
    pub final_state: SystemState,
    pub n_links: usize,
    pub horizon: f64,
    pub warmup: f64,
}

const KIND_END: u8 = 0;
const KIND_FIRE: u8 = 1;

/// Heap entry; ordered by time, ties by (link, kind) so runs with atoms in
/// the distributions stay reproducible.
#[derive(Clone, Copy, PartialEq)]
struct QueuedEvent {
    time: f64,
    link: u32,
    kind: u8,
    generation: u64,
}

impl Eq for QueuedEvent {}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.link.cmp(&other.link))
            .then(self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs one event-driven realization of the network.
///
/// Each idle link counts down while all its neighbors are idle, transmits
/// for a fresh transmission-duration sample on reaching zero, and redraws
/// its countdown when the transmission ends. A neighbor starting to
/// transmit freezes the countdown where it stands. Ties where two mutually
/// sensing links hit zero together (possible only with atoms in the backoff
/// distribution) resolve in favor of the lower link index; the loser keeps
/// its zero residual and transmits as soon as the medium clears.
///
/// Every link draws from its own RNG stream derived from `cfg.seed`, so
/// traces are deterministic per seed.
pub fn simulate(cfg: &SimConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let n = cfg.graph.n_links();
    let neighbor_masks: Vec<u64> =
        (0..n).map(|i| cfg.graph.neighbor_mask(i).expect("validated link")).collect();

    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();

    let mut timers: Vec<LinkTimer> = Vec::with_capacity(n);
    let mut active = vec![false; n];
    let mut blockers = vec![0u32; n]; // transmitting neighbors
    let mut fire_time = vec![0.0; n]; // absolute, valid while counting
    let mut generation = vec![0u64; n]; // stamps out stale fire events
    let mut heap: BinaryHeap<Reverse<QueuedEvent>> = BinaryHeap::new();
    let mut events: Vec<TraceEvent> = Vec::new();

    for i in 0..n {
        let c = cfg.backoff.sample(&mut rngs[i]);
        timers.push(LinkTimer { remaining: c, frozen: false });
        fire_time[i] = c;
        heap.push(Reverse(QueuedEvent {
            time: c,
            link: i as u32,
            kind: KIND_FIRE,
            generation: 0,
        }));
    }

    while let Some(&Reverse(ev)) = heap.peek() {
        if ev.time > cfg.horizon {
            break;
        }
        heap.pop();
        let i = ev.link as usize;
        match ev.kind {
            KIND_FIRE => {
                if ev.generation != generation[i] {
                    continue; // cancelled by a freeze
                }
                debug_assert!(!active[i] && blockers[i] == 0);
                active[i] = true;
                events.push(TraceEvent { time: ev.time, link: ev.link, kind: EventKind::Start });
                let duration = cfg.transmission.sample(&mut rngs[i]);
                heap.push(Reverse(QueuedEvent {
                    time: ev.time + duration,
                    link: ev.link,
                    kind: KIND_END,
                    generation: 0,
                }));
                let mut mask = neighbor_masks[i];
                while mask != 0 {
                    let j = mask.trailing_zeros() as usize;
                    mask &= mask - 1;
                    debug_assert!(!active[j]);
                    blockers[j] += 1;
                    if blockers[j] == 1 {
                        // Was counting: park the clock where it stands.
                        timers[j].remaining = (fire_time[j] - ev.time).max(0.0);
                        timers[j].frozen = true;
                        generation[j] += 1;
                    }
                }
            }
            _ => {
                active[i] = false;
                events.push(TraceEvent { time: ev.time, link: ev.link, kind: EventKind::End });
                timers[i].remaining = cfg.backoff.sample(&mut rngs[i]);
                if blockers[i] == 0 {
                    timers[i].frozen = false;
                    fire_time[i] = ev.time + timers[i].remaining;
                    heap.push(Reverse(QueuedEvent {
                        time: fire_time[i],
                        link: ev.link,
                        kind: KIND_FIRE,
                        generation: generation[i],
                    }));
                } else {
                    timers[i].frozen = true;
                }
                let mut mask = neighbor_masks[i];
                while mask != 0 {
                    let j = mask.trailing_zeros() as usize;
                    mask &= mask - 1;
                    blockers[j] -= 1;
                    if blockers[j] == 0 && !active[j] {
                        timers[j].frozen = false;
                        fire_time[j] = ev.time + timers[j].remaining;
                        heap.push(Reverse(QueuedEvent {
                            time: fire_time[j],
                            link: j as u32,
                            kind: KIND_FIRE,
                            generation: generation[j],
                        }));
                    }
                }
            }
        }
    }

    let mut final_mask = 0u64;
    for (i, &a) in active.iter().enumerate() {
        if a {
            final_mask |= 1 << i;
        }
    }
    Ok(SimTrace {
        events,
        final_state: SystemState(final_mask),
        n_links: n,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
    })
}

/// Calls `f(start, end, mask)` for every maximal interval of constant
/// system state, covering `[0, horizon]`. Zero-length intervals (possible
/// when atoms in the distributions make events coincide) are skipped.
fn for_each_segment(trace: &SimTrace, mut f: impl FnMut(f64, f64, u64)) {
    let mut mask = 0u64;
    let mut t = 0.0;
    for ev in &trace.events {
        if ev.time > t {
            f(t, ev.time, mask);
            t = ev.time;
        }
        match ev.kind {
            EventKind::Start => mask |= 1 << ev.link,
            EventKind::End => mask &= !(1 << ev.link),
        }
    }
    if trace.horizon > t {
        f(t, trace.horizon, mask);
    }
}

/// Fraction of post-warmup time the system spends in states satisfying the
/// predicate.
pub fn measure_stationary(trace: &SimTrace, predicate: impl Fn(SystemState) -> bool) -> f64 {
    let lo = trace.warmup;
    let hi = trace.horizon;
    let mut occupied = 0.0;
    for_each_segment(trace, |a, b, mask| {
        let s = a.max(lo);
        let e = b.min(hi);
        if e > s && predicate(SystemState(mask)) {
            occupied += e - s;
        }
    });
    occupied / (hi - lo)
}

/// Bitmasks of a trap's member states, for matching against a trace.
pub fn trap_masks(sg: &StateGraph, trap: &Trap) -> HashSet<u64> {
    trap.states.iter().map(|&id| sg.state(id).0).collect()
}

/// Sample mean with a 95% confidence half-width (normal approximation).
#[derive(Clone, Copy, Debug)]
pub struct SampleStats {
    pub mean: f64,
    pub count: usize,
    pub ci_half_width: f64,
}

fn summarize(samples: &[f64]) -> Result<SampleStats> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { got: samples.len(), need: MIN_SAMPLES });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(SampleStats { mean, count: samples.len(), ci_half_width: 1.96 * (var / n).sqrt() })
}

/// Mean length of a visit to the trap: a maximal interval spent in its
/// state set, opened by a transition from outside. Visits straddling the
/// warmup boundary or the horizon are discarded.
pub fn measure_sojourn(trace: &SimTrace, sg: &StateGraph, trap: &Trap) -> Result<SampleStats> {
    let set = trap_masks(sg, trap);
    let mut samples = Vec::new();
    let mut inside = false;
    let mut entry: Option<f64> = None;
    for_each_segment(trace, |a, _b, mask| {
        let now_inside = set.contains(&mask);
        if now_inside && !inside {
            entry = if a >= trace.warmup { Some(a) } else { None };
        } else if !now_inside && inside {
            if let Some(t0) = entry.take() {
                samples.push(a - t0);
            }
        }
        inside = now_inside;
    });
    summarize(&samples)
}

/// Mean time from an entry into `from` until the first subsequent entry
/// into `to`. Samples never overlap: the next one begins only after the
/// previous hit. When one trap's state set contains the other's the passage
/// is zero by convention, mirroring the analytic treatment of nested traps.
pub fn measure_passage(
    trace: &SimTrace,
    sg: &StateGraph,
    from: &Trap,
    to: &Trap,
) -> Result<SampleStats> {
    let set_from = trap_masks(sg, from);
    let set_to = trap_masks(sg, to);
    if set_from.is_subset(&set_to) || set_to.is_subset(&set_from) {
        return Ok(SampleStats { mean: 0.0, count: 0, ci_half_width: 0.0 });
    }
    let mut samples = Vec::new();
    let mut armed: Option<f64> = None;
    let mut was_in_from = false;
    for_each_segment(trace, |a, _b, mask| {
        let in_from = set_from.contains(&mask);
        match armed {
            Some(t0) => {
                if set_to.contains(&mask) {
                    samples.push(a - t0);
                    armed = None;
                }
            }
            None => {
                if in_from && !was_in_from && a >= trace.warmup {
                    armed = Some(a);
                }
            }
        }
        was_in_from = in_from;
    });
    summarize(&samples)
}

/// Per-window active fraction for one link. Windows tile `[warmup,
/// horizon)`; a trailing partial window is dropped.
pub fn windowed_throughput(trace: &SimTrace, window: f64, link: usize) -> Vec<f64> {
    assert!(window > 0.0, "window must be positive");
    assert!(link < trace.n_links, "link {link} out of range");
    let start = trace.warmup;
    let n_windows = ((trace.horizon - start) / window).floor() as usize;
    let mut active = vec![0.0; n_windows];
    let end = start + n_windows as f64 * window;
    let bit = 1u64 << link;
    for_each_segment(trace, |a, b, mask| {
        if mask & bit == 0 {
            return;
        }
        let lo = a.max(start);
        let hi = b.min(end);
        if hi <= lo {
            return;
        }
        let first = ((lo - start) / window) as usize;
        let last = (((hi - start) / window).floor() as usize + 1).min(n_windows);
        for (k, slot) in active.iter_mut().enumerate().take(last).skip(first) {
            let ws = start + k as f64 * window;
            let overlap = hi.min(ws + window) - lo.max(ws);
            if overlap > 0.0 {
                *slot += overlap;
            }
        }
    });
    for v in &mut active {
        *v /= window;
    }
    active
}

/// Renders the event log as `time,link,event` CSV.
pub fn trace_to_csv(trace: &SimTrace) -> String {
    let mut out = String::from("time,link,event\n");
    for ev in &trace.events {
        let kind = match ev.kind {
            EventKind::Start => "start",
            EventKind::End => "end",
        };
        writeln!(out, "{},{},{}", ev.time, ev.link, kind).expect("string write");
    }
    out
}

/// Renders per-window throughputs of every link as
/// `window_start,link,throughput` CSV.
pub fn windowed_throughput_csv(trace: &SimTrace, window: f64) -> String {
    let series: Vec<Vec<f64>> =
        (0..trace.n_links).map(|i| windowed_throughput(trace, window, i)).collect();
    let n_windows = series.first().map_or(0, Vec::len);
    let mut out = String::from("window_start,link,throughput\n");
    for k in 0..n_windows {
        let ws = trace.warmup + k as f64 * window;
        for (i, link_series) in series.iter().enumerate() {
            writeln!(out, "{},{},{}", ws, i, link_series[k]).expect("string write");
        }
    }
    out
}
