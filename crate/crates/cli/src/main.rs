//! Command-line front end: generate contention graphs, analyze them for
//! traps and starvation, simulate the network, and cross-validate the
//! analytical numbers against simulation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csma_traps::graph::{gen_grid, gen_linear, gen_random, gen_ring, nested_traps_example};
use csma_traps::passage::first_passage;
use csma_traps::report::{full_report, render_text, Thresholds};
use csma_traps::sim::{
    measure_passage, measure_sojourn, measure_stationary, simulate, trap_masks, trace_to_csv,
    windowed_throughput_csv, DistributionSpec, SampleStats, SimConfig, SimTrace,
    DEFAULT_WARMUP,
};
use csma_traps::sojourn::sojourn_time;
use csma_traps::statespace::enumerate_states;
use csma_traps::traps::{find_traps, trap_probability};
use csma_traps::{ContentionGraph, TYPICAL_ACCESS_INTENSITY};

#[derive(Parser)]
#[command(
    name = "csma-traps",
    about = "Trap-based starvation analysis for idealized-CSMA networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a contention graph as JSON.
    Generate {
        #[command(subcommand)]
        family: Family,
        /// Output path; stdout when omitted.
        #[arg(short, long, global = true)]
        output: Option<PathBuf>,
    },
    /// Analyze a graph: traps, probabilities, sojourn and passage times,
    /// starvation flags.
    Analyze {
        #[arg(short, long)]
        graph: PathBuf,
        #[command(flatten)]
        rho: RhoArg,
        /// Long-run throughput floor for equilibrium starvation.
        #[arg(long, default_value_t = 0.05)]
        th_equil: f64,
        /// In-trap conditional throughput floor for a trap's starving links.
        #[arg(long, default_value_t = 0.05)]
        th_temp: f64,
        /// Minimum trap depth that counts as temporal starvation.
        #[arg(long, default_value_t = 1)]
        d_target: usize,
        /// Residual-wait target for the unified bound.
        #[arg(long, default_value_t = 10.0)]
        x_target: f64,
        /// Write the full report as JSON here (text summary still goes to
        /// stdout).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Mean transmission duration in milliseconds; adds ms-scaled times
        /// to the summary.
        #[arg(long)]
        tx_ms: Option<f64>,
    },
    /// Run the event-driven simulator and emit statistics.
    Simulate {
        #[arg(short, long)]
        graph: PathBuf,
        #[command(flatten)]
        rho: RhoArg,
        /// Simulated time, in mean transmission durations.
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial stretch discarded from statistics.
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: f64,
        /// Transmission duration distribution (mean fixed at 1).
        #[arg(long, value_enum, default_value_t = DistChoice::Exp)]
        tx: DistChoice,
        /// Backoff countdown distribution (mean fixed at 1/rho).
        #[arg(long, value_enum, default_value_t = DistChoice::Exp)]
        backoff: DistChoice,
        /// Window length for per-window throughputs.
        #[arg(long, requires = "window_out")]
        window: Option<f64>,
        /// Where to write the windowed-throughput CSV.
        #[arg(long)]
        window_out: Option<PathBuf>,
        /// Where to write the raw event trace CSV.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Where to write the statistics JSON; stdout when omitted.
        #[arg(long)]
        stats_out: Option<PathBuf>,
        /// Also measure per-trap occupation probability and sojourn time
        /// against their analytical values.
        #[arg(long)]
        trap_stats: bool,
    },
    /// Compare analytical sojourn and passage times against simulation.
    Validate {
        #[arg(short, long)]
        graph: PathBuf,
        #[command(flatten)]
        rho: RhoArg,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        /// First simulation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of independent simulation runs (seeds seed..seed+N-1),
        /// executed in parallel and pooled.
        #[arg(long, default_value_t = 1)]
        sim_seeds: u64,
        /// Mean transmission duration in milliseconds; adds ms-scaled
        /// columns.
        #[arg(long)]
        tx_ms: Option<f64>,
    },
}

#[derive(Subcommand)]
enum Family {
    /// Cycle of n links, each sensing its two neighbors.
    Ring {
        #[arg(long)]
        n: usize,
    },
    /// Chain of n links.
    Linear {
        #[arg(long)]
        n: usize,
    },
    /// rows x cols grid, row-major link numbering.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
    },
    /// Erdos-Renyi graph with the given expected average degree.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        avg_degree: f64,
        #[arg(long)]
        seed: u64,
    },
    /// Seven-link fixture whose trap hierarchy is two levels deep.
    Nested,
}

/// Access intensity, given directly or as a multiple of the typical 802.11
/// value 5.35.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct RhoArg {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rho0_mult: Option<f64>,
}

impl RhoArg {
    fn value(&self) -> f64 {
        self.rho
            .unwrap_or_else(|| self.rho0_mult.expect("clap group") * TYPICAL_ACCESS_INTENSITY)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistChoice {
    Exp,
    Const,
    Uniform,
}

impl DistChoice {
    fn name(self) -> &'static str {
        match self {
            DistChoice::Exp => "exp",
            DistChoice::Const => "const",
            DistChoice::Uniform => "uniform",
        }
    }

    /// Uniform spreads over [mean/2, 3·mean/2], keeping the required mean.
    fn to_spec(self, mean: f64) -> DistributionSpec {
        match self {
            DistChoice::Exp => DistributionSpec::Exponential { mean },
            DistChoice::Const => DistributionSpec::Constant { mean },
            DistChoice::Uniform => DistributionSpec::Uniform { a: 0.5 * mean, b: 1.5 * mean },
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Generate { family, output } => cmd_generate(family, output),
        Command::Analyze { graph, rho, th_equil, th_temp, d_target, x_target, json, tx_ms } => {
            let th = Thresholds { th_equil, th_temp, d_target, x_target };
            cmd_analyze(&graph, rho.value(), &th, json, tx_ms)
        }
        Command::Simulate {
            graph,
            rho,
            horizon,
            seed,
            warmup,
            tx,
            backoff,
            window,
            window_out,
            trace_out,
            stats_out,
            trap_stats,
        } => {
            let rho = rho.value();
            let cfg_for = |g: ContentionGraph| {
                SimConfig::exponential(g, rho, horizon, seed)
                    .with_distributions(tx.to_spec(1.0), backoff.to_spec(1.0 / rho))
                    .with_warmup(warmup)
            };
            cmd_simulate(
                &graph, cfg_for, tx, backoff, window, window_out, trace_out, stats_out,
                trap_stats,
            )
        }
        Command::Validate { graph, rho, horizon, seed, sim_seeds, tx_ms } => {
            cmd_validate(&graph, rho.value(), horizon, seed, sim_seeds, tx_ms)
        }
    }
}

fn load_graph(path: &PathBuf) -> Result<ContentionGraph, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ContentionGraph::parse(&text).map_err(|e| e.to_string())
}

fn write_or_stdout(path: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => {
            fs::write(p, content).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_generate(family: Family, output: Option<PathBuf>) -> Result<(), String> {
    let graph = match family {
        Family::Ring { n } => gen_ring(n).map_err(|e| e.to_string())?,
        Family::Linear { n } => gen_linear(n).map_err(|e| e.to_string())?,
        Family::Grid { rows, cols } => gen_grid(rows, cols).map_err(|e| e.to_string())?,
        Family::Random { n, avg_degree, seed } => {
            gen_random(n, avg_degree, seed).map_err(|e| e.to_string())?
        }
        Family::Nested => nested_traps_example(),
    };
    let mut json = graph.to_json();
    if !json.ends_with('\n') {
        json.push('\n');
    }
    write_or_stdout(output.as_ref(), &json)
}

fn ms(t: f64, tx_ms: Option<f64>) -> String {
    tx_ms.map_or(String::new(), |v| format!(" = {:.3} ms", t * v))
}

fn cmd_analyze(
    path: &PathBuf,
    rho: f64,
    th: &Thresholds,
    json_out: Option<PathBuf>,
    tx_ms: Option<f64>,
) -> Result<(), String> {
    let graph = load_graph(path)?;
    let report = full_report(&graph, rho, th).map_err(|e| e.to_string())?;
    print!("{}", render_text(&report));
    if tx_ms.is_some() {
        for t in &report.traps {
            println!("  trap {}: T_V{}", t.id, ms(t.sojourn_time, tx_ms));
        }
        for p in &report.passages {
            println!("  passage {} -> {}: T_p{}", p.from, p.to, ms(p.time, tx_ms));
        }
    }
    if let Some(p) = json_out {
        let mut json = report.to_json();
        json.push('\n');
        write_or_stdout(Some(&p), &json)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &PathBuf,
    cfg_for: impl FnOnce(ContentionGraph) -> SimConfig,
    tx: DistChoice,
    backoff: DistChoice,
    window: Option<f64>,
    window_out: Option<PathBuf>,
    trace_out: Option<PathBuf>,
    stats_out: Option<PathBuf>,
    trap_stats: bool,
) -> Result<(), String> {
    let graph = load_graph(path)?;
    let cfg = cfg_for(graph.clone());
    let trace = simulate(&cfg).map_err(|e| e.to_string())?;

    if let Some(p) = trace_out {
        write_or_stdout(Some(&p), &trace_to_csv(&trace))?;
    }
    if let Some(w) = window {
        write_or_stdout(window_out.as_ref(), &windowed_throughput_csv(&trace, w))?;
    }

    let throughput: Vec<f64> =
        (0..trace.n_links).map(|i| measure_stationary(&trace, |s| s.contains(i))).collect();
    let mut stats = serde_json::json!({
        "schema": 1,
        "rho": cfg.rho,
        "horizon": cfg.horizon,
        "warmup": cfg.warmup,
        "seed": cfg.seed,
        "transmission": tx.name(),
        "backoff": backoff.name(),
        "throughput": throughput,
        "final_state": trace.final_state.links().collect::<Vec<_>>(),
    });
    if trap_stats {
        let sg = enumerate_states(&graph).map_err(|e| e.to_string())?;
        let forest = find_traps(&sg);
        let per_trap: Vec<serde_json::Value> = forest
            .traps()
            .iter()
            .map(|t| {
                let masks = trap_masks(&sg, t);
                let measured_pr = measure_stationary(&trace, |s| masks.contains(&s.0));
                let (sojourn, visits) = match measure_sojourn(&trace, &sg, t) {
                    Ok(s) => (serde_json::json!(s.mean), s.count),
                    Err(_) => (serde_json::Value::Null, 0),
                };
                serde_json::json!({
                    "id": t.id,
                    "analytic_probability": trap_probability(&sg, t, cfg.rho),
                    "measured_probability": measured_pr,
                    "analytic_sojourn": sojourn_time(&sg, t, cfg.rho).value,
                    "measured_sojourn": sojourn,
                    "visits": visits,
                })
            })
            .collect();
        stats["trap_stats"] = serde_json::Value::Array(per_trap);
    }
    let mut text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    text.push('\n');
    write_or_stdout(stats_out.as_ref(), &text)
}

/// Pools per-seed sample means, weighting by sample counts.
fn pool(stats: &[Option<SampleStats>]) -> Option<(f64, usize)> {
    let mut total = 0.0;
    let mut count = 0usize;
    for s in stats.iter().flatten() {
        total += s.mean * s.count as f64;
        count += s.count;
    }
    (count > 0).then(|| (total / count as f64, count))
}

fn delta_line(computed: f64, simulated: Option<(f64, usize)>, tx_ms: Option<f64>) -> String {
    match simulated {
        Some((sim, n)) => {
            let delta = (computed - sim) / sim * 100.0;
            format!(
                "{computed:>12.4} {sim:>12.4} {delta:>+8.2}%  ({n} samples){}",
                ms(computed, tx_ms)
            )
        }
        None => format!("{computed:>12.4} {:>12} {:>9}", "n/a", "-"),
    }
}

fn cmd_validate(
    path: &PathBuf,
    rho: f64,
    horizon: f64,
    seed: u64,
    sim_seeds: u64,
    tx_ms: Option<f64>,
) -> Result<(), String> {
    let graph = load_graph(path)?;
    let sg = enumerate_states(&graph).map_err(|e| e.to_string())?;
    let forest = find_traps(&sg);
    if forest.is_empty() {
        println!("no traps; nothing to validate");
        return Ok(());
    }

    let traces: Vec<SimTrace> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..sim_seeds)
            .map(|k| {
                let g = graph.clone();
                scope.spawn(move || simulate(&SimConfig::exponential(g, rho, horizon, seed + k)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread"))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| e.to_string())?;

    println!(
        "rho = {rho}, horizon = {horizon}, {} run(s)\n\ntrap {:>12} {:>12} {:>9}",
        traces.len(),
        "computed T_v",
        "simulated",
        "delta"
    );
    for t in forest.traps() {
        let computed = sojourn_time(&sg, t, rho).value;
        let measured: Vec<Option<SampleStats>> =
            traces.iter().map(|tr| measure_sojourn(tr, &sg, t).ok()).collect();
        println!("{:>4} {}", t.id, delta_line(computed, pool(&measured), tx_ms));
    }

    let mut printed_header = false;
    for a in forest.traps() {
        for b in forest.traps() {
            if a.id == b.id
                || a.level != b.level
                || a.states.iter().any(|s| b.contains_state(*s))
            {
                continue;
            }
            if !printed_header {
                println!("\npair {:>12} {:>12} {:>9}", "computed T_p", "simulated", "delta");
                printed_header = true;
            }
            let computed = first_passage(&sg, &forest, a.id, b.id, rho).map_err(|e| e.to_string())?;
            let measured: Vec<Option<SampleStats>> =
                traces.iter().map(|tr| measure_passage(tr, &sg, a, b).ok()).collect();
            println!("{}->{} {}", a.id, b.id, delta_line(computed, pool(&measured), tx_ms));
        }
    }
    Ok(())
}
