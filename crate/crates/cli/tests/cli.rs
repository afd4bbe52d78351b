//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csma-traps"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("csma-traps-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir.join(name)
}

fn generate(family_args: &[&str], path: &Path) {
    let mut args = vec!["generate"];
    args.extend_from_slice(family_args);
    args.push("-o");
    args.push(path.to_str().unwrap());
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_writes_parseable_graphs() {
    let path = tmp("grid.json");
    generate(&["grid", "--rows", "2", "--cols", "3"], &path);
    let text = std::fs::read_to_string(&path).unwrap();
    let parsed = csma_traps::ContentionGraph::parse(&text).unwrap();
    assert_eq!(parsed.n_links(), 6);
    assert_eq!(parsed.n_edges(), 7);

    // Without -o the graph goes to stdout.
    let out = run(&["generate", "ring", "--n", "5"]);
    assert!(out.status.success());
    let ring = csma_traps::ContentionGraph::parse(&stdout(&out)).unwrap();
    assert_eq!(ring.n_links(), 5);
    assert_eq!(ring.n_edges(), 5);

    // Random generation is reproducible per seed.
    let a = run(&["generate", "random", "--n", "20", "--avg-degree", "3", "--seed", "7"]);
    let b = run(&["generate", "random", "--n", "20", "--avg-degree", "3", "--seed", "7"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn analyze_reports_fixture_probabilities() {
    let graph = tmp("nested.json");
    generate(&["nested"], &graph);
    let json_path = tmp("report.json");
    let out = run(&[
        "analyze",
        "-g",
        graph.to_str().unwrap(),
        "--rho",
        "5.35",
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("4 trap(s)"), "{text}");
    assert!(text.contains("Pr = 0.9260"), "{text}");
    assert!(text.contains("Pr = 0.0721"), "{text}");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["schema"], 1);
    assert_eq!(report["traps"].as_array().unwrap().len(), 4);
    assert_eq!(report["links"].as_array().unwrap().len(), 7);
}

#[test]
fn analyze_handles_trap_free_graphs() {
    let graph = tmp("ring5.json");
    generate(&["ring", "--n", "5"], &graph);
    let out = run(&["analyze", "-g", graph.to_str().unwrap(), "--rho", "53.5"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("no traps"));
}

#[test]
fn rho_can_be_given_as_a_multiple_of_the_typical_value() {
    let graph = tmp("grid-rho.json");
    generate(&["grid", "--rows", "2", "--cols", "3"], &graph);
    let direct = run(&["analyze", "-g", graph.to_str().unwrap(), "--rho", "53.5"]);
    let multiple = run(&["analyze", "-g", graph.to_str().unwrap(), "--rho0-mult", "10"]);
    assert_eq!(stdout(&direct), stdout(&multiple));

    // The two spellings are mutually exclusive, and one is required.
    let both = run(&[
        "analyze", "-g", graph.to_str().unwrap(), "--rho", "5", "--rho0-mult", "2",
    ]);
    assert!(!both.status.success());
    let neither = run(&["analyze", "-g", graph.to_str().unwrap()]);
    assert!(!neither.status.success());
}

#[test]
fn simulate_emits_stats_and_csv_artifacts() {
    let graph = tmp("grid-sim.json");
    generate(&["grid", "--rows", "2", "--cols", "3"], &graph);
    let trace_path = tmp("trace.csv");
    let window_path = tmp("windows.csv");
    let stats_path = tmp("stats.json");
    let out = run(&[
        "simulate",
        "-g",
        graph.to_str().unwrap(),
        "--rho0-mult",
        "10",
        "--horizon",
        "20000",
        "--seed",
        "1",
        "--window",
        "50",
        "--window-out",
        window_path.to_str().unwrap(),
        "--trace-out",
        trace_path.to_str().unwrap(),
        "--stats-out",
        stats_path.to_str().unwrap(),
        "--trap-stats",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let stats: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats_path).unwrap()).unwrap();
    let throughput = stats["throughput"].as_array().unwrap();
    assert_eq!(throughput.len(), 6);
    for v in throughput {
        let v = v.as_f64().unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
    let traps = stats["trap_stats"].as_array().unwrap();
    assert_eq!(traps.len(), 2);
    for t in traps {
        let analytic = t["analytic_sojourn"].as_f64().unwrap();
        let measured = t["measured_sojourn"].as_f64().unwrap();
        assert!((measured - analytic).abs() / analytic < 0.15);
    }

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert!(trace.starts_with("time,link,event\n"));
    assert!(trace.lines().count() > 1000);
    let windows = std::fs::read_to_string(&window_path).unwrap();
    assert!(windows.starts_with("window_start,link,throughput\n"));
    // (horizon - warmup) / window full windows, one row per link each.
    assert_eq!(windows.lines().count(), 1 + 398 * 6);
}

#[test]
fn stationary_stats_are_insensitive_to_the_transmission_distribution() {
    let graph = tmp("grid-dist.json");
    generate(&["grid", "--rows", "2", "--cols", "3"], &graph);
    let th = |tx: &str| -> f64 {
        let out = run(&[
            "simulate",
            "-g",
            graph.to_str().unwrap(),
            "--rho0-mult",
            "10",
            "--horizon",
            "50000",
            "--seed",
            "3",
            "--tx",
            tx,
        ]);
        assert!(out.status.success());
        let stats: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
        stats["throughput"][0].as_f64().unwrap()
    };
    let exp = th("exp");
    let constant = th("const");
    assert!((exp - constant).abs() / exp < 0.05, "{exp} vs {constant}");
}

#[test]
fn validate_prints_a_comparison_table() {
    let graph = tmp("grid-val.json");
    generate(&["grid", "--rows", "2", "--cols", "3"], &graph);
    let out = run(&[
        "validate",
        "-g",
        graph.to_str().unwrap(),
        "--rho0-mult",
        "10",
        "--horizon",
        "50000",
        "--sim-seeds",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("computed T_v"), "{text}");
    assert!(text.contains("computed T_p"), "{text}");
    assert!(text.contains("0->1"), "{text}");

    let ring = tmp("ring7-val.json");
    generate(&["ring", "--n", "7"], &ring);
    let out = run(&["validate", "-g", ring.to_str().unwrap(), "--rho", "10"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("no traps"));
}

#[test]
fn missing_graph_file_fails_with_nonzero_exit() {
    let out = run(&["analyze", "-g", "/nonexistent/graph.json", "--rho", "5"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}
