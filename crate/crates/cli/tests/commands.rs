use std::process::{Command, Output};

use eharq_cli::config::{parse_grid, ExperimentConfig};
use eharq_cli::exit;

fn eharq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eharq")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn config_errors_exit_with_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("unknown.cfg", "nonsense = 1\n"),
        ("duplicate.cfg", "rho = 0.5\nrho = 0.6\n"),
        ("syntax.cfg", "rho 0.5\n"),
        ("range.cfg", "rho = 1.5\n"),
        ("grid.cfg", "rho_grid = 0.3, 0.2\n"),
    ] {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        let out = eharq(&["solve", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(exit::BAD_CONFIG), "{name}");
    }
    assert_eq!(eharq(&["solve", "--rho", "abc"]).status.code(), Some(exit::BAD_CONFIG));
    assert_eq!(eharq(&["no-such-command"]).status.code(), Some(exit::BAD_CONFIG));
}

#[test]
fn config_file_overrides_defaults() {
    let cfg = ExperimentConfig::parse("# comment\n\nrho = 0.4\nprotocol = na\nk = 3\nef_grid = 1:1:3\n").unwrap();
    assert_eq!(cfg.rho, 0.4);
    assert_eq!(cfg.max_attempts, 3);
    assert_eq!(cfg.ef_grid, vec![1, 2, 3]);
    assert_eq!(cfg.battery_capacity, ExperimentConfig::default().battery_capacity);
    assert_eq!(parse_grid("tth", "0:0.025:0.65").unwrap().len(), 27);
    assert!(ExperimentConfig::parse("ef_grid = 1.5\n").is_err());
}

#[test]
fn solve_reference_point() {
    let out = eharq(&["solve"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let v = json(&out);
    assert_eq!(v["status"], "optimal");
    assert!(v["throughput"].as_f64().unwrap() >= 0.2 - 1e-9);
    assert!((v["pdp"].as_f64().unwrap() - 0.015_913).abs() < 1e-6);
}

#[test]
fn unreachable_floor_is_infeasible() {
    let out = eharq(&["solve", "--tth", "2.0"]);
    assert_eq!(out.status.code(), Some(exit::INFEASIBLE));
    assert_eq!(json(&out)["status"], "infeasible");
}

#[test]
fn no_feedback_starts_a_packet_every_k_slots() {
    let v = json(&eharq(&["solve", "--protocol", "wo"]));
    assert!((v["new_packet_rate"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn out_flag_writes_the_body() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("solve.json");
    let out = eharq(&["solve", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["protocol"], "adaptive");
}

#[test]
fn sweep_rho_layout() {
    let out = eharq(&["sweep-rho"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let header = String::from_utf8(out.stdout.clone()).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "protocol,policy,rho,status,pdp,throughput");
    let rows = rows(&out);
    assert_eq!(rows.len(), 3 * 2 * 9);
    for r in &rows {
        if r[3] == "infeasible" {
            assert_eq!(r[4].parse::<f64>().unwrap(), 1.0);
            assert!(r[5].is_empty());
        }
    }
    let pdp = |proto: &str, rho: &str| {
        rows.iter().find(|r| r[0] == proto && r[1] == "optimal" && r[2] == rho).unwrap()[4].parse::<f64>().unwrap()
    };
    assert!(pdp("adaptive", "0.600000000") <= pdp("na", "0.600000000"));
}

#[test]
fn sweep_tth_layout() {
    let out = eharq(&["sweep-tth", "--tth", "0:0.05:0.5"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let rows = rows(&out);
    assert_eq!(rows.len(), 3 * 2 * 11);
    let feasible = |proto: &str, ef: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r[0] == proto && r[1] == ef && r[3] == "optimal")
            .map(|r| r[2].parse().unwrap())
            .collect()
    };
    let wo: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "wo" && r[3] == "optimal").collect();
    assert!(wo.windows(2).all(|w| w[0][4] == w[1][4]));
    for proto in ["na", "adaptive"] {
        let (one, two) = (feasible(proto, "1"), feasible(proto, "2"));
        assert!(two.iter().all(|t| one.contains(t)), "{proto}");
    }
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_workers() {
    let a = eharq(&["sweep-rho", "--workers", "1"]);
    let b = eharq(&["sweep-rho", "--workers", "4"]);
    assert_eq!(a.stdout, b.stdout);
    let c = eharq(&["simulate", "--horizon", "20000", "--reps", "3"]);
    let d = eharq(&["simulate", "--horizon", "20000", "--reps", "3", "--workers", "2"]);
    assert_eq!(c.status.code(), Some(exit::OK));
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn simulate_myopic_policy() {
    let out = eharq(&["simulate", "--policy", "myopic", "--horizon", "20000", "--reps", "2"]);
    assert_eq!(out.status.code(), Some(exit::OK));
    let v = json(&out);
    assert_eq!(v["replications"].as_array().map(Vec::len), Some(2));
}

#[test]
fn verify_passes() {
    let out = eharq(&["verify"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(exit::OK), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 8, "{text}");
}
