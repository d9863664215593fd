use std::path::Path;
use std::process::Command;

use erwlab_cli::config::{parse_args, Format, RunConfig, Subcommand};
use proptest::prelude::*;

fn erwlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_erwlab")).args(args).output().expect("binary runs")
}

fn base_args(sub: Subcommand) -> Vec<String> {
    let s: &[&str] = match sub {
        Subcommand::Speed => &["--n", "50"],
        Subcommand::Holes => &["--n", "300", "--m", "30"],
        Subcommand::Visits => &["--r", "4", "--n", "64"],
        Subcommand::Hitting => &["--r", "4"],
        Subcommand::AvoidOrigin => &["--k", "1,2"],
        Subcommand::Blocks => &["--n", "200"],
        Subcommand::Coupling => &["--n", "100"],
        Subcommand::Alpha => &["--lambda", "1", "--base-n", "1000", "--base-alpha", "0.5", "--top-n", "100000"],
        Subcommand::Oracle => &["--r", "4", "--n", "1000"],
    };
    let mut v = vec!["erwlab".to_string(), sub.name().to_string()];
    v.extend(s.iter().map(|a| a.to_string()));
    v
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    (
        0..Subcommand::ALL.len(),
        1e-6f64..=1.0 / 6.0,
        3u64..1_000_000,
        0u64..5000,
        0.5f64..1e3,
        1u64..10_000,
        any::<u64>(),
        1usize..64,
        (0.5f64..0.999, prop::collection::vec(1u32..100, 1..5), 0.1f64..10.0, -5.0f64..5.0, -100i64..100),
        (1u32..8, 2u64..10_000, 1e-3f64..1.0, any::<bool>(), any::<bool>()),
    )
        .prop_map(|(i, eps, n, m, r, reps, seed, workers, (level, k, mult, drift, half), (lambda, base_n, base_alpha, json, out))| {
            let sub = Subcommand::ALL[i];
            let mut a: Vec<String> = vec!["erwlab".into(), sub.name().into()];
            let mut push = |k: &str, v: String| {
                a.push(format!("--{k}"));
                a.push(v);
            };
            match sub {
                Subcommand::Speed => {
                    push("epsilon", eps.to_string());
                    push("n", n.to_string());
                    push("half-space", half.to_string());
                }
                Subcommand::Holes => {
                    push("n", n.to_string());
                    push("m", m.to_string());
                }
                Subcommand::Visits => {
                    push("r", r.to_string());
                    push("n", n.to_string());
                }
                Subcommand::Hitting => push("r", r.to_string()),
                Subcommand::AvoidOrigin => {
                    push("k", k.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
                    push("multiplier", mult.to_string());
                }
                Subcommand::Blocks => {
                    push("epsilon", eps.to_string());
                    push("n", n.to_string());
                    push("drift-ref", drift.to_string());
                }
                Subcommand::Coupling => {
                    push("epsilon", eps.to_string());
                    push("n", n.to_string());
                }
                Subcommand::Alpha => {
                    push("lambda", lambda.to_string());
                    push("base-n", base_n.to_string());
                    push("base-alpha", base_alpha.to_string());
                    push("top-n", (base_n * 100).to_string());
                }
                Subcommand::Oracle => {
                    push("r", r.to_string());
                    push("n", n.to_string());
                }
            }
            if sub.replicated() {
                push("reps", reps.to_string());
                push("seed", seed.to_string());
                push("workers", workers.to_string());
                push("level", level.to_string());
            }
            if json {
                push("format", "json".into());
            }
            if out {
                push("out", "/tmp/erwlab-out".into());
            }
            parse_args(a).expect("generated argv is valid")
        })
}

proptest! {
    #[test]
    fn to_args_round_trips(config in arb_config()) {
        let back = parse_args(config.to_args()).unwrap();
        prop_assert_eq!(back, config);
    }
}

#[test]
fn every_subcommand_round_trips_with_defaults() {
    for sub in Subcommand::ALL {
        let mut argv = base_args(sub);
        if sub.replicated() {
            argv.extend(["--workers".to_string(), "1".to_string()]);
        }
        let c = parse_args(argv).unwrap();
        assert_eq!(parse_args(c.to_args()).unwrap(), c, "{sub}");
        assert_eq!(c.format, Format::Csv);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(erwlab(&[]).status.code(), Some(2));
    let out = erwlab(&["speed", "--epsilon", "0.2", "--n", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon must satisfy 0 < ε ≤ 1/6"));
    assert_eq!(erwlab(&["holes", "--n", "100"]).status.code(), Some(2));
    assert_eq!(erwlab(&["--help"]).status.code(), Some(0));
    assert_eq!(erwlab(&["holes", "--config", "/nonexistent/erwlab.json"]).status.code(), Some(3));
    // infeasible α recursion is a runtime failure
    let out = erwlab(&["alpha", "--lambda", "5", "--base-n", "1000", "--base-alpha", "0.5", "--top-n", "1000000000000"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(erwlab(&["speed", "--n", "20", "--reps", "2", "--workers", "1"]).status.code(), Some(0));
}

#[test]
fn holes_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = erwlab(&["holes", "--n", "1000", "--m", "64", "--reps", "5", "--seed", "3", "--workers", "2", "--out", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("holes.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rep,seed,n,m,holes,distinct_r1,distinct_r2"));
    assert_eq!(lines.count(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("holes.json")).unwrap()).unwrap();
    assert_eq!(summary["subcommand"], "holes");
    assert_eq!(summary["seed"], 3);
    assert!(summary["wall_time"].as_f64().is_some());
    assert!(summary["version"].is_string());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("holes"));
}

#[test]
fn json_format_embeds_rows() {
    let out = erwlab(&["hitting", "--r", "4", "--reps", "10", "--workers", "1", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 10);
    assert_eq!(v["params"]["r"].as_f64(), Some(4.0));
}

fn csv_with_workers(dir: &Path, sub: Subcommand, workers: usize) -> String {
    let d = dir.join(format!("{}-{workers}", sub.name()));
    let mut argv = base_args(sub);
    argv.extend(["--reps", "6", "--seed", "17"].map(String::from));
    argv.extend(["--workers".into(), workers.to_string(), "--out".into(), d.display().to_string()]);
    let out = erwlab(&argv[1..].iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read_to_string(d.join(format!("{}.csv", sub.name()))).unwrap()
}

#[test]
fn rows_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    for sub in Subcommand::ALL.into_iter().filter(|s| s.replicated()) {
        let one = csv_with_workers(dir.path(), sub, 1);
        let four = csv_with_workers(dir.path(), sub, 4);
        assert_eq!(one, four, "{sub}");
        assert!(one.lines().count() > 1, "{sub}");
    }
}

#[test]
fn checkpoint_resume_gives_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.jsonl");
    let ck = ck.to_str().unwrap();
    let run = |reps: &str, out: &str| {
        let o = dir.path().join(out);
        let r = erwlab(&["holes", "--n", "500", "--m", "40", "--reps", reps, "--workers", "1", "--checkpoint", ck, "--out", o.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read_to_string(o.join("holes.csv")).unwrap()
    };
    let partial = run("4", "a");
    // simulate a crash mid-write
    let mut text = std::fs::read_to_string(ck).unwrap();
    text.push_str("{\"rep\": 4, \"ro");
    std::fs::write(ck, text).unwrap();
    let resumed = run("8", "b");
    let fresh = {
        let o = dir.path().join("c");
        erwlab(&["holes", "--n", "500", "--m", "40", "--reps", "8", "--workers", "3", "--out", o.to_str().unwrap()]);
        std::fs::read_to_string(o.join("holes.csv")).unwrap()
    };
    assert_eq!(resumed, fresh);
    assert!(resumed.starts_with(&partial));
}
