use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn be(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_be"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("exchange.csv"), "0,1\n1,0\n").unwrap();
    std::fs::write(d.join("rad.json"), r#"{"type":"rademacher"}"#).unwrap();
    std::fs::write(
        d.join("tri.json"),
        r#"{"vertices":3,"edges":[[0,1],[1,2],[2,0]]}"#,
    )
    .unwrap();
    dir
}

#[test]
fn exchange_matrix_report() {
    let dir = setup();
    let d = dir.path();
    let out = be(
        d,
        &[
            "qform",
            "--matrix",
            "exchange.csv",
            "--law",
            "rad.json",
            "--out",
            "r.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = json(d, "r.json");
    let a = &r["analysis"];
    assert_eq!(a["sigma2"], 4.0);
    assert_eq!(a["tr_a4"], 2.0);
    assert_eq!(a["influence"], 1.0);
    assert_eq!(a["gamma"], 0.0);
    assert!((a["lambda1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let bounds = r["bounds"].as_array().unwrap();
    let value = |name: &str| {
        bounds.iter().find(|b| b["name"] == name).unwrap()["value"]
            .as_f64()
            .unwrap()
    };
    assert!((value("r1") - (2f64.sqrt() + 0.5)).abs() < 1e-12);
    assert!((value("r2") - 2f64.sqrt() / 4.0).abs() < 1e-12);
    assert!((value("gt") - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(bounds
        .iter()
        .all(|b| b["constant_free"] == true && b["scaled"].is_null()));
    // Analytic-only by default.
    assert!(r.get("empirical").is_none());
    assert_eq!(r["tool"], "be");
    assert_eq!(r["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn constant_is_echoed() {
    let dir = setup();
    let d = dir.path();
    let out = be(
        d,
        &[
            "qform",
            "--matrix",
            "exchange.csv",
            "--law",
            "rad.json",
            "--constant",
            "3",
            "--out",
            "r.json",
        ],
    );
    assert!(out.status.success());
    let r = json(d, "r.json");
    assert_eq!(r["constant"], 3.0);
    let b = &r["bounds"][1];
    assert!((b["scaled"].as_f64().unwrap() - 3.0 * b["value"].as_f64().unwrap()).abs() < 1e-15);
}

#[test]
fn empirical_section_when_sampling() {
    let dir = setup();
    let d = dir.path();
    let out = be(
        d,
        &[
            "qform",
            "--matrix",
            "exchange.csv",
            "--law",
            "rad.json",
            "--samples",
            "1000",
            "--out",
            "r.json",
        ],
    );
    assert!(out.status.success());
    let e = &json(d, "r.json")["empirical"];
    assert_eq!(e["method"], "empirical");
    assert_eq!(e["n"], 1000);
    // Q/sigma = X1 X2 is a fair sign, so the distance is about Phi(1) - 1/2.
    assert!((e["value"].as_f64().unwrap() - 0.3413).abs() < e["dkw"].as_f64().unwrap());
}

#[test]
fn input_errors_exit_2() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("asym.csv"), "0,1\n2,0\n").unwrap();
    std::fs::write(
        d.join("skew.json"),
        r#"{"type":"finite","atoms":[[0,0.5],[1,0.5]]}"#,
    )
    .unwrap();
    let cases: [&[&str]; 5] = [
        &["qform", "--matrix", "asym.csv", "--law", "rad.json"],
        &["qform", "--matrix", "missing.csv", "--law", "rad.json"],
        &["qform", "--matrix", "exchange.csv", "--law", "skew.json"],
        &[
            "qform",
            "--matrix",
            "exchange.csv",
            "--law",
            "rad.json",
            "--samples",
            "10",
        ],
        &["qform", "--matrix", "exchange.csv"],
    ];
    for args in cases {
        assert_eq!(be(d, args).status.code(), Some(2), "{args:?}");
    }
    let out = Command::new(env!("CARGO_BIN_EXE_be"))
        .args(["qform", "--matrix", "exchange.csv", "--law", "rad.json"])
        .current_dir(d)
        .env("BE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_variance_exit_3() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("diag.csv"), "1,0\n0,1\n").unwrap();
    let out = be(d, &["qform", "--matrix", "diag.csv", "--law", "rad.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn qform_sweep_rows() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(
        d.join("sweep.json"),
        r#"{"n":[16,32,64],"law":{"type":"rademacher"},"samples":2000,"seed":1}"#,
    )
    .unwrap();
    let out = be(d, &["qform", "--sweep", "sweep.json", "--out", "s.json"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,rate_r1,rate_r2,dk_emp,dkw");
    assert_eq!(lines.len(), 4);
    let col = |k: usize| -> Vec<f64> {
        lines[1..]
            .iter()
            .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
            .collect()
    };
    for k in [1, 2] {
        assert!(
            col(k).windows(2).all(|w| w[1] < w[0]),
            "column {k} not decreasing"
        );
    }
    assert_eq!(json(d, "s.json")["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn chaos_verify_default_and_corrupted() {
    let dir = setup();
    let d = dir.path();
    let out = be(d, &["chaos-verify", "--out", "c.json"]);
    assert!(out.status.success());
    let r = json(d, "c.json");
    assert_eq!(r["kernels_checked"], 50);
    for id in r["identities"].as_array().unwrap() {
        assert!(id["max_residual"].as_f64().unwrap() < 1e-10, "{id}");
    }

    std::fs::write(
        d.join("bad.json"),
        r#"{"order":1,"entries":[{"subset":[0],"array":[1.0,0.0,0.0]}]}"#,
    )
    .unwrap();
    let out = be(
        d,
        &[
            "chaos-verify",
            "--kernel",
            "bad.json",
            "--out",
            "bad_report.json",
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("canonical"));
    let r = json(d, "bad_report.json");
    assert!(r["failed"]
        .as_array()
        .unwrap()
        .iter()
        .any(|f| f == "canonical"));
}

#[test]
fn ustat_matches_qform_row() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(
        d.join("w.json"),
        r#"{"order":2,"n":4,"entries":[{"subset":[0,1],"value":1},{"subset":[1,2],"value":0.5},{"subset":[2,3],"value":-1},{"subset":[0,3],"value":2}]}"#,
    )
    .unwrap();
    std::fs::write(
        d.join("g.json"),
        r#"{"law":{"type":"rademacher"},"order":2,"product":true}"#,
    )
    .unwrap();
    let out = be(
        d,
        &[
            "ustat",
            "--weights",
            "w.json",
            "--kernel",
            "g.json",
            "--out",
            "u.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = &json(d, "u.json")["qform_crosscheck"];
    assert!((c["ratio"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn graph_single_and_sweeps() {
    let dir = setup();
    let d = dir.path();
    let out = be(
        d,
        &[
            "graph", "--graph", "tri.json", "--law", "rad.json", "--n", "10", "--p", "0.5",
            "--out", "g.json",
        ],
    );
    assert!(out.status.success());
    let r = json(d, "g.json");
    assert_eq!(r["rows"][0]["min_subgraph_scale"], 50.0);
    assert_eq!(r["automorphisms"], 6);

    std::fs::write(
        d.join("grid.json"),
        r#"{"n":[10,20],"p":[0.3,0.5],"law":{"type":"rademacher"},"samples":2000,"seed":2,"pilot_samples":2000}"#,
    )
    .unwrap();
    let out = be(
        d,
        &[
            "graph",
            "--graph",
            "tri.json",
            "--sweep",
            "grid.json",
            "--out",
            "grid_report.json",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(d.join("grid_report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,p,rg_rate,dk_emp,dkw");
    assert_eq!(lines.len(), 5);
    assert!(lines[1..]
        .iter()
        .all(|l| l.split(',').all(|f| !f.is_empty())));

    std::fs::write(
        d.join("empty.json"),
        r#"{"n":[],"p":[0.5],"law":{"type":"rademacher"},"samples":0,"seed":1}"#,
    )
    .unwrap();
    let out = be(
        d,
        &[
            "graph",
            "--graph",
            "tri.json",
            "--sweep",
            "empty.json",
            "--out",
            "empty_report.json",
        ],
    );
    assert!(out.status.success());
    assert_eq!(
        std::fs::read_to_string(d.join("empty_report.csv")).unwrap(),
        "n,p,rg_rate,dk_emp,dkw\n"
    );
}

#[test]
fn reports_are_reproducible() {
    let dir = setup();
    let d = dir.path();
    let args = [
        "qform",
        "--matrix",
        "exchange.csv",
        "--law",
        "rad.json",
        "--samples",
        "500",
        "--seed",
        "7",
    ];
    let a = be(d, &args).stdout;
    let b = be(d, &args).stdout;
    assert_eq!(a, b);
    let c = be(
        d,
        &[
            "qform",
            "--matrix",
            "exchange.csv",
            "--law",
            "rad.json",
            "--samples",
            "500",
            "--seed",
            "8",
        ],
    )
    .stdout;
    assert_ne!(a, c);
}
