use std::path::Path;
use std::process::{Command, Output};

fn pmaflow(args: &[&str], config: &str, dir: &Path) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_pmaflow"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

const LINEAR: &str = r#"
[grid]
h = 0.1
[problem]
preset = "linear"
[solver]
snapshot_every = 0.25
stride = 2
reference = "linear"
"#;

#[test]
fn solve_writes_snapshots_report_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["solve"], LINEAR, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(dir.path(), "report.json");
    assert_eq!(rep["final_time"], 1.0);
    let snaps = rep["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 3);
    for s in snaps {
        assert!(dir.path().join("out").join(s["file"].as_str().unwrap()).exists());
    }
    let err = snaps[2]["sup_error"].as_f64().unwrap();
    assert!(err > 0.0 && err <= 0.5, "error {err}");

    let mut plot = csv::Reader::from_path(dir.path().join("out/plot.csv")).unwrap();
    assert_eq!(plot.headers().unwrap(), vec!["t", "sup_change", "sup_error"]);
    let rows: Vec<_> = plot.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), rep["steps"].as_u64().unwrap() as usize + 1);
    let with_error = rows.iter().filter(|r| !r[2].is_empty()).count();
    assert_eq!(with_error, 5);
}

#[test]
fn missing_or_broken_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pmaflow")).args(["solve", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = pmaflow(&["solve"], "[grid]\nspacing = 0.1\n", dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = pmaflow(&["solve"], "[problem]\nu0 = { kind = \"quadratic\" }\n", dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn admissible_reports_witness_and_inconclusive_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["admissible"], LINEAR, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep = json(dir.path(), "admissible.json");
    assert_eq!(rep["verdict"], "witness");
    assert!((rep["c"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(dir.path().join("out/witness.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["admissible"], "[problem]\npreset = \"log_capped\"\n", dir.path());
    assert_eq!(out.status.code(), Some(2));
    let rep = json(dir.path(), "admissible.json");
    assert!(rep["c"].is_null());
    assert!(rep["zero_set_mass"].as_f64().unwrap() > 1.0);
}

#[test]
fn barriers_and_regularize_pass_on_the_linear_flow() {
    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["barriers"], LINEAR, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(dir.path(), "barriers.json")["passed"], true);
    assert!(dir.path().join("out/super_02.csv").exists());

    let out = pmaflow(&["regularize"], LINEAR, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep = json(dir.path(), "regularize.json");
    assert_eq!(rep["lipschitz"]["violations"], 0);
    assert!(dir.path().join("out/sup_0004.csv").exists());
}

#[test]
fn elliptic_and_converge_on_the_decaying_family() {
    let cfg = r#"
[grid]
h = 0.1
[problem]
preset = "decaying"
horizon = 3.0
[solver]
snapshot_every = 0.5
[limit]
phi = { kind = "constant", value = 1.0 }
f = { kind = "constant", value = 1.0 }
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["elliptic"], cfg, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(json(dir.path(), "elliptic.json")["residual"].as_f64().unwrap() < 1e-5);

    let out = pmaflow(&["converge"], cfg, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rep = json(dir.path(), "converge.json");
    assert_eq!(rep["monotone_after_burn_in"], true);
    let mut r = csv::Reader::from_path(dir.path().join("out/convergence.csv")).unwrap();
    let errs: Vec<f64> = r.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(errs.len(), 7);
    assert!(errs[6] < errs[0]);
}

#[test]
fn analyze_is_seeded_and_reports_the_seam() {
    let cfg = r#"
seed = 11
[grid]
h = 0.1
[problem]
preset = "linear"
[solver]
snapshot_every = 0.02
[analyze]
seam = 0.5
"#;
    let dir = tempfile::tempdir().unwrap();
    let out = pmaflow(&["analyze"], cfg, dir.path());
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = json(dir.path(), "analyze.json");
    assert_eq!(rep["space"]["seed"], 11);
    assert!(rep["seam"]["difference"].as_f64().unwrap() < 1e-9);
    assert_eq!(rep["time"]["passed"], true);

    let again = tempfile::tempdir().unwrap();
    pmaflow(&["analyze", "--seed", "11"], &cfg.replace("seed = 11", "seed = 3"), again.path());
    assert_eq!(json(again.path(), "analyze.json")["space"], rep["space"]);
}
