use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_h22lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

const CHAIN: &str = r#"{
    "graph": {"family": "chain", "length": 6, "alpha": 4.0, "wbar": 271.0, "pinning": "P2"},
    "observables": [
        {"kind": "cosh_u_diff_pow", "a": 0, "b": "rho", "m": 2.0},
        {"kind": "cosh_u_pow", "vertex": 2, "m": 0.0}
    ],
    "regime": {"alpha": 4.0, "gamma": 0.0, "kappa": 1.0, "wbar": 271.0},
    "sampler": {"n_steps": 6000, "burn_in": 1000},
    "seed": 3
}"#;

const SMALL_WBAR: &str = r#"{
    "graph": {"family": "chain", "length": 4, "alpha": 4.0, "wbar": 50.0, "pinning": "P2"},
    "observables": [{"kind": "cosh_u_pow", "vertex": 0, "m": 1.0}],
    "regime": {"alpha": 4.0, "kappa": 1.0, "wbar": 50.0},
    "sampler": {"n_steps": 3000, "burn_in": 500},
    "seed": 1
}"#;

const TWO_SITES: &str = r#"{
    "graph": {"family": "custom", "weights": [[0.0, 3.0], [3.0, 0.0]], "pinning": [2.0, 2.0]},
    "observables": [{"kind": "cosh_u_pow", "vertex": 0, "m": 1.0}, {"kind": "s_squared", "vertex": 1}],
    "regime": {"alpha": 4.0, "kappa": 1.0, "wbar": 271.0},
    "quadrature": {"rule": "gauss_legendre", "points_per_axis": 64},
    "seed": 0
}"#;

#[test]
fn sample_writes_report_and_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "chain.json", CHAIN);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(&out_a).unwrap();
    assert_eq!(a, std::fs::read_to_string(&out_b).unwrap());
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("observable,m,estimate,stderr,ess,bound,margin_sigma,status"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[5], "2");
    assert_eq!(first[7], "pass");
    let zero: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!((zero[2], zero[5], zero[7]), ("1", "2", "pass"));

    let chains_a = std::fs::read(dir.path().join("a.chains.csv")).unwrap();
    assert_eq!(chains_a, std::fs::read(dir.path().join("b.chains.csv")).unwrap());
    let header = String::from_utf8(chains_a).unwrap();
    assert!(header.starts_with("chain_id,observable,mean,stderr,ess,acceptance_rate\n"));
    let prov: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 9);
    assert_eq!(prov["config_hash"].as_str().unwrap().len(), 64);
    assert!(prov["timestamp_unix"].as_u64().is_some());
}

#[test]
fn inadmissible_rows_are_vacuous_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL_WBAR);
    let out = dir.path().join("small.csv");
    let o = run(&["sample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vacuous"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[5], row[6], row[7]), ("", "", "vacuous"));
}

#[test]
fn oracle_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "two.json", TWO_SITES);
    let o = run(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].ends_with("vacuous"));
}

#[test]
fn constants_json() {
    let o = run(&["constants", "--alpha", "4", "--gamma", "0", "--kappa", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["w0_bar"].as_f64().unwrap() - 269.83665558015383).abs() < 1e-9);
}

#[test]
fn verify_writes_lemma_reports() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    let o = run(&["verify", "--suite", "resistance", "--trials", "30", "--seed", "4", "--report-dir", reports.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let files: Vec<_> = std::fs::read_dir(&reports).unwrap().collect();
    assert_eq!(files.len(), 3);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(reports.join("resistance_series_law.json")).unwrap()).unwrap();
    for key in ["lemma", "trials", "failures", "worst_residual", "seed"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    assert_eq!(r["trials"], 30);
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["constants", "--alpha", "3", "--kappa", "1"]).status.code(), Some(2));
    assert_eq!(run(&["sample", "--config", "/nonexistent/x.json", "--out", "/tmp/x.csv"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
}
