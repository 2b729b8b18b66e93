use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn iterreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iterreg")).args(args).output().unwrap()
}

fn file_digest(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn same_seed_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = iterreg(&["rate_sweep", "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(file_digest(&a.join("metrics.csv")), file_digest(&b.join("metrics.csv")));
    let csv = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("# iterreg-metrics v1 experiment=rate_sweep"));
    assert!(a.join("report.json").exists());
}

#[test]
fn config_file_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("oracle.toml");
    std::fs::write(&cfg, "experiment = \"oracle_bounds\"\ntrials = 2\n[problem]\ndelta = 0.1\n").unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, seed) in [(&a, "1"), (&b, "2")] {
        let o = iterreg(&["oracle_bounds", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("dgd_stopped_error"));
    }
    let o = iterreg(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = String::from_utf8_lossy(&o.stdout);
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "# iterreg-compare v1 experiment=oracle_bounds");
    assert!(lines.next().unwrap().starts_with("metric,a_mean,a_std,b_mean,b_std"));
    assert!(table.contains("dgd_stopped_error,"));
}

#[test]
fn bad_inputs_exit_with_an_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "trials = 1\n[problem]\nbogus = 3\n").unwrap();
    let o = iterreg(&["oracle_bounds", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("iterreg: error:"), "{}", stderr(&o));

    std::fs::write(&cfg, "experiment = \"deblurring\"\n").unwrap();
    let o = iterreg(&["oracle_bounds", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("config is for deblurring"));

    let o = iterreg(&["compare", "/nonexistent/a", "/nonexistent/b"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("iterreg: error:"));

    let o = iterreg(&["no_such_experiment"]);
    assert!(!o.status.success());
}
