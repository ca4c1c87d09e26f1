use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use zeitlin::experiment::Snapshot;
use zeitlin::stochastic::NoiseModel;

fn zeitlin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zeitlin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn detect_kink_reports_breakpoint() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spec.csv");
    let mut text = String::from("l,E\n");
    for l in 1..=40 {
        let x = l as f64;
        let e = if l <= 12 { x.powi(-5) } else { 12f64.powi(-4) / x };
        text.push_str(&format!("{l},{e}\n"));
    }
    fs::write(&csv, text).unwrap();
    let out = zeitlin(&["detect-kink", "--spectrum", path(&csv), "--lo", "2", "--hi", "38"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains("l_bar = 12"), "{s}");
    assert!(s.contains("found = true"), "{s}");
}

#[test]
fn missing_config_exits_with_config_code() {
    let out = zeitlin(&["--config", "/nonexistent/run.toml", "dns"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("/nonexistent/run.toml"), "{}", stderr(&out));
}

#[test]
fn invalid_config_value_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "n = 8\nclosure = \"magic\"\n").unwrap();
    let out = zeitlin(&["--config", path(&cfg), "dns"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn blow_up_exits_with_code_and_keeps_last_good_state() {
    let dir = tempfile::tempdir().unwrap();
    let noise = dir.path().join("noise.txt");
    NoiseModel::uniform(10, 4, 0.0, 1.0, 3).unwrap().save(&noise).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        format!(
            "n = 10\nh = 5.0\nt_end = 500.0\nl_bar = 4\nout_dir = \"{}\"\n[ic]\nkind = \"blob\"\namplitude = 50.0\n",
            path(dir.path())
        ),
    )
    .unwrap();
    let out = zeitlin(&["--config", path(&cfg), "run-closure", "--closure", "epn", "--noise", path(&noise)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let last = dir.path().join("run_epn_last_good.ezsn");
    assert!(stderr(&out).contains("run_epn_last_good.ezsn"), "{}", stderr(&out));
    let s = Snapshot::read(&last).unwrap();
    assert!(s.state.is_finite());
}

#[test]
fn gen_ic_then_export_grid_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let out = zeitlin(&["--out-dir", d, "--seed", "4", "-q", "gen-ic", "--n", "12"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ic = dir.path().join("ic.ezsn");
    let s = Snapshot::read(&ic).unwrap();
    assert_eq!((s.state.n(), s.seed), (12, 4));

    let out = zeitlin(&["--out-dir", d, "export-grid", "--snapshot", path(&ic), "--n-theta", "12", "--n-phi", "24"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("theta,phi,value"));
    assert_eq!(lines.count(), 288);

    let out = zeitlin(&["--out-dir", d, "diagnose", "--snapshot", path(&ic), "--l-bar", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("energy = "));
    for f in ["diagnose_spectrum.csv", "diagnose_invariants.csv", "diagnose_transfer.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn pipeline_smoke_run_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "n = 16\nseed = 3\nh = 0.25\nt_end = 5.0\nsnapshot_every = 1\nkink_range = [2, 12]\n\
         [dns]\nwindow = 20.0\ntol = 0.05\nmax_time = 80.0\n",
    )
    .unwrap();
    let out = zeitlin(&["--config", path(&cfg), "--out-dir", path(dir.path()), "-q", "pipeline"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout(&out);
    assert!(s.contains("l_bar = "), "{s}");
    assert!(s.contains("dns distance = 0 "), "{s}");
    assert!(dir.path().join("summary.toml").exists());

    let reference = dir.path().join("run_dns_spectrum.csv");
    let other = dir.path().join("run_epn_spectrum.csv");
    let out = zeitlin(&["compare", "--reference", path(&reference), path(&reference), path(&other)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<f64> = stdout(&out)
        .lines()
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], 0.0);
    assert!(lines[1] > 0.0 && lines[1].is_finite());
}
