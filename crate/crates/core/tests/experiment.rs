use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use zeitlin::diagnostics::energy_spectrum;
use zeitlin::dynamics::ClosureKind;
use zeitlin::experiment::*;
use zeitlin::{Basis, Error, ZMatrix};

fn odd_state(n: usize) -> ZMatrix<f64> {
    let specials = [-0.0, f64::MIN_POSITIVE / 8.0, 1.0 + f64::EPSILON, -1e300, f64::NAN, 0.1, -3.5];
    let mut w = ZMatrix::zeros(n);
    for (k, x) in w.re_mut().iter_mut().enumerate() {
        *x = specials[k % specials.len()];
    }
    for (k, x) in w.im_mut().iter_mut().enumerate() {
        *x = specials[(3 * k + 1) % specials.len()] * 0.5;
    }
    w
}

fn bits(w: &ZMatrix<f64>) -> Vec<u64> {
    w.re().iter().chain(w.im()).map(|x| x.to_bits()).collect()
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let s = Snapshot {
        closure: ClosureKind::Salt,
        step: 123_456_789_012,
        time: 1234.25,
        seed: u64::MAX - 5,
        state: odd_state(5),
    };
    let bytes = s.to_bytes();
    let back = Snapshot::from_bytes(&bytes).unwrap();
    assert_eq!(back.closure, s.closure);
    assert_eq!((back.step, back.seed), (s.step, s.seed));
    assert_eq!(back.time.to_bits(), s.time.to_bits());
    assert_eq!(bits(&back.state), bits(&s.state));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.ezsn");
    s.write(&path).unwrap();
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert_eq!(bits(&Snapshot::read(&path).unwrap().state), bits(&s.state));
}

#[test]
fn snapshot_layout_matches_documented_offsets() {
    let mut state = ZMatrix::zeros(3);
    state.set(0, 1, (0.5, -2.0));
    let s = Snapshot {
        closure: ClosureKind::EnergyPreserving,
        step: 7,
        time: 1.75,
        seed: 42,
        state,
    };
    let b = s.to_bytes();
    let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
    let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().unwrap());
    assert_eq!(&b[..4], b"EZSN");
    assert_eq!(u32_at(4), 1);
    assert_eq!(u32_at(8), 3);
    assert_eq!(b[12], 3);
    assert_eq!(u64_at(13), 7);
    assert_eq!(f64::from_bits(u64_at(21)), 1.75);
    assert_eq!(u64_at(29), 42);
    assert_eq!(b.len(), 37 + 9 * 16);
    // entry (0, 1) is the second row-major entry
    assert_eq!(f64::from_bits(u64_at(37 + 16)), 0.5);
    assert_eq!(f64::from_bits(u64_at(37 + 24)), -2.0);
}

#[test]
fn snapshot_rejects_corruption() {
    let s = Snapshot {
        closure: ClosureKind::FullDns,
        step: 0,
        time: 0.0,
        seed: 1,
        state: ZMatrix::zeros(4),
    };
    let good = s.to_bytes();
    let mut bad_version = good.clone();
    bad_version[4..8].copy_from_slice(&2u32.to_le_bytes());
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    let mut bad_closure = good.clone();
    bad_closure[12] = 9;
    let truncated = &good[..good.len() - 1];
    for b in [&bad_version[..], &bad_magic[..], &bad_closure[..], truncated, &good[..10]] {
        assert!(Snapshot::from_bytes(b).is_err());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v2.ezsn");
    fs::write(&path, &bad_version).unwrap();
    assert!(matches!(Snapshot::read(&path), Err(Error::Format { .. })));
    assert!(matches!(Snapshot::read(&dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn gen_ic_is_deterministic() {
    let basis = Basis::build(12).unwrap();
    let p = IcProfile::default();
    let a = gen_ic(&basis, 5, &p).unwrap();
    let b = gen_ic(&basis, 5, &p).unwrap();
    let c = gen_ic(&basis, 6, &p).unwrap();
    assert_eq!(bits(&a), bits(&b));
    assert_ne!(bits(&a), bits(&c));
    let zero = gen_ic(&basis, 5, &IcProfile::Table { amplitudes: vec![0.0; 11] }).unwrap();
    assert!(zero.re().iter().chain(zero.im()).all(|&x| x == 0.0));
    assert!(gen_ic(&basis, 5, &IcProfile::Table { amplitudes: vec![-1.0] }).is_err());
    assert!(gen_ic(&basis, 5, &IcProfile::Blob { l0: Some(0.0), amplitude: 1.0 }).is_err());
}

fn mean_spectrum(basis: &Basis, seeds: std::ops::Range<u64>) -> Vec<f64> {
    let k = (seeds.end - seeds.start) as f64;
    let mut mean = vec![0.0; basis.n() - 1];
    for seed in seeds {
        let e = energy_spectrum(basis, &gen_ic(basis, seed, &IcProfile::default()).unwrap()).unwrap();
        for (m, x) in mean.iter_mut().zip(e) {
            *m += x / k;
        }
    }
    mean
}

// E(l) = ½ Σ_m ω²/(l(l+1)) with ω = a(l) ξ  ⇒  E[E(l)] = a²(2l+1) / (2l(l+1))
fn expected_ic_spectrum(n: usize, l: usize) -> f64 {
    let (x, l0) = (l as f64, n as f64 / 8.0);
    let a = x * (-(x / l0).powi(2)).exp();
    a * a * (2.0 * x + 1.0) / (2.0 * x * (x + 1.0))
}

#[test]
fn gen_ic_spectrum_matches_expectation() {
    let n = 64;
    let basis = Basis::build(n).unwrap();
    let expect: Vec<f64> = (1..n).map(|l| expected_ic_spectrum(n, l)).collect();

    // 100 seeds: whole spectrum, relative L² error
    let mean = mean_spectrum(&basis, 0..100);
    let num: f64 = mean.iter().zip(&expect).map(|(m, e)| (m - e).powi(2)).sum();
    let den: f64 = expect.iter().map(|e| e * e).sum();
    assert!((num / den).sqrt() < 0.1, "relative error {}", (num / den).sqrt());

    // per degree the sampling error of the mean is √(2/(2l+1))/√seeds, 8% at
    // l = 1 for 100 seeds, so the per-degree 10% check uses 400
    let mean = mean_spectrum(&basis, 0..400);
    for l in 1..=24 {
        let rel = (mean[l - 1] - expect[l - 1]).abs() / expect[l - 1];
        assert!(rel < 0.1, "l = {l}: mean {} expected {} ({rel})", mean[l - 1], expect[l - 1]);
    }
}

#[test]
fn missing_config_names_the_path() {
    let err = RunConfig::load(Path::new("/nonexistent/run.toml")).unwrap_err();
    assert!(matches!(err, Error::ConfigFile { .. }));
    assert!(err.to_string().contains("/nonexistent/run.toml"));
}

fn smoke_config(dir: &Path, l_bar: LBar) -> RunConfig {
    RunConfig {
        n: 16,
        seed: 3,
        h: 0.25,
        t_end: 10.0,
        l_bar,
        snapshot_every: 1,
        out_dir: dir.to_path_buf(),
        kink_range: Some((2, 12)),
        dns: DnsStage {
            window: 20.0,
            tol: 0.05,
            max_time: 80.0,
        },
        ..RunConfig::default()
    }
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn smoke_pipeline_emits_all_artifacts_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), LBar::Auto);
    let report = run_pipeline(&cfg).unwrap();
    let s = &report.summary;
    assert!(s.failed_stage.is_none());
    assert!(s.dns.stop_time >= 40.0 && s.dns.fit_samples >= 30);
    assert!(s.kink.detected.is_some());
    assert_eq!(s.runs.len(), 4);
    for kind in ClosureKind::ALL {
        let r = s.run(kind).unwrap();
        assert_eq!(r.status, "ok");
        assert_eq!(r.final_time, 10.0);
        assert!(r.distance.unwrap().is_finite());
        for suffix in ["spectrum.csv", "invariants.csv", "final.ezsn"] {
            assert!(dir.path().join(format!("run_{}_{suffix}", kind.name())).exists());
        }
    }
    assert_eq!(s.run(ClosureKind::FullDns).unwrap().distance, Some(0.0));
    assert!(s.transfer.closure_residual < 1e-10);

    let listed = verify_manifest(dir.path()).unwrap();
    let mut on_disk: Vec<String> = dir_bytes(dir.path()).into_keys().filter(|f| f != "manifest.txt").collect();
    on_disk.sort();
    let mut sorted = listed.clone();
    sorted.sort();
    assert_eq!(sorted, on_disk);
    for f in ["stationary.ezsn", "noise_model.txt", "distances.csv", "transfer_mean.csv", "summary.toml"] {
        assert!(listed.iter().any(|x| x == f), "{f} missing from manifest");
    }
    let stationary = Snapshot::read(&dir.path().join("stationary.ezsn")).unwrap();
    assert_eq!(stationary.time, s.dns.stop_time);

    let first = dir_bytes(dir.path());
    run_pipeline(&cfg).unwrap();
    assert_eq!(dir_bytes(dir.path()), first);
}

#[test]
fn pipeline_with_full_cutoff_reproduces_dns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_config(dir.path(), LBar::Fixed(15));
    let report = run_pipeline(&cfg).unwrap();
    let d = report.summary.run(ClosureKind::Deterministic).unwrap().distance.unwrap();
    assert!(d < 1e-10, "distance {d}");
    let a = Snapshot::read(&dir.path().join("run_dns_final.ezsn")).unwrap();
    let b = Snapshot::read(&dir.path().join("run_no-model_final.ezsn")).unwrap();
    let diff = a.state.sub(&b.state).frobenius_norm() / a.state.frobenius_norm();
    assert!(diff < 1e-11, "relative difference {diff}");
}

#[test]
fn pipeline_failure_names_stage_and_keeps_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = smoke_config(dir.path(), LBar::Auto);
    cfg.ic = IcSpec::Snapshot {
        snapshot: dir.path().join("absent.ezsn"),
    };
    let err = run_pipeline(&cfg).unwrap_err();
    let Error::Stage { stage, .. } = &err else {
        panic!("expected a stage error, got {err}");
    };
    assert_eq!(stage, "ic");
    assert!(matches!(err.root(), Error::Io { .. }));
    let summary = fs::read_to_string(dir.path().join("summary.toml")).unwrap();
    assert!(summary.contains("failed_stage = \"ic\""));
    verify_manifest(dir.path()).unwrap();
}
