mod common;

use common::*;
use proptest::prelude::*;
use zeitlin::diagnostics::*;
use zeitlin::{Basis, ZMatrix};

#[test]
fn spectrum_of_single_mode() {
    let basis = Basis::build(9).unwrap();
    let a = 1.7;
    let w = basis.basis_element(1, 0).unwrap().scaled(a);
    let e = energy_spectrum(&basis, &w).unwrap();
    assert!((e[0] - a * a / 4.0).abs() < 1e-14);
    assert!(e[1..].iter().all(|&x| x.abs() < 1e-28));
    let zero = energy_spectrum(&basis, &ZMatrix::zeros(9)).unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));
}

/// `½ Tr(PW)` by dense trace.
fn trace_energy(p: &ZMatrix<f64>, w: &ZMatrix<f64>) -> f64 {
    0.5 * (to_dense(p) * to_dense(w)).trace().re
}

#[test]
fn invariants_of_t10() {
    let basis = Basis::build(7).unwrap();
    let w = basis.basis_element(1, 0).unwrap();
    let inv = invariants(&basis, &w, 4).unwrap();
    assert!((inv.casimirs[0].0 + 1.0).abs() < 1e-14);
    assert!((inv.enstrophy - 1.0).abs() < 1e-14);
    assert!((inv.energy - 0.25).abs() < 1e-14);
    assert_eq!(inv.casimirs.len(), 3);
    assert!((inv.angular_momentum[1] - 1.0).abs() < 1e-14);
    let z = invariants(&basis, &ZMatrix::zeros(7), 7).unwrap();
    assert_eq!(z.energy, 0.0);
    assert!(z.casimirs.iter().all(|&(a, b)| a == 0.0 && b == 0.0));
    assert!(invariants(&basis, &w, 8).is_err());
}

#[test]
fn transfer_vanishes_for_large_scale_field() {
    let basis = Basis::build(16).unwrap();
    let w = random_large(&basis, 5, 3);
    let r = energy_transfer(&basis, &w, 5).unwrap();
    let scale: f64 = r.coupling(Coupling::LargeLarge).iter().map(|x| x.abs()).sum();
    for c in [Coupling::LargeSmall, Coupling::SmallLarge, Coupling::SmallSmall] {
        assert!(r.coupling(c).iter().all(|&x| x.abs() < 1e-13 * scale), "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_matches_trace_form(seed in any::<u64>(), n in 3usize..24) {
        let basis = Basis::build(n).unwrap();
        let w = random_su(n, seed);
        let e: f64 = energy_spectrum(&basis, &w).unwrap().iter().sum();
        prop_assert!(energy_spectrum(&basis, &w).unwrap().iter().all(|&x| x >= 0.0));
        let p = basis.solve_poisson(&w).unwrap();
        let h = trace_energy(&p, &w);
        prop_assert!((e - h).abs() < 1e-10 * h.abs());
        let inv = invariants(&basis, &w, 2).unwrap();
        let c = basis.analyze(&w, n - 1).unwrap();
        prop_assert!((inv.casimirs[0].0 + c.sum_squares()).abs() < 1e-10 * c.sum_squares());
        prop_assert!((inv.energy - e).abs() < 1e-12 * e);
    }

    #[test]
    fn transfer_is_bilinear_and_tangent(seed in any::<u64>(), n in 8usize..24) {
        let basis = Basis::build(n).unwrap();
        let w = random_su(n, seed);
        let l_bar = (n as f64).sqrt().ceil() as usize;
        let r = energy_transfer(&basis, &w, l_bar).unwrap();
        let scale: f64 = r.flux.iter().sum::<f64>().max(1e-300);
        for l in 0..n - 1 {
            let s: f64 = r.couplings.iter().map(|c| c[l]).sum();
            prop_assert!((s - r.total[l]).abs() < 1e-10 * scale);
            prop_assert!(r.flux[l] == r.total[l].abs());
        }
        let total: f64 = r.total.iter().sum();
        prop_assert!(total.abs() < 1e-10 * scale);
        // enstrophy tangency: Σ ω [P,W] = 0
        let p = basis.solve_poisson(&w).unwrap();
        let rate = basis.analyze(&p.skew_commutator(&w), n - 1).unwrap();
        let om = basis.analyze(&w, n - 1).unwrap();
        let z: f64 = om.values().iter().zip(rate.values()).map(|(a, b)| a * b).sum();
        prop_assert!(z.abs() < 1e-10 * om.sum_squares() * rate.sum_squares().sqrt());
    }
}

#[test]
fn average_of_identical_reports_is_the_report() {
    let basis = Basis::build(10).unwrap();
    let r = energy_transfer(&basis, &random_su(10, 1), 3).unwrap();
    let avg = average_transfer(&[r.clone(), r.clone()]).unwrap();
    for (a, b) in avg.total.iter().zip(&r.total) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
    assert!(average_transfer(&[]).is_err());
}

#[test]
fn csv_outputs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = SpectrumSeries::new("dns");
    s.push(0.0, vec![1.0, 0.5, 0.25]);
    s.push(0.5, vec![2.0, 0.125, 1e-30]);
    let path = dir.path().join("spectrum.csv");
    write_spectrum_csv(&path, &s).unwrap();
    assert_eq!(read_spectrum_csv(&path).unwrap(), vec![2.0, 0.125, 1e-30]);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,l,E\n0,1,1\n"));

    let basis = Basis::build(6).unwrap();
    let w = random_su(6, 2);
    let r = energy_transfer(&basis, &w, 2).unwrap();
    let tp = dir.path().join("transfer.csv");
    write_transfer_csv(&tp, &r).unwrap();
    let lines = std::fs::read_to_string(&tp).unwrap().lines().count();
    assert_eq!(lines, 1 + 6 * 5);

    let inv = invariants(&basis, &w, 3).unwrap();
    let ip = dir.path().join("inv.csv");
    write_invariants_csv(&ip, &[(0.0, inv)]).unwrap();
    let body = std::fs::read_to_string(&ip).unwrap();
    assert!(body.contains("0,enstrophy,"));
    assert!(body.contains("0,C3_im,"));
}
