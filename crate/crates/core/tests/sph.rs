use proptest::prelude::*;
use zeitlin::sph::*;
use zeitlin::CoeffField;

fn unit(n: usize, l_max: usize, l: usize, m: i64) -> CoeffField<f64> {
    let mut c = CoeffField::zeros(n, l_max);
    c.set(l, m, 1.0);
    c
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

const NS: [usize; 4] = [16, 32, 64, 128];

#[test]
fn bracket_discrepancy_decreases_for_degree_one_pair() {
    let psi = unit(16, 1, 1, 0);
    let omega = unit(16, 1, 1, 1);
    let raw = bracket_consistency(&psi, &omega, &NS).unwrap();
    assert!(strictly_decreasing(&raw), "{raw:?}");
    let rel = bracket_consistency_relative(&psi, &omega, &NS).unwrap();
    assert!(strictly_decreasing(&rel), "{rel:?}");
    assert!(rel[3] < 1e-3, "{rel:?}");
}

#[test]
fn bracket_discrepancy_decreases_for_mixed_pair() {
    let mut psi = CoeffField::zeros(16, 3);
    psi.set(2, 1, 0.7);
    psi.set(3, -2, -0.4);
    let mut omega = CoeffField::zeros(16, 3);
    omega.set(3, 1, 1.0);
    omega.set(2, -2, 0.5);
    omega.set(1, 0, 0.3);
    let raw = bracket_consistency(&psi, &omega, &NS).unwrap();
    assert!(strictly_decreasing(&raw), "{raw:?}");
    let rel = bracket_consistency_relative(&psi, &omega, &NS).unwrap();
    assert!(strictly_decreasing(&rel), "{rel:?}");
    // second-order decay in N
    assert!(rel[3] < rel[0] / 50.0, "{rel:?}");
}

#[test]
fn bracket_of_field_with_itself_vanishes() {
    let mut psi = CoeffField::zeros(16, 2);
    psi.set(2, 1, 1.0);
    psi.set(1, -1, 0.5);
    let out = bracket_consistency(&psi, &psi, &[16, 32]).unwrap();
    assert!(out.iter().all(|&d| d < 1e-12), "{out:?}");
    let zero = CoeffField::<f64>::zeros(16, 1);
    let out = bracket_consistency(&zero, &zero, &[16]).unwrap();
    assert_eq!(out, vec![0.0]);
}

#[test]
fn y10_peaks_at_north_pole() {
    let g = sph_evaluate(&unit(8, 1, 1, 0), 4, 5).unwrap();
    let want = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let max = g.values.iter().cloned().fold(f64::MIN, f64::max);
    // nodes exclude the pole itself; the northernmost row holds the max
    let row0 = g.at(0, 0);
    assert_eq!(max, row0);
    assert!((row0 - want * g.theta[0].cos()).abs() < 1e-14);
    assert!(want * g.theta[0].cos() < want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evaluation_obeys_parseval(seed in any::<u64>(), l_max in 1usize..10) {
        let n = l_max + 1;
        let count = (l_max + 1) * (l_max + 1) - 1;
        let vals: Vec<f64> = (0..count)
            .map(|i| ((seed as f64 * 1e-9 + i as f64) * 2.17).sin())
            .collect();
        let c = CoeffField::from_values(n, l_max, vals).unwrap();
        // squared field has degree 2 l_max
        let g = sph_evaluate(&c, l_max + 2, 2 * (2 * l_max) + 1).unwrap();
        let q = g.integrate_product(&g);
        prop_assert!((q - c.sum_squares()).abs() < 1e-10 * c.sum_squares().max(1.0));
    }
}
