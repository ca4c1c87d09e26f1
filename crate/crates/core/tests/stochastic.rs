use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use zeitlin::stochastic::*;
use zeitlin::CoeffField;

fn normals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Series on an `n = 3` field (modes l = 1, 2) whose mode `(2, m)` follows
/// `mu t + sigma B_t`; the other modes are fixed.
fn brownian_series(mu: f64, sigma: f64, dt: f64, steps: usize, seed: u64) -> CoeffTimeSeries {
    let xi = normals(seed, steps);
    let mut times = vec![0.0];
    let mut fields = vec![CoeffField::zeros(3, 2)];
    let mut x = [0.0f64; 5];
    for (k, z) in xi.iter().enumerate() {
        let mut c = CoeffField::zeros(3, 2);
        for (j, m) in (-2i64..=2).enumerate() {
            x[j] += mu * dt + sigma * dt.sqrt() * z * if j % 2 == 0 { 1.0 } else { -1.0 };
            c.set(2, m, x[j]);
        }
        c.set(1, 0, 4.0);
        times.push((k + 1) as f64 * dt);
        fields.push(c);
    }
    CoeffTimeSeries::new(times, fields).unwrap()
}

#[test]
fn brownian_fit_recovers_parameters() {
    let (mu, sigma, dt, steps) = (0.3, 1.5, 0.01, 10_000);
    let model = estimate_noise_model(&brownian_series(mu, sigma, dt, steps, 3), 1, 0).unwrap();
    let t_total = steps as f64 * dt;
    let se_mu = sigma / t_total.sqrt();
    let se_sigma = sigma / (2.0 * steps as f64).sqrt();
    for m in -2..=2 {
        let (m_hat, s_hat) = model.get(2, m);
        assert!((m_hat - mu).abs() < 3.0 * se_mu, "mu {m_hat}");
        assert!((s_hat - sigma).abs() < 3.0 * se_sigma, "sigma {s_hat}");
    }
    assert_eq!(model.mode_count(), 5);
}

#[test]
fn adding_a_ramp_shifts_only_the_drift() {
    let base = brownian_series(0.0, 0.8, 0.1, 200, 8);
    let c = 0.45;
    let fields = base
        .fields()
        .iter()
        .zip(base.times())
        .map(|(f, &t)| {
            let mut g = f.clone();
            g.values_mut().iter_mut().for_each(|v| *v += c * t);
            g
        })
        .collect();
    let shifted = CoeffTimeSeries::new(base.times().to_vec(), fields).unwrap();
    let a = estimate_noise_model(&base, 1, 0).unwrap();
    let b = estimate_noise_model(&shifted, 1, 0).unwrap();
    for m in -2..=2 {
        let (ma, sa) = a.get(2, m);
        let (mb, sb) = b.get(2, m);
        assert!((mb - ma - c).abs() < 1e-9);
        assert!((sb - sa).abs() < 1e-9);
    }
}

#[test]
fn increment_variance_matches_h() {
    let model = NoiseModel::uniform(4, 2, 0.0, 1.0, 2024).unwrap();
    let h = 0.25;
    let n = 100_000u64;
    let xs: Vec<f64> = (0..n).map(|k| sample_increments::<f64>(&model, h, k).get(3, 1)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = h * (2.0 / n as f64).sqrt();
    assert!((var - h).abs() < 3.0 * se, "variance {var}");
}

#[test]
fn mode_streams_are_uncorrelated() {
    let model = NoiseModel::uniform(5, 2, 0.0, 1.0, 11).unwrap();
    let n = 10_000u64;
    let draws: Vec<_> = (0..n).map(|k| sample_increments::<f64>(&model, 1.0, k)).collect();
    let modes: Vec<(usize, i64)> = model.modes().collect();
    let bound = 4.0 / (n as f64).sqrt();
    for (a, &(la, ma)) in modes.iter().enumerate() {
        for &(lb, mb) in &modes[a + 1..] {
            let xa: Vec<f64> = draws.iter().map(|d| d.get(la, ma)).collect();
            let xb: Vec<f64> = draws.iter().map(|d| d.get(lb, mb)).collect();
            let corr = correlation(&xa, &xb);
            assert!(corr.abs() < bound, "({la},{ma}) vs ({lb},{mb}): {corr}");
        }
    }
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

const REPS: usize = 300;

fn pass_rate(test: impl Fn(&[f64]) -> bool) -> f64 {
    let passes = (0..REPS)
        .filter(|&r| test(&normals(1000 + r as u64, 10_000)))
        .count();
    passes as f64 / REPS as f64
}

fn within_binomial_band(rate: f64) -> bool {
    let sd = (0.95 * 0.05 / REPS as f64).sqrt();
    (rate - 0.95).abs() < 3.0 * sd
}

#[test]
fn ks_is_calibrated_on_normal_samples() {
    let rate = pass_rate(|x| ks_normality(x).unwrap().pass_at_5pct);
    assert!(within_binomial_band(rate), "KS pass rate {rate}");
}

#[test]
fn ad_is_calibrated_on_normal_samples() {
    let rate = pass_rate(|x| ad_normality(x).unwrap().pass_at_5pct);
    assert!(within_binomial_band(rate), "AD pass rate {rate}");
}

#[test]
fn non_normal_samples_fail() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let uniform: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    assert!(!ks_normality(&uniform).unwrap().pass_at_5pct);
    let exp = Exp::new(1.0).unwrap();
    let expo: Vec<f64> = (0..10_000).map(|_| exp.sample(&mut rng)).collect();
    assert!(!ad_normality(&expo).unwrap().pass_at_5pct);
    assert!(!ks_normality(&expo).unwrap().pass_at_5pct);
}

#[test]
fn equal_samples_are_rejected() {
    assert!(ks_normality(&[0.3; 50]).is_err());
    assert!(ad_normality(&[0.3; 50]).is_err());
}
