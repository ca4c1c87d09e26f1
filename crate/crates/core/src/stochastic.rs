//! Statistical model of the small-scale coefficients: drift/volatility fit
//! from a DNS window, reproducible Brownian increments, and normality
//! tests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::Increments;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{mode_count, mode_index, CoeffField};

/// Uniformly sampled coefficient fields; only modes `l > l̄` are used.
#[derive(Clone, Debug)]
pub struct CoeffTimeSeries {
    times: Vec<f64>,
    fields: Vec<CoeffField<f64>>,
}

impl CoeffTimeSeries {
    pub fn new(times: Vec<f64>, fields: Vec<CoeffField<f64>>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::SizeMismatch {
                expected: times.len(),
                got: fields.len(),
            });
        }
        if let Some(first) = fields.first() {
            if fields.iter().any(|f| f.n() != first.n() || f.l_max() != first.l_max()) {
                return Err(Error::DegenerateInput(
                    "coefficient fields differ in size".into(),
                ));
            }
        }
        if times.len() >= 2 {
            let span = times[times.len() - 1] - times[0];
            let dt = span / (times.len() - 1) as f64;
            if dt <= 0.0 {
                return Err(Error::NonUniformSpacing);
            }
            if times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt)
            {
                return Err(Error::NonUniformSpacing);
            }
        }
        Ok(Self { times, fields })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[CoeffField<f64>] {
        &self.fields
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    /// Samples of mode `(l, m)` over time.
    pub fn mode(&self, l: usize, m: i64) -> Vec<f64> {
        self.fields.iter().map(|f| f.get(l, m)).collect()
    }
}

/// Per-mode drift `mu` and volatility `sigma` for `l̄ < l ≤ N−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub n: usize,
    pub l_bar: usize,
    pub dt_fit: f64,
    pub seed: u64,
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl NoiseModel {
    pub fn zeros(n: usize, l_bar: usize, seed: u64) -> Result<Self> {
        if n < 2 || l_bar > n - 1 {
            return Err(Error::range("l_bar", l_bar, 0, n.saturating_sub(1)));
        }
        let len = mode_count(n - 1) - mode_count(l_bar);
        Ok(Self {
            n,
            l_bar,
            dt_fit: 0.0,
            seed,
            mu: vec![0.0; len],
            sigma: vec![0.0; len],
        })
    }

    /// Same `mu`, `sigma` for every mode.
    pub fn uniform(n: usize, l_bar: usize, mu: f64, sigma: f64, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(n, l_bar, seed)?;
        model.mu.iter_mut().for_each(|x| *x = mu);
        model.sigma.iter_mut().for_each(|x| *x = sigma);
        Ok(model)
    }

    #[inline]
    fn offset(&self, l: usize, m: i64) -> usize {
        mode_index(l, m) - mode_count(self.l_bar)
    }

    pub fn mode_count(&self) -> usize {
        self.mu.len()
    }

    /// `(mu, sigma)` of mode `(l, m)`.
    pub fn get(&self, l: usize, m: i64) -> (f64, f64) {
        let i = self.offset(l, m);
        (self.mu[i], self.sigma[i])
    }

    pub fn set(&mut self, l: usize, m: i64, mu: f64, sigma: f64) -> Result<()> {
        if l <= self.l_bar || l > self.n - 1 {
            return Err(Error::range("mode degree l", l, self.l_bar + 1, self.n - 1));
        }
        if m.unsigned_abs() as usize > l {
            return Err(Error::OutOfRange {
                what: "mode order m",
                value: m,
                lo: -(l as i64),
                hi: l as i64,
            });
        }
        if !(sigma >= 0.0) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "invalid parameters mu = {mu}, sigma = {sigma} at ({l}, {m})"
            )));
        }
        let i = self.offset(l, m);
        self.mu[i] = mu;
        self.sigma[i] = sigma;
        Ok(())
    }

    pub fn modes(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        (self.l_bar + 1..self.n).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# zeitlin noise model").unwrap();
        writeln!(s, "n = {}", self.n).unwrap();
        writeln!(s, "l_bar = {}", self.l_bar).unwrap();
        writeln!(s, "dt_fit = {:e}", self.dt_fit).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "l m mu sigma").unwrap();
        for (l, m) in self.modes() {
            let (mu, sigma) = self.get(l, m);
            writeln!(s, "{l} {m} {mu:e} {sigma:e}").unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> std::result::Result<String, String> {
            let line = lines.next().ok_or(format!("missing `{key}`"))?;
            let (k, v) = line
                .split_once('=')
                .ok_or(format!("expected `{key} = ...`, got `{line}`"))?;
            if k.trim() != key {
                return Err(format!("expected `{key}`, got `{}`", k.trim()));
            }
            Ok(v.trim().to_string())
        };
        let n: usize = header("n")?.parse().map_err(|e| format!("n: {e}"))?;
        let l_bar: usize = header("l_bar")?.parse().map_err(|e| format!("l_bar: {e}"))?;
        let dt_fit: f64 = header("dt_fit")?.parse().map_err(|e| format!("dt_fit: {e}"))?;
        let seed: u64 = header("seed")?.parse().map_err(|e| format!("seed: {e}"))?;
        let mut model = Self::zeros(n, l_bar, seed).map_err(|e| e.to_string())?;
        model.dt_fit = dt_fit;
        match lines.next() {
            Some(h) if h.split_whitespace().eq(["l", "m", "mu", "sigma"]) => {}
            other => return Err(format!("expected table header, got {other:?}")),
        }
        let mut seen = vec![false; model.mode_count()];
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(format!("bad row `{line}`"));
            }
            let l: usize = f[0].parse().map_err(|e| format!("row `{line}`: {e}"))?;
            let m: i64 = f[1].parse().map_err(|e| format!("row `{line}`: {e}"))?;
            let mu: f64 = f[2].parse().map_err(|e| format!("row `{line}`: {e}"))?;
            let sigma: f64 = f[3].parse().map_err(|e| format!("row `{line}`: {e}"))?;
            model.set(l, m, mu, sigma).map_err(|e| e.to_string())?;
            let i = model.offset(l, m);
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("duplicate mode ({l}, {m})"));
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let (l, m) = model.modes().nth(i).unwrap();
            return Err(format!("missing mode ({l}, {m})"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|reason| Error::format(path, reason))
    }
}

pub const MIN_FIT_SAMPLES: usize = 30;

/// Fits `mu = mean(Δω)/Δt`, `sigma = std(Δω)/√Δt` (unbiased) per mode from
/// consecutive increments of the series.
pub fn estimate_noise_model(series: &CoeffTimeSeries, l_bar: usize, seed: u64) -> Result<NoiseModel> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            need: MIN_FIT_SAMPLES,
            got: series.len(),
        });
    }
    let first = &series.fields()[0];
    let n = first.n();
    if first.l_max() != n - 1 {
        return Err(Error::DegenerateInput(format!(
            "series must carry all degrees up to {}, has {}",
            n - 1,
            first.l_max()
        )));
    }
    let dt = series.dt();
    let mut model = NoiseModel::zeros(n, l_bar, seed)?;
    model.dt_fit = dt;
    let count = (series.len() - 1) as f64;
    let modes: Vec<(usize, i64)> = model.modes().collect();
    for (l, m) in modes {
        let path = series.mode(l, m);
        let incs: Vec<f64> = path.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = incs.iter().sum::<f64>() / count;
        let var = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (count - 1.0);
        model.set(l, m, mean / dt, var.sqrt() / dt.sqrt())?;
    }
    Ok(model)
}

/// Standard normal draw keyed by `(seed, l, m, step)`: a fresh ChaCha8
/// stream whose key is the packed tuple, so the value does not depend on
/// the evaluation order.
pub fn keyed_normal(seed: u64, l: usize, m: i64, step: u64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(l as u64).to_le_bytes());
    key[16..24].copy_from_slice(&m.to_le_bytes());
    key[24..].copy_from_slice(&step.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    StandardNormal.sample(&mut rng)
}

/// `ΔB^{lm} = mu·h + sigma·√h·ξ` for every modelled mode.
pub fn sample_increments<T: Real>(model: &NoiseModel, h: f64, step: u64) -> Increments<T> {
    let mut out = Increments::zeros(model.n, model.l_bar);
    let sqrt_h = h.sqrt();
    for (i, (l, m)) in model.modes().enumerate() {
        let (mu, sigma) = (model.mu[i], model.sigma[i]);
        let mut v = mu * h;
        if sigma != 0.0 {
            v += sigma * sqrt_h * keyed_normal(model.seed, l, m, step);
        }
        out.values_mut()[i] = T::of(v);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pass_at_5pct: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdResult {
    pub a_squared: f64,
    pub pass_at_5pct: bool,
}

/// Sorted standardized samples (`(x − x̄)/s`, unbiased `s`).
fn standardized(samples: &[f64]) -> Result<Vec<f64>> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let s = var.sqrt();
    let scale = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // a constant series leaves only rounding in the variance
    if !(s > 1e-12 * scale) || !s.is_finite() {
        return Err(Error::DegenerateInput("samples have zero variance".into()));
    }
    let mut z: Vec<f64> = samples.iter().map(|x| (x - mean) / s).collect();
    z.sort_by(f64::total_cmp);
    Ok(z)
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Kolmogorov–Smirnov test against a normal with estimated mean and
/// variance (Lilliefors). Uses Stephens' modified statistic
/// `D(√n − 0.01 + 0.85/√n)` against `0.895`.
pub fn ks_normality(samples: &[f64]) -> Result<KsResult> {
    const MIN: usize = 20;
    if samples.len() < MIN {
        return Err(Error::TooFewSamples {
            need: MIN,
            got: samples.len(),
        });
    }
    let z = standardized(samples)?;
    let n = z.len() as f64;
    let normal = std_normal();
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok(KsResult {
        statistic: d,
        pass_at_5pct: d * (sn - 0.01 + 0.85 / sn) < 0.895,
    })
}

/// Anderson–Darling test with both parameters estimated:
/// `A²(1 + 4/n − 25/n²)` against `0.752`.
pub fn ad_normality(samples: &[f64]) -> Result<AdResult> {
    const MIN: usize = 8;
    if samples.len() < MIN {
        return Err(Error::TooFewSamples {
            need: MIN,
            got: samples.len(),
        });
    }
    let z = standardized(samples)?;
    let n = z.len();
    let nf = n as f64;
    let normal = std_normal();
    // ln(1 − Φ(z)) = ln Φ(−z), accurate in the upper tail
    let s: f64 = (0..n)
        .map(|i| {
            let w = (2 * i + 1) as f64;
            w * (normal.cdf(z[i]).ln() + normal.cdf(-z[n - 1 - i]).ln())
        })
        .sum();
    let a2 = -nf - s / nf;
    let a2 = a2 * (1.0 + 4.0 / nf - 25.0 / (nf * nf));
    Ok(AdResult {
        a_squared: a2,
        pass_at_5pct: a2 < 0.752,
    })
}
