//! Energy spectrum, invariants, nonlinear energy transfer, kink and
//! stationarity detection, and CSV output.
//!
//! Spectra are stored as vectors whose entry `k` holds degree `l = k + 1`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::ZMatrix;
use crate::scalar::Real;
use crate::spectral::{BasisCache, CoeffField};

/// `E(l) = ½ Σ_m ω_lm² / (l(l+1))` from a coefficient field.
pub fn spectrum_of_coeffs<T: Real>(c: &CoeffField<T>) -> Vec<T> {
    let half = T::of(0.5);
    (1..=c.l_max())
        .map(|l| {
            let s: T = (-(l as i64)..=l as i64).map(|m| c.get(l, m).powi(2)).sum();
            half * s / T::of_usize(l * (l + 1))
        })
        .collect()
}

pub fn energy_spectrum<T: Real>(basis: &BasisCache<T>, w: &ZMatrix<T>) -> Result<Vec<T>> {
    let c = basis.analyze(w, basis.n() - 1)?;
    Ok(spectrum_of_coeffs(&c))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Invariants {
    pub energy: f64,
    /// `−Tr(W²)`.
    pub enstrophy: f64,
    /// `Tr(Wⁿ)` as (re, im) for `n = 2..=n_max`.
    pub casimirs: Vec<(f64, f64)>,
    /// The three `l = 1` coefficients, ordered `m = −1, 0, 1`.
    pub angular_momentum: [f64; 3],
}

pub fn invariants<T: Real>(basis: &BasisCache<T>, w: &ZMatrix<T>, n_max: usize) -> Result<Invariants> {
    let n = basis.n();
    if n_max < 2 || n_max > n {
        return Err(Error::range("n_max", n_max, 2, n));
    }
    let c = basis.analyze(w, n - 1)?;
    let energy = spectrum_of_coeffs(&c)
        .into_iter()
        .map(|e| e.to_f64_lossy())
        .sum();
    let casimirs: Vec<(f64, f64)> = w
        .power_traces(n_max)
        .into_iter()
        .map(|(re, im)| (re.to_f64_lossy(), im.to_f64_lossy()))
        .collect();
    Ok(Invariants {
        energy,
        enstrophy: -casimirs[0].0,
        casimirs,
        angular_momentum: [
            c.get(1, -1).to_f64_lossy(),
            c.get(1, 0).to_f64_lossy(),
            c.get(1, 1).to_f64_lossy(),
        ],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// `[P̄, W̄]`
    LargeLarge,
    /// `[P̄, W̃]`
    LargeSmall,
    /// `[P̃, W̄]`
    SmallLarge,
    /// `[P̃, W̃]`
    SmallSmall,
}

impl Coupling {
    pub const ALL: [Coupling; 4] = [
        Coupling::LargeLarge,
        Coupling::LargeSmall,
        Coupling::SmallLarge,
        Coupling::SmallSmall,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Coupling::LargeLarge => "Pbar_Wbar",
            Coupling::LargeSmall => "Pbar_Wtilde",
            Coupling::SmallLarge => "Ptilde_Wbar",
            Coupling::SmallSmall => "Ptilde_Wtilde",
        }
    }
}

/// Per-degree `dE(l)/dt` split over the four large/small couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferReport {
    pub l_bar: usize,
    /// Indexed like [`Coupling::ALL`], each entry per degree.
    pub couplings: [Vec<f64>; 4],
    /// Undecomposed `dE(l)/dt` from `[P, W]`.
    pub total: Vec<f64>,
    /// `F(l) = |dE(l)/dt|`.
    pub flux: Vec<f64>,
}

impl TransferReport {
    pub fn coupling(&self, c: Coupling) -> &[f64] {
        let i = Coupling::ALL.iter().position(|&x| x == c).unwrap();
        &self.couplings[i]
    }

    /// `Σ |dE(l)/dt|` of one coupling over `l ∈ [lo, hi]`.
    pub fn summed_magnitude(&self, c: Coupling, lo: usize, hi: usize) -> f64 {
        self.coupling(c)[lo - 1..hi].iter().map(|x| x.abs()).sum()
    }
}

fn transfer_by_degree<T: Real>(omega: &CoeffField<T>, rate: &CoeffField<T>) -> Vec<f64> {
    (1..=omega.l_max())
        .map(|l| {
            let s: T = (-(l as i64)..=l as i64)
                .map(|m| omega.get(l, m) * rate.get(l, m))
                .sum();
            (s / T::of_usize(l * (l + 1))).to_f64_lossy()
        })
        .collect()
}

pub fn energy_transfer<T: Real>(basis: &BasisCache<T>, w: &ZMatrix<T>, l_bar: usize) -> Result<TransferReport> {
    let l_max = basis.n() - 1;
    let w_large = basis.project_large(w, l_bar)?;
    // rounding-level remainders can carry a relatively large trace
    let w_small = w.sub(&w_large).su_part();
    let p_large = basis.solve_poisson(&w_large)?;
    let p_small = basis.solve_poisson(&w_small)?;
    let omega = basis.analyze(w, l_max)?;
    let pairs = [
        (&p_large, &w_large),
        (&p_large, &w_small),
        (&p_small, &w_large),
        (&p_small, &w_small),
    ];
    let mut couplings: [Vec<f64>; 4] = Default::default();
    for (slot, (p, q)) in couplings.iter_mut().zip(pairs) {
        let rate = basis.analyze(&p.skew_commutator(q), l_max)?;
        *slot = transfer_by_degree(&omega, &rate);
    }
    let p = basis.solve_poisson(w)?;
    let rate = basis.analyze(&p.skew_commutator(w), l_max)?;
    let total = transfer_by_degree(&omega, &rate);
    let flux = total.iter().map(|x| x.abs()).collect();
    Ok(TransferReport {
        l_bar,
        couplings,
        total,
        flux,
    })
}

/// Element-wise time average of several reports (same `l̄`); `flux` is the
/// mean of the instantaneous `|dE(l)/dt|`.
pub fn average_transfer(reports: &[TransferReport]) -> Result<TransferReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::TooFewSamples { need: 1, got: 0 })?;
    let k = reports.len() as f64;
    let mean = |get: &dyn Fn(&TransferReport) -> &Vec<f64>| -> Vec<f64> {
        let mut acc = vec![0.0; get(first).len()];
        for r in reports {
            for (a, x) in acc.iter_mut().zip(get(r)) {
                *a += x / k;
            }
        }
        acc
    };
    Ok(TransferReport {
        l_bar: first.l_bar,
        couplings: [
            mean(&|r| &r.couplings[0]),
            mean(&|r| &r.couplings[1]),
            mean(&|r| &r.couplings[2]),
            mean(&|r| &r.couplings[3]),
        ],
        total: mean(&|r| &r.total),
        flux: mean(&|r| &r.flux),
    })
}

/// Two-segment log-log fit result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Kink {
    /// Degree where the two fitted lines meet, clamped to `[b, b + 1]`.
    pub l_bar: usize,
    /// Optimal split: large-scale segment `[l_lo, b]`.
    pub breakpoint: usize,
    pub slope_large: f64,
    pub slope_small: f64,
    pub residual: f64,
    /// Residual of a single line over the whole range.
    pub single_residual: f64,
    /// `false` when two lines do not fit markedly better than one.
    pub found: bool,
}

/// Minimum relative residual reduction for a kink to be reported.
pub const KINK_MIN_IMPROVEMENT: f64 = 0.5;

/// Least-squares line `y = a + b x`; returns `(a, b, residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let res = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (icpt, slope, res)
}

/// Best two-segment fit of `(ln l, ln E(l))` over `l ∈ [l_lo, l_hi]`.
///
/// `spectrum[k]` holds `E(k + 1)`. Each segment needs at least three
/// points; equal residuals resolve to the smaller breakpoint.
pub fn detect_kink(spectrum: &[f64], search: (usize, usize)) -> Result<Kink> {
    let (lo, hi) = search;
    let n_minus_1 = spectrum.len();
    if lo < 2 || hi > n_minus_1.saturating_sub(1) || lo > hi {
        return Err(Error::range("kink search range", lo.max(hi), 2, n_minus_1.saturating_sub(1)));
    }
    if hi + 1 < lo + 6 {
        return Err(Error::TooFewSamples {
            need: 6,
            got: hi + 1 - lo,
        });
    }
    let mut x = Vec::with_capacity(hi - lo + 1);
    let mut y = Vec::with_capacity(hi - lo + 1);
    for l in lo..=hi {
        let e = spectrum[l - 1];
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::DegenerateInput(format!("E({l}) = {e} is not positive")));
        }
        x.push((l as f64).ln());
        y.push(e.ln());
    }
    let (_, _, single) = fit_line(&x, &y);
    let mut best: Option<(usize, f64, (f64, f64), (f64, f64))> = None;
    // split index s: first segment x[..s], second x[s..]
    for s in 3..=x.len() - 3 {
        let (a1, b1, r1) = fit_line(&x[..s], &y[..s]);
        let (a2, b2, r2) = fit_line(&x[s..], &y[s..]);
        let r = r1 + r2;
        if best.is_none_or(|(_, rb, _, _)| r < rb) {
            best = Some((s, r, (a1, b1), (a2, b2)));
        }
    }
    let (s, residual, (a1, b1), (a2, b2)) = best.expect("at least one split");
    let b = lo + s - 1;
    let l_bar = if (b1 - b2).abs() > 1e-12 {
        let xi = (a2 - a1) / (b1 - b2);
        (xi.exp().round() as usize).clamp(b, b + 1)
    } else {
        b
    };
    let found = single > 1e-20 * y.len() as f64
        && residual <= (1.0 - KINK_MIN_IMPROVEMENT) * single;
    Ok(Kink {
        l_bar,
        breakpoint: b,
        slope_large: b1,
        slope_small: b2,
        residual,
        single_residual: single,
        found,
    })
}

/// Default kink search range `[4, N/2]`.
pub fn default_kink_range(n: usize) -> (usize, usize) {
    (4, n / 2)
}

/// Slope of `ln E` against `ln l` over `l ∈ [lo, hi]`.
pub fn spectral_slope(spectrum: &[f64], lo: usize, hi: usize) -> Result<f64> {
    if lo < 1 || hi > spectrum.len() || hi < lo + 1 {
        return Err(Error::range("slope range", hi, lo + 1, spectrum.len()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for l in lo..=hi {
        let e = spectrum[l - 1];
        if !(e > 0.0) {
            return Err(Error::DegenerateInput(format!("E({l}) = {e} is not positive")));
        }
        x.push((l as f64).ln());
        y.push(e.ln());
    }
    Ok(fit_line(&x, &y).1)
}

/// Time-indexed energy spectra of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectrumSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub spectra: Vec<Vec<f64>>,
}

impl SpectrumSeries {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, time: f64, spectrum: Vec<f64>) {
        self.times.push(time);
        self.spectra.push(spectrum);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.spectra.last().map(Vec::as_slice)
    }

    /// Time average of the spectra with `t ∈ [t0, t1]`.
    pub fn mean_over(&self, t0: f64, t1: f64) -> Option<Vec<f64>> {
        let picked: Vec<&Vec<f64>> = self
            .times
            .iter()
            .zip(&self.spectra)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, s)| s)
            .collect();
        let first = picked.first()?;
        let k = picked.len() as f64;
        let mut out = vec![0.0; first.len()];
        for s in &picked {
            for (o, v) in out.iter_mut().zip(s.iter()) {
                *o += v / k;
            }
        }
        Some(out)
    }
}

/// Window average of `ln E(l)` over the samples with `t ∈ [t0, t1)`.
fn mean_log_spectrum(series: &SpectrumSeries, t0: f64, t1: f64) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for (t, s) in series.times.iter().zip(&series.spectra) {
        if *t < t0 || *t >= t1 {
            continue;
        }
        let a = acc.get_or_insert_with(|| vec![0.0; s.len()]);
        for (x, e) in a.iter_mut().zip(s) {
            if !(*e > 0.0) {
                return Err(Error::DegenerateInput(format!("non-positive energy {e} at t = {t}")));
            }
            *x += e.ln();
        }
        count += 1;
    }
    let mut a = acc.ok_or(Error::TooFewSamples { need: 1, got: 0 })?;
    a.iter_mut().for_each(|x| *x /= count as f64);
    Ok(a)
}

/// Relative L² distance `‖a − b‖ / ‖b‖` between the window-averaged
/// log-spectra `a`, `b` of the last two consecutive windows of length
/// `window` ending at time `t_end`.
pub fn stationarity_distance(series: &SpectrumSeries, window: f64, t_end: f64) -> Result<f64> {
    let t0 = *series.times.first().ok_or(Error::TooFewSamples { need: 2, got: 0 })?;
    if !(window > 0.0) || t_end - 2.0 * window < t0 - 1e-9 * window {
        return Err(Error::TooFewSamples {
            need: 2,
            got: ((t_end - t0) / window.max(f64::MIN_POSITIVE)) as usize,
        });
    }
    let eps = 1e-9 * window;
    let a = mean_log_spectrum(series, t_end - 2.0 * window - eps, t_end - window - eps)?;
    let b = mean_log_spectrum(series, t_end - window - eps, t_end + eps)?;
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / norm)
}

/// Whether the spectrum has settled: see [`stationarity_distance`], evaluated
/// at the end of the series.
pub fn stationarity(series: &SpectrumSeries, window: f64, tol: f64) -> Result<bool> {
    let t_end = *series.times.last().ok_or(Error::TooFewSamples { need: 2, got: 0 })?;
    Ok(stationarity_distance(series, window, t_end)? <= tol)
}

/// First sample time at which [`stationarity`] would hold.
pub fn time_to_stationarity(series: &SpectrumSeries, window: f64, tol: f64) -> Option<f64> {
    let t0 = *series.times.first()?;
    series
        .times
        .iter()
        .copied()
        .filter(|&t| t - t0 >= 2.0 * window - 1e-9 * window)
        .find(|&t| stationarity_distance(series, window, t).is_ok_and(|d| d <= tol))
}

pub const DEFAULT_STATIONARITY_TOL: f64 = 0.05;

/// RMS of `ln E1(l) − ln E2(l)` over `1 ≤ l ≤ l_max`.
pub fn spectrum_distance(e1: &[f64], e2: &[f64], l_max: usize) -> Result<f64> {
    if l_max < 1 || l_max > e1.len() || l_max > e2.len() {
        return Err(Error::range("l_max", l_max, 1, e1.len().min(e2.len())));
    }
    let mut ss = 0.0;
    for l in 1..=l_max {
        let (a, b) = (e1[l - 1], e2[l - 1]);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::DegenerateInput(format!(
                "non-positive spectrum entry at l = {l}"
            )));
        }
        ss += (a.ln() - b.ln()).powi(2);
    }
    Ok((ss / l_max as f64).sqrt())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Columns `t,l,E`.
pub fn write_spectrum_csv(path: &Path, series: &SpectrumSeries) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e| csv_error(path, e);
    w.write_record(["t", "l", "E"]).map_err(io)?;
    for (t, s) in series.times.iter().zip(&series.spectra) {
        for (k, e) in s.iter().enumerate() {
            w.write_record([t.to_string(), (k + 1).to_string(), e.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns `l,coupling,value`; couplings are the four pairs plus `total`
/// and `F`.
pub fn write_transfer_csv(path: &Path, report: &TransferReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e| csv_error(path, e);
    w.write_record(["l", "coupling", "value"]).map_err(io)?;
    let mut columns: Vec<(&str, &[f64])> = Coupling::ALL
        .iter()
        .map(|&c| (c.label(), report.coupling(c)))
        .collect();
    columns.push(("total", &report.total));
    columns.push(("F", &report.flux));
    for (name, vals) in columns {
        for (k, v) in vals.iter().enumerate() {
            w.write_record([(k + 1).to_string(), name.to_string(), v.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Columns `t,name,value` with `energy`, `enstrophy`, `C<n>_re`, `C<n>_im`,
/// and `L_m` for the angular-momentum triple.
pub fn write_invariants_csv(path: &Path, rows: &[(f64, Invariants)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let io = |e| csv_error(path, e);
    w.write_record(["t", "name", "value"]).map_err(io)?;
    for (t, inv) in rows {
        let t = t.to_string();
        let mut put = |name: String, v: f64| w.write_record([t.clone(), name, v.to_string()]);
        put("energy".into(), inv.energy).map_err(io)?;
        put("enstrophy".into(), inv.enstrophy).map_err(io)?;
        for (k, (re, im)) in inv.casimirs.iter().enumerate() {
            put(format!("C{}_re", k + 2), *re).map_err(io)?;
            put(format!("C{}_im", k + 2), *im).map_err(io)?;
        }
        for (m, v) in [-1, 0, 1].iter().zip(inv.angular_momentum) {
            put(format!("L_{m}"), v).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `l,E` (or `t,l,E`, last time only) spectrum CSV.
pub fn read_spectrum_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (li, ei) = match (col("l"), col("E")) {
        (Some(l), Some(e)) => (l, e),
        _ => return Err(Error::format(path, "expected columns `l` and `E`")),
    };
    let ti = col("t");
    let mut rows: Vec<(f64, usize, f64)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad value in row {:?}", rec)))
        };
        let t = match ti {
            Some(i) => parse(i)?,
            None => 0.0,
        };
        let l = parse(li)?;
        if l < 1.0 || l.fract() != 0.0 {
            return Err(Error::format(path, format!("invalid degree {l}")));
        }
        rows.push((t, l as usize, parse(ei)?));
    }
    let t_last = rows
        .iter()
        .map(|r| r.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<Option<f64>> = Vec::new();
    for (t, l, e) in rows.into_iter().filter(|r| r.0 == t_last) {
        if out.len() < l {
            out.resize(l, None);
        }
        out[l - 1] = Some(e);
        let _ = t;
    }
    out.into_iter()
        .enumerate()
        .map(|(k, e)| e.ok_or_else(|| Error::format(path, format!("missing degree {}", k + 1))))
        .collect()
}
