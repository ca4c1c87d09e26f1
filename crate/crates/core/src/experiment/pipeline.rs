//! The end-to-end experiment: DNS burn-in to a stationary spectrum, kink
//! detection, noise fit, the four closure runs from a common large-scale
//! state, and their comparison.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    average_transfer, detect_kink, energy_transfer, invariants, spectral_slope, spectrum_distance,
    spectrum_of_coeffs, stationarity_distance, write_invariants_csv, write_spectrum_csv, write_transfer_csv,
    Coupling, Invariants, Kink, SpectrumSeries, TransferReport,
};
use crate::dynamics::{Closure, ClosureKind};
use crate::error::{Error, Result};
use crate::integrators::{integrate_observed, Event, Frame, StepperConfig};
use crate::matrix::VorticityMatrix;
use crate::spectral::{BasisCache, CoeffField};
use crate::stochastic::{estimate_noise_model, CoeffTimeSeries, NoiseModel};

use super::config::{LBar, RunConfig};
use super::single::{initial_state, normality_fractions, record_run, snapshot_of, Recorded, INVARIANT_ORDER};
use super::snapshot::Snapshot;

/// Trailing fraction of the burn-in used for the stationary statistics.
pub const FIT_FRACTION: f64 = 0.25;
const TRANSFER_SAMPLES: usize = 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DnsSummary {
    pub stop_time: f64,
    pub steps: u64,
    pub stationary: bool,
    pub stationarity_distance: Option<f64>,
    pub fit_window: (f64, f64),
    pub fit_samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct KinkSummary {
    /// Cutoff used by the reduced runs.
    pub l_bar: usize,
    pub detected: Option<Kink>,
    /// Slope of `ln E` against `ln l` over `(l̄, N/2]`.
    pub tail_slope: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NoiseSummary {
    pub dt_fit: f64,
    pub modes: usize,
    /// Share of small-scale modes whose sampled coefficients pass each
    /// normality test at 5%.
    pub ks_pass_fraction: Option<f64>,
    pub ad_pass_fraction: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TransferSummary {
    pub samples: usize,
    /// Mean over samples of `Σ |dE(l)/dt|` for `l ≤ l̄`, per coupling.
    pub large_scale: BTreeMap<String, f64>,
    /// Same for `l > l̄`.
    pub small_scale: BTreeMap<String, f64>,
    pub dominant_large: String,
    pub dominant_small: String,
    /// Largest `|Σ couplings − total|`, relative to the largest `|total|`.
    pub closure_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunSummary {
    pub closure: String,
    pub status: String,
    pub final_time: f64,
    /// `spectrum_distance` to the DNS continuation over `l ≤ l̄`.
    pub distance: Option<f64>,
    /// `Σ_{l̄−3 ≤ l ≤ l̄} E(l)` relative to the DNS continuation.
    pub pileup_ratio: Option<f64>,
    pub energy_change: Option<f64>,
    pub enstrophy_change: Option<f64>,
}

/// Machine-readable record of a pipeline run, written as `summary.toml`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub t_end: f64,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub dns: DnsSummary,
    pub kink: KinkSummary,
    pub noise: NoiseSummary,
    pub transfer: TransferSummary,
    pub runs: Vec<RunSummary>,
    pub files: Vec<String>,
}

impl Summary {
    pub fn run(&self, kind: ClosureKind) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.closure == kind.name())
    }
}

#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub out_dir: PathBuf,
    pub summary: Summary,
    /// Stationary DNS spectrum, averaged over the fit window.
    pub stationary_spectrum: Vec<f64>,
    /// Final spectra of the closure runs, in [`ClosureKind::ALL`] order.
    pub final_spectra: Vec<(ClosureKind, Vec<f64>)>,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineReport> {
    run_pipeline_with(cfg, &mut |_| {})
}

/// [`run_pipeline`] reporting progress lines to `log`.
///
/// On failure the summary and manifest are still written, naming the failed
/// stage, and the error is returned wrapped in [`Error::Stage`].
pub fn run_pipeline_with(cfg: &RunConfig, log: &mut dyn FnMut(&str)) -> Result<PipelineReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut p = Pipeline {
        cfg,
        dir: cfg.out_dir.clone(),
        files: Vec::new(),
        summary: Summary {
            n: cfg.n,
            seed: cfg.seed,
            h: cfg.h,
            t_end: cfg.t_end,
            ..Default::default()
        },
        stationary_spectrum: Vec::new(),
        final_spectra: Vec::new(),
        log,
    };
    let outcome = p.run();
    if let Err(Error::Stage { stage, source }) = &outcome {
        p.summary.failed_stage = Some(stage.clone());
        p.summary.error = Some(source.to_string());
    }
    p.finish()?;
    outcome?;
    Ok(PipelineReport {
        out_dir: p.dir,
        summary: p.summary,
        stationary_spectrum: p.stationary_spectrum,
        final_spectra: p.final_spectra,
    })
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    files: Vec<String>,
    summary: Summary,
    stationary_spectrum: Vec<f64>,
    final_spectra: Vec<(ClosureKind, Vec<f64>)>,
    log: &'a mut dyn FnMut(&str),
}

struct Burnin {
    last: Snapshot,
    fit_times: Vec<f64>,
    fit_fields: Vec<CoeffField<f64>>,
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::stage(stage, e))
}

impl Pipeline<'_> {
    fn output(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn run(&mut self) -> Result<()> {
        let cfg = self.cfg;
        let n = cfg.n;
        let basis = staged("basis", BasisCache::<f64>::build(n))?;
        let path = self.output("config.toml");
        staged("config", fs::write(&path, cfg.to_toml_string()).map_err(|e| Error::io(&path, e)))?;

        let w0 = staged("ic", initial_state(cfg, &basis))?;
        let burn = staged("dns", self.burn_in(&basis, &w0))?;
        let path = self.output("stationary.ezsn");
        staged("dns", burn.last.write(&path))?;

        let l_bar = staged("kink", self.kink())?;
        let model = staged("noise", self.fit_noise(&burn, l_bar))?;
        staged("transfer", self.transfer(&basis, &burn, l_bar))?;

        let mut first_err = None;
        let mut spectra = Vec::new();
        for kind in ClosureKind::ALL {
            let stage = format!("run-{kind}");
            match self.closure_run(&basis, &burn.last.state, kind, l_bar, &model) {
                Ok(s) => spectra.push((kind, s)),
                Err(e) => {
                    (self.log)(&format!("{stage} failed: {e}"));
                    first_err.get_or_insert(Error::stage(stage, e));
                }
            }
        }
        self.compare(&spectra, l_bar);
        self.final_spectra = spectra;
        first_err.map_or(Ok(()), Err)
    }

    /// DNS until two consecutive windows of the log-spectrum agree to
    /// `dns.tol`, checked once per window, or until `dns.max_time`.
    fn burn_in(&mut self, basis: &BasisCache<f64>, w0: &VorticityMatrix<f64>) -> Result<Burnin> {
        let cfg = self.cfg;
        let n = cfg.n;
        let d = &cfg.dns;
        let stepper = StepperConfig::new(cfg.h, d.max_time, cfg.reproject_every, cfg.snapshot_every)?;
        let eps = 1e-9 * cfg.h;
        let mut series = SpectrumSeries::new("dns-burn-in");
        let mut inv: Vec<(f64, Invariants)> = Vec::new();
        let mut checks: Vec<(f64, f64)> = Vec::new();
        let mut window: Vec<(f64, CoeffField<f64>)> = Vec::new();
        let mut last: Option<Snapshot> = None;
        let mut last_good: Option<Snapshot> = None;
        let mut stationary = false;
        let mut next_check = 2.0 * d.window;
        let snap = |f: &Frame<f64>| snapshot_of(ClosureKind::FullDns, cfg.seed, f);
        let run = integrate_observed(w0, Closure::dns(n), None, &stepper, basis, |ev| {
            let f = match ev {
                Event::LastGood(f) => {
                    last_good = Some(snap(f));
                    return Ok(ControlFlow::Continue(()));
                }
                Event::Snapshot(f) => f,
            };
            let c = basis.analyze(&f.state, n - 1)?;
            series.push(f.time, spectrum_of_coeffs(&c));
            inv.push((f.time, invariants(basis, &f.state, INVARIANT_ORDER.min(n))?));
            if f.step % cfg.snapshot_every as u64 == 0 {
                window.push((f.time, c));
            }
            let keep_from = (1.0 - FIT_FRACTION) * f.time - eps;
            let drop = window.iter().take_while(|(t, _)| *t < keep_from).count();
            window.drain(..drop);
            last = Some(snap(f));
            if f.time >= next_check - eps {
                next_check += d.window;
                let dist = stationarity_distance(&series, d.window, f.time)?;
                checks.push((f.time, dist));
                if dist <= d.tol {
                    stationary = true;
                    return Ok(ControlFlow::Break(()));
                }
            }
            Ok(ControlFlow::Continue(()))
        });

        let path = self.output("dns_spectrum.csv");
        write_spectrum_csv(&path, &series)?;
        let path = self.output("dns_invariants.csv");
        write_invariants_csv(&path, &inv)?;
        let path = self.output("dns_stationarity.csv");
        let mut text = String::from("t,distance\n");
        for (t, dist) in &checks {
            text.push_str(&format!("{t},{dist}\n"));
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        if let Err(e) = run {
            if let Some(s) = last_good {
                let path = self.output("dns_last_good.ezsn");
                s.write(&path)?;
            }
            return Err(e);
        }

        let last = last.expect("initial snapshot is always reported");
        let (fit_times, fit_fields): (Vec<f64>, Vec<CoeffField<f64>>) = window.into_iter().unzip();
        let t0 = fit_times.first().copied().unwrap_or(last.time);
        self.summary.dns = DnsSummary {
            stop_time: last.time,
            steps: last.step,
            stationary,
            stationarity_distance: checks.last().map(|c| c.1),
            fit_window: (t0, last.time),
            fit_samples: fit_times.len(),
        };
        self.stationary_spectrum = series
            .mean_over(t0, last.time)
            .expect("fit window holds the last snapshot");
        let mut mean = SpectrumSeries::new("dns-stationary");
        mean.push(last.time, self.stationary_spectrum.clone());
        let path = self.output("stationary_spectrum.csv");
        write_spectrum_csv(&path, &mean)?;
        (self.log)(&format!(
            "dns: stopped at t = {} (stationary: {stationary}, distance {:?})",
            last.time,
            checks.last().map(|c| c.1)
        ));
        Ok(Burnin {
            last,
            fit_times,
            fit_fields,
        })
    }

    fn kink(&mut self) -> Result<usize> {
        let n = self.cfg.n;
        let e = &self.stationary_spectrum;
        let detected = detect_kink(e, self.cfg.kink_range());
        let l_bar = match (self.cfg.l_bar, &detected) {
            (LBar::Fixed(l), _) => l,
            (LBar::Auto, Ok(k)) => k.l_bar,
            (LBar::Auto, Err(_)) => return Err(detected.unwrap_err()),
        };
        let tail_slope = if l_bar + 2 <= n / 2 {
            spectral_slope(e, l_bar + 1, n / 2).ok()
        } else {
            None
        };
        self.summary.kink = KinkSummary {
            l_bar,
            detected: detected.ok(),
            tail_slope,
        };
        (self.log)(&format!("kink: l_bar = {l_bar}, tail slope {tail_slope:?}"));
        Ok(l_bar)
    }

    fn fit_noise(&mut self, burn: &Burnin, l_bar: usize) -> Result<NoiseModel> {
        let series = CoeffTimeSeries::new(burn.fit_times.clone(), burn.fit_fields.clone())?;
        let model = estimate_noise_model(&series, l_bar, self.cfg.seed)?;
        let path = self.output("noise_model.txt");
        model.save(&path)?;

        let (ks, ad) = normality_fractions(&series, l_bar);
        self.summary.noise = NoiseSummary {
            dt_fit: model.dt_fit,
            modes: model.mode_count(),
            ks_pass_fraction: ks,
            ad_pass_fraction: ad,
        };
        (self.log)(&format!(
            "noise: {} modes, dt_fit = {}, normality pass KS {:?} AD {:?}",
            model.mode_count(),
            model.dt_fit,
            ks,
            ad
        ));
        Ok(model)
    }

    fn transfer(&mut self, basis: &BasisCache<f64>, burn: &Burnin, l_bar: usize) -> Result<()> {
        let n = self.cfg.n;
        let instant = energy_transfer(basis, &burn.last.state, l_bar)?;
        let path = self.output("transfer_instant.csv");
        write_transfer_csv(&path, &instant)?;

        let k = burn.fit_fields.len();
        let stride = k.div_ceil(TRANSFER_SAMPLES).max(1);
        let mut reports: Vec<TransferReport> = Vec::new();
        for c in burn.fit_fields.iter().rev().step_by(stride) {
            reports.push(energy_transfer(basis, &basis.synthesize(c)?, l_bar)?);
        }
        if reports.is_empty() {
            reports.push(instant);
        }
        let mean = average_transfer(&reports)?;
        let path = self.output("transfer_mean.csv");
        write_transfer_csv(&path, &mean)?;

        let mut large = BTreeMap::new();
        let mut small = BTreeMap::new();
        for c in Coupling::ALL {
            let avg = |lo: usize, hi: usize| {
                if lo > hi {
                    return 0.0;
                }
                reports.iter().map(|r| r.summed_magnitude(c, lo, hi)).sum::<f64>() / reports.len() as f64
            };
            large.insert(c.label().to_string(), avg(1, l_bar));
            small.insert(c.label().to_string(), avg(l_bar + 1, n - 1));
        }
        let argmax = |m: &BTreeMap<String, f64>| {
            m.iter()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k.clone())
                .unwrap_or_default()
        };
        let mut residual: f64 = 0.0;
        for r in &reports {
            let scale = r.total.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for l in 0..r.total.len() {
                let sum: f64 = r.couplings.iter().map(|c| c[l]).sum();
                if scale > 0.0 {
                    residual = residual.max((sum - r.total[l]).abs() / scale);
                }
            }
        }
        self.summary.transfer = TransferSummary {
            samples: reports.len(),
            dominant_large: argmax(&large),
            dominant_small: argmax(&small),
            large_scale: large,
            small_scale: small,
            closure_residual: residual,
        };
        Ok(())
    }

    fn closure_run(
        &mut self,
        basis: &BasisCache<f64>,
        w: &VorticityMatrix<f64>,
        kind: ClosureKind,
        l_bar: usize,
        model: &NoiseModel,
    ) -> Result<Vec<f64>> {
        let cfg = self.cfg;
        let n = cfg.n;
        let closure = match kind {
            ClosureKind::FullDns => Closure::dns(n),
            k => Closure::new(k, l_bar, n)?,
        };
        let Recorded {
            series,
            invariants: inv,
            outcome: run,
            last_good,
        } = record_run(basis, w, closure, Some(model), &cfg.stepper()?);
        let name = kind.name();
        let path = self.output(&format!("run_{name}_spectrum.csv"));
        write_spectrum_csv(&path, &series)?;
        let path = self.output(&format!("run_{name}_invariants.csv"));
        write_invariants_csv(&path, &inv)?;
        let change = |get: fn(&Invariants) -> f64| {
            let (a, b) = (get(&inv.first()?.1), get(&inv.last()?.1));
            Some((b - a) / a.abs().max(f64::MIN_POSITIVE))
        };
        let mut summary = RunSummary {
            closure: name.to_string(),
            status: "ok".into(),
            final_time: series.times.last().copied().unwrap_or(0.0),
            energy_change: change(|i| i.energy),
            enstrophy_change: change(|i| i.enstrophy),
            ..Default::default()
        };
        match run {
            Ok(frame) => {
                let path = self.output(&format!("run_{name}_final.ezsn"));
                snapshot_of(kind, cfg.seed, &frame).write(&path)?;
                self.summary.runs.push(summary);
                (self.log)(&format!("run {name}: done"));
                Ok(series.last().expect("final snapshot recorded").to_vec())
            }
            Err(e) => {
                if let Some(f) = &last_good {
                    let path = self.output(&format!("run_{name}_last_good.ezsn"));
                    snapshot_of(kind, cfg.seed, f).write(&path)?;
                }
                summary.status = e.to_string();
                self.summary.runs.push(summary);
                Err(e)
            }
        }
    }

    fn compare(&mut self, spectra: &[(ClosureKind, Vec<f64>)], l_bar: usize) {
        let Some((_, dns)) = spectra.iter().find(|(k, _)| *k == ClosureKind::FullDns) else {
            return;
        };
        let lo = l_bar.saturating_sub(3).max(1);
        let pile = |e: &[f64]| e[lo - 1..l_bar].iter().sum::<f64>();
        let mut text = String::from("closure,distance,pileup_ratio\n");
        for (kind, e) in spectra {
            let distance = spectrum_distance(dns, e, l_bar).ok();
            let ratio = pile(e) / pile(dns);
            if let Some(r) = self.summary.runs.iter_mut().find(|r| r.closure == kind.name()) {
                r.distance = distance;
                r.pileup_ratio = Some(ratio);
            }
            let d = distance.map_or(String::from("nan"), |d| d.to_string());
            text.push_str(&format!("{kind},{d},{ratio}\n"));
        }
        let path = self.output("distances.csv");
        if let Err(e) = fs::write(&path, text) {
            (self.log)(&format!("cannot write {}: {e}", path.display()));
        }
    }

    /// Writes `summary.toml` and `manifest.txt` (`sha256  file` per output).
    fn finish(&mut self) -> Result<()> {
        self.summary.files = self.files.clone();
        let path = self.output("summary.toml");
        let text = toml::to_string(&self.summary).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let manifest = self.dir.join("manifest.txt");
        let mut out = Vec::new();
        for name in &self.files {
            let bytes = fs::read(self.dir.join(name)).map_err(|e| Error::io(self.dir.join(name), e))?;
            writeln!(out, "{}  {name}", hex(&Sha256::digest(&bytes))).expect("write to Vec");
        }
        fs::write(&manifest, out).map_err(|e| Error::io(&manifest, e))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads `manifest.txt` in `dir` and checks every listed checksum.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let manifest = dir.join("manifest.txt");
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut names = Vec::new();
    for line in text.lines() {
        let (sum, name) = line
            .split_once("  ")
            .ok_or_else(|| Error::format(&manifest, format!("bad line {line:?}")))?;
        let bytes = fs::read(dir.join(name)).map_err(|e| Error::io(dir.join(name), e))?;
        if hex(&Sha256::digest(&bytes)) != sum {
            return Err(Error::format(&manifest, format!("checksum mismatch for {name}")));
        }
        names.push(name.to_string());
    }
    Ok(names)
}
