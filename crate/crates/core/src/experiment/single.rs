//! Single-stage runs shared by the pipeline and the command line.

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use crate::diagnostics::{
    invariants, spectrum_of_coeffs, write_invariants_csv, write_spectrum_csv, Invariants, SpectrumSeries,
};
use crate::dynamics::{Closure, ClosureKind};
use crate::error::{Error, Result};
use crate::integrators::{integrate_observed, Event, Frame, StepperConfig};
use crate::matrix::VorticityMatrix;
use crate::spectral::{BasisCache, CoeffField};
use crate::sph::sph_evaluate;
use crate::stochastic::{ad_normality, estimate_noise_model, ks_normality, CoeffTimeSeries, NoiseModel};

use super::config::{IcSpec, RunConfig};
use super::ic::gen_ic;
use super::snapshot::Snapshot;

/// Highest Casimir order written to the invariant tables.
pub const INVARIANT_ORDER: usize = 4;
const MIN_NORMALITY_SAMPLES: usize = 20;
pub const DECORRELATED: f64 = 0.1;

/// The configured initial condition: a random profile or a stored snapshot.
pub fn initial_state(cfg: &RunConfig, basis: &BasisCache<f64>) -> Result<VorticityMatrix<f64>> {
    match &cfg.ic {
        IcSpec::Profile(profile) => gen_ic(basis, cfg.seed, profile),
        IcSpec::Snapshot { snapshot } => {
            let s = Snapshot::read(snapshot)?;
            if s.state.n() != cfg.n {
                return Err(Error::Config(format!(
                    "snapshot {} has N = {}, config has n = {}",
                    snapshot.display(),
                    s.state.n(),
                    cfg.n
                )));
            }
            Ok(s.state)
        }
    }
}

/// A run with its per-snapshot spectra and invariants.
pub struct Recorded {
    pub series: SpectrumSeries,
    pub invariants: Vec<(f64, Invariants)>,
    pub outcome: Result<Frame<f64>>,
    pub last_good: Option<Frame<f64>>,
}

pub fn record_run(
    basis: &BasisCache<f64>,
    initial: &VorticityMatrix<f64>,
    closure: Closure,
    noise: Option<&NoiseModel>,
    stepper: &StepperConfig,
) -> Recorded {
    let n = basis.n();
    let mut series = SpectrumSeries::new(closure.kind.name());
    let mut inv = Vec::new();
    let mut last_good = None;
    let outcome = integrate_observed(initial, closure, noise, stepper, basis, |ev| {
        match ev {
            Event::Snapshot(f) => {
                let c = basis.analyze(&f.state, n - 1)?;
                series.push(f.time, spectrum_of_coeffs(&c));
                inv.push((f.time, invariants(basis, &f.state, INVARIANT_ORDER.min(n))?));
            }
            Event::LastGood(f) => last_good = Some(f.clone()),
        }
        Ok(ControlFlow::Continue(()))
    });
    Recorded {
        series,
        invariants: inv,
        outcome,
        last_good,
    }
}

/// Files written by [`run_single`].
#[derive(Clone, Debug)]
pub struct SingleRun {
    pub spectrum: PathBuf,
    pub invariants: PathBuf,
    /// Final state, or the last good state after a blow-up.
    pub snapshot: PathBuf,
    pub final_spectrum: Vec<f64>,
}

pub fn snapshot_of(kind: ClosureKind, seed: u64, f: &Frame<f64>) -> Snapshot {
    Snapshot {
        closure: kind,
        step: f.step,
        time: f.time,
        seed,
        state: f.state.clone(),
    }
}

/// Runs one closure from the configured initial condition into
/// `cfg.out_dir` as `run_<name>_{spectrum,invariants}.csv` and
/// `run_<name>_final.ezsn`. A blow-up writes `run_<name>_last_good.ezsn`
/// and returns the error.
pub fn run_single(cfg: &RunConfig, kind: ClosureKind, l_bar: usize, noise: Option<&NoiseModel>) -> Result<SingleRun> {
    cfg.validate()?;
    let basis = BasisCache::<f64>::build(cfg.n)?;
    let w0 = initial_state(cfg, &basis)?;
    let closure = match kind {
        ClosureKind::FullDns => Closure::dns(cfg.n),
        k => Closure::new(k, l_bar, cfg.n)?,
    };
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let rec = record_run(&basis, &w0, closure, noise, &cfg.stepper()?);
    let name = kind.name();
    let spectrum = cfg.out_dir.join(format!("run_{name}_spectrum.csv"));
    write_spectrum_csv(&spectrum, &rec.series)?;
    let inv = cfg.out_dir.join(format!("run_{name}_invariants.csv"));
    write_invariants_csv(&inv, &rec.invariants)?;
    match rec.outcome {
        Ok(frame) => {
            let snapshot = cfg.out_dir.join(format!("run_{name}_final.ezsn"));
            snapshot_of(kind, cfg.seed, &frame).write(&snapshot)?;
            Ok(SingleRun {
                spectrum,
                invariants: inv,
                snapshot,
                final_spectrum: rec.series.last().unwrap_or_default().to_vec(),
            })
        }
        Err(e) => {
            if let Some(f) = &rec.last_good {
                snapshot_of(kind, cfg.seed, f).write(&cfg.out_dir.join(format!("run_{name}_last_good.ezsn")))?;
            }
            Err(e)
        }
    }
}

/// Share of modes `l > l̄` whose sampled coefficients pass KS and AD at 5%;
/// `None` when the series is too short to test.
///
/// Each mode is thinned to one sample per decorrelation lag, the first lag
/// where its autocorrelation drops below [`DECORRELATED`], keeping at least
/// 20 samples.
pub fn normality_fractions(series: &CoeffTimeSeries, l_bar: usize) -> (Option<f64>, Option<f64>) {
    let Some(first) = series.fields().first() else {
        return (None, None);
    };
    if series.len() < MIN_NORMALITY_SAMPLES {
        return (None, None);
    }
    let (mut ks_pass, mut ad_pass, mut tested) = (0usize, 0usize, 0usize);
    for l in l_bar + 1..=first.l_max() {
        for m in -(l as i64)..=l as i64 {
            let x = thin(&series.mode(l, m));
            let (Ok(ks), Ok(ad)) = (ks_normality(&x), ad_normality(&x)) else {
                continue;
            };
            tested += 1;
            ks_pass += ks.pass_at_5pct as usize;
            ad_pass += ad.pass_at_5pct as usize;
        }
    }
    let frac = |k: usize| (tested > 0).then(|| k as f64 / tested as f64);
    (frac(ks_pass), frac(ad_pass))
}

fn thin(x: &[f64]) -> Vec<f64> {
    let len = x.len();
    let mean = x.iter().sum::<f64>() / len as f64;
    let var: f64 = x.iter().map(|a| (a - mean).powi(2)).sum();
    let max_lag = (len / MIN_NORMALITY_SAMPLES).max(1);
    let lag = if var > 0.0 {
        (1..max_lag)
            .find(|&k| x.iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / var < DECORRELATED)
            .unwrap_or(max_lag)
    } else {
        1
    };
    x.iter().step_by(lag).copied().collect()
}

/// DNS from the configured initial condition for `cfg.t_end`, sampled at the
/// snapshot cadence, then fitted for modes above `l_bar`.
pub fn fit_noise_from_dns(cfg: &RunConfig, l_bar: usize) -> Result<(NoiseModel, CoeffTimeSeries)> {
    cfg.validate()?;
    let n = cfg.n;
    let basis = BasisCache::<f64>::build(n)?;
    let w0 = initial_state(cfg, &basis)?;
    let mut times = Vec::new();
    let mut fields: Vec<CoeffField<f64>> = Vec::new();
    integrate_observed(&w0, Closure::dns(n), None, &cfg.stepper()?, &basis, |ev| {
        if let Event::Snapshot(f) = ev {
            if f.step % cfg.snapshot_every as u64 == 0 {
                times.push(f.time);
                fields.push(basis.analyze(&f.state, n - 1)?);
            }
        }
        Ok(ControlFlow::Continue(()))
    })?;
    let series = CoeffTimeSeries::new(times, fields)?;
    let model = estimate_noise_model(&series, l_bar, cfg.seed)?;
    Ok((model, series))
}

/// Writes `theta,phi,value` rows of the field on a Gauss–Legendre ×
/// uniform-longitude grid.
pub fn write_grid_csv(path: &Path, basis: &BasisCache<f64>, w: &VorticityMatrix<f64>, n_theta: usize, n_phi: usize) -> Result<()> {
    let c = basis.analyze(w, basis.n() - 1)?;
    let grid = sph_evaluate(&c, n_theta, n_phi)?;
    let mut text = String::from("theta,phi,value\n");
    for (i, th) in grid.theta.iter().enumerate() {
        for (j, ph) in grid.phi.iter().enumerate() {
            text.push_str(&format!("{th},{ph},{}\n", grid.at(i, j)));
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
