//! Heun predictor–corrector steppers (deterministic and Stratonovich) and
//! the trajectory driver.

use std::ops::ControlFlow;

use crate::diagnostics::{energy_spectrum, SpectrumSeries};
use crate::dynamics::{build_noise_aggregates, Closure, NoiseAggregate};
use crate::error::{Error, Result};
use crate::matrix::{VorticityMatrix, ZMatrix};
use crate::scalar::Real;
use crate::spectral::BasisCache;
use crate::stochastic::{sample_increments, NoiseModel};

/// Linear structure needed by the steppers.
pub trait LinearState<T>: Clone {
    fn add_scaled(&self, alpha: T, other: &Self) -> Self;
    fn add_assign_scaled(&mut self, alpha: T, other: &Self);
}

impl<T: Real> LinearState<T> for ZMatrix<T> {
    fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        ZMatrix::add_scaled(self, alpha, other)
    }

    fn add_assign_scaled(&mut self, alpha: T, other: &Self) {
        self.axpy(alpha, other);
    }
}

macro_rules! scalar_state {
    ($t:ty) => {
        impl LinearState<$t> for $t {
            fn add_scaled(&self, alpha: $t, other: &Self) -> Self {
                self + alpha * other
            }

            fn add_assign_scaled(&mut self, alpha: $t, other: &Self) {
                *self += alpha * other;
            }
        }
    };
}
scalar_state!(f64);
scalar_state!(f32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig {
    pub h: f64,
    pub t_end: f64,
    pub reproject_every: usize,
    pub snapshot_every: usize,
}

impl StepperConfig {
    pub fn new(h: f64, t_end: f64, reproject_every: usize, snapshot_every: usize) -> Result<Self> {
        let cfg = Self {
            h,
            t_end,
            reproject_every,
            snapshot_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("time step h = {} must be positive", self.h)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must be non-negative", self.t_end)));
        }
        if self.reproject_every == 0 || self.snapshot_every == 0 {
            return Err(Error::Config("cadences must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps, `round(t_end / h)`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.h).round() as u64
    }
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            h: 0.25,
            t_end: 250.0,
            reproject_every: 1,
            snapshot_every: 4,
        }
    }
}

/// `W + (h/2)(f(W) + f(W + h f(W)))`.
pub fn heun_det_step<T, S, F>(state: &S, h: T, mut drift: F) -> Result<S>
where
    T: Real,
    S: LinearState<T>,
    F: FnMut(&S) -> Result<S>,
{
    let k1 = drift(state)?;
    let predictor = state.add_scaled(h, &k1);
    let mut k = drift(&predictor)?;
    k.add_assign_scaled(T::one(), &k1);
    Ok(state.add_scaled(h * T::of(0.5), &k))
}

/// Stratonovich Heun step with the increment held fixed over the step:
/// `W* = W + h a(W) + g(W)`,
/// `W⁺ = W + (h/2)(a(W) + a(W*)) + ½(g(W) + g(W*))`.
///
/// `diffusion` returns `None` for a deterministic closure, which makes the
/// step identical to [`heun_det_step`].
pub fn heun_strat_step<T, S, F, G>(state: &S, h: T, mut drift: F, mut diffusion: G) -> Result<S>
where
    T: Real,
    S: LinearState<T>,
    F: FnMut(&S) -> Result<S>,
    G: FnMut(&S) -> Result<Option<S>>,
{
    let half = T::of(0.5);
    let a1 = drift(state)?;
    let g1 = diffusion(state)?;
    let mut predictor = state.add_scaled(h, &a1);
    if let Some(g) = &g1 {
        predictor.add_assign_scaled(T::one(), g);
    }
    let mut a = drift(&predictor)?;
    a.add_assign_scaled(T::one(), &a1);
    let mut out = state.add_scaled(h * half, &a);
    if let Some(mut g) = g1 {
        if let Some(g2) = diffusion(&predictor)? {
            g.add_assign_scaled(T::one(), &g2);
            out.add_assign_scaled(half, &g);
        }
    }
    Ok(out)
}

/// `(W − W†)/2` with the trace removed.
pub fn structural_reprojection<T: Real>(w: &VorticityMatrix<T>) -> VorticityMatrix<T> {
    w.su_part()
}

/// Recorded state.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T> {
    pub step: u64,
    pub time: f64,
    pub state: VorticityMatrix<T>,
}

pub enum Event<'a, T> {
    /// A state at the snapshot cadence (including the initial and final).
    Snapshot(&'a Frame<T>),
    /// The last finite state before a blow-up was detected.
    LastGood(&'a Frame<T>),
}

/// Runs `closure` from `initial` to `cfg.t_end`, reporting states to
/// `observer`. Returns the final frame; the observer may end the run early
/// by returning `ControlFlow::Break` from a snapshot.
///
/// Reduced closures start from `π(initial)` and are projected after every
/// step. A state that is not finite or whose Frobenius norm exceeds
/// `10⁶ ×` the initial one stops the run with [`Error::BlowUp`] after the
/// last good state is passed to the observer.
pub fn integrate_observed<T, O>(
    initial: &VorticityMatrix<T>,
    closure: Closure,
    noise: Option<&NoiseModel>,
    cfg: &StepperConfig,
    basis: &BasisCache<T>,
    mut observer: O,
) -> Result<Frame<T>>
where
    T: Real,
    O: FnMut(Event<'_, T>) -> Result<ControlFlow<()>>,
{
    cfg.validate()?;
    let n = basis.n();
    initial.check_same_size(&ZMatrix::zeros(n))?;
    if closure.kind.is_stochastic() {
        let model = noise.ok_or_else(|| {
            Error::Config(format!("closure `{}` needs a noise model", closure.kind))
        })?;
        if model.n != n || model.l_bar != closure.l_bar {
            return Err(Error::Config(format!(
                "noise model is for N = {}, l_bar = {}; run has N = {n}, l_bar = {}",
                model.n, model.l_bar, closure.l_bar
            )));
        }
    }
    let noise = if closure.kind.is_stochastic() { noise } else { None };

    let reduced = closure.is_reduced();
    let mut state = if reduced {
        basis.project_large(initial, closure.l_bar)?
    } else {
        initial.clone()
    };
    let limit = T::of(1e6) * state.frobenius_norm();
    let h = T::of(cfg.h);
    let steps = cfg.steps();

    let mut frame = Frame {
        step: 0,
        time: 0.0,
        state: state.clone(),
    };
    if observer(Event::Snapshot(&frame))?.is_break() {
        return Ok(frame);
    }

    for step in 0..steps {
        let agg: Option<NoiseAggregate<T>> = match noise {
            Some(model) => {
                let inc = sample_increments::<T>(model, cfg.h, step);
                let mut agg = build_noise_aggregates(basis, &inc, closure.l_bar)?;
                agg.h = h;
                agg.seed = model.seed;
                agg.step = step;
                Some(agg)
            }
            None => None,
        };
        let drift = |w: &ZMatrix<T>| closure.drift(basis, w);
        let mut next = match &agg {
            Some(agg) => heun_strat_step(&state, h, drift, |w: &ZMatrix<T>| {
                closure.diffusion(basis, w, agg)
            })?,
            None => heun_det_step(&state, h, drift)?,
        };
        if reduced {
            next = basis.project_large(&next, closure.l_bar)?;
        }
        if (step + 1) % cfg.reproject_every as u64 == 0 {
            next = structural_reprojection(&next);
        }
        let time = (step + 1) as f64 * cfg.h;
        if !next.is_finite() || next.frobenius_norm() > limit {
            let last = Frame {
                step,
                time: step as f64 * cfg.h,
                state,
            };
            let _ = observer(Event::LastGood(&last))?;
            return Err(Error::BlowUp {
                time,
                last_good_time: last.time,
            });
        }
        state = next;
        let is_last = step + 1 == steps;
        if (step + 1) % cfg.snapshot_every as u64 == 0 || is_last {
            frame = Frame {
                step: step + 1,
                time,
                state: state.clone(),
            };
            if observer(Event::Snapshot(&frame))?.is_break() {
                return Ok(frame);
            }
        }
    }
    Ok(Frame {
        step: steps,
        time: steps as f64 * cfg.h,
        state,
    })
}

/// Snapshots and their energy spectra.
#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub frames: Vec<Frame<T>>,
    pub spectra: SpectrumSeries,
}

impl<T> Trajectory<T> {
    pub fn last(&self) -> &Frame<T> {
        self.frames.last().expect("trajectory holds the initial state")
    }
}

/// [`integrate_observed`] collecting every snapshot and its spectrum.
pub fn integrate<T: Real>(
    initial: &VorticityMatrix<T>,
    closure: Closure,
    noise: Option<&NoiseModel>,
    cfg: &StepperConfig,
    basis: &BasisCache<T>,
) -> Result<Trajectory<T>> {
    let mut frames = Vec::new();
    let mut spectra = SpectrumSeries::new(closure.kind.name());
    integrate_observed(initial, closure, noise, cfg, basis, |ev| {
        if let Event::Snapshot(f) = ev {
            let e = energy_spectrum(basis, &f.state)?;
            spectra.push(f.time, e.into_iter().map(|x| x.to_f64_lossy()).collect());
            frames.push(f.clone());
        }
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(Trajectory { frames, spectra })
}
