//! Random initial vorticity with a prescribed per-degree amplitude.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::VorticityMatrix;
use crate::scalar::Real;
use crate::spectral::{BasisCache, CoeffField};

/// Per-degree amplitude `a(l)` of the random coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IcProfile {
    /// `a(l) = amplitude · l · exp(−(l/l0)²)`; `l0` defaults to `N/8`.
    Blob {
        #[serde(default)]
        l0: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Explicit `a(1), a(2), …`; missing degrees are zero.
    Table { amplitudes: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for IcProfile {
    fn default() -> Self {
        IcProfile::Blob {
            l0: None,
            amplitude: 1.0,
        }
    }
}

impl IcProfile {
    pub fn amplitude(&self, n: usize, l: usize) -> f64 {
        match self {
            IcProfile::Blob { l0, amplitude } => {
                let l0 = l0.unwrap_or(n as f64 / 8.0);
                let x = l as f64;
                amplitude * x * (-(x / l0).powi(2)).exp()
            }
            IcProfile::Table { amplitudes } => amplitudes.get(l - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let IcProfile::Blob { l0: Some(l0), .. } = self {
            if !(*l0 > 0.0) || !l0.is_finite() {
                return Err(Error::Config(format!("profile l0 = {l0} must be positive")));
            }
        }
        for l in 1..n {
            let a = self.amplitude(n, l);
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::Config(format!("profile amplitude a({l}) = {a} is invalid")));
            }
        }
        Ok(())
    }
}

/// Coefficients `ω^{lm} = a(l) ξ_lm` with seeded standard normals, in
/// `(l, m)` order.
pub fn gen_ic_coeffs(n: usize, seed: u64, profile: &IcProfile) -> Result<CoeffField<f64>> {
    if n < 2 {
        return Err(Error::InvalidSize(n));
    }
    profile.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = CoeffField::zeros(n, n - 1);
    for l in 1..n {
        let a = profile.amplitude(n, l);
        for m in -(l as i64)..=l as i64 {
            let xi: f64 = StandardNormal.sample(&mut rng);
            c.set(l, m, a * xi);
        }
    }
    Ok(c)
}

pub fn gen_ic<T: Real>(basis: &BasisCache<T>, seed: u64, profile: &IcProfile) -> Result<VorticityMatrix<T>> {
    let c = gen_ic_coeffs(basis.n(), seed, profile)?;
    let mut ct = CoeffField::zeros(basis.n(), basis.n() - 1);
    for (v, x) in ct.values_mut().iter_mut().zip(c.values()) {
        *v = T::of(*x);
    }
    basis.synthesize(&ct)
}
