//! Euler–Zeitlin vector field `Ẇ = [P, W]`, `Δ_N P = W`, and the three
//! large-scale closures on the `π`-subspace:
//!
//! - deterministic: `dW̄ = π[P̄, W̄] dt`;
//! - SALT (enstrophy type): `+ Σ_{l>l̄} π[T_lm, W̄] / (−l(l+1)) ∘ dβ^{lm}`;
//! - energy preserving: `+ Σ_{l>l̄} π[P̄, T_lm] ∘ dβ^{lm}`.
//!
//! The noise sums are linear in `T_lm`, so per step they collapse to one
//! commutator with an aggregated matrix (`q` for SALT, `r` for EPN).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{VorticityMatrix, ZMatrix};
use crate::scalar::Real;
use crate::spectral::{laplacian_eigenvalue, mode_count, mode_index, BasisCache, CoeffField};

/// Serialized by its short name (`dns`, `no-model`, `salt`, `epn`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ClosureKind {
    FullDns,
    Deterministic,
    Salt,
    EnergyPreserving,
}

impl ClosureKind {
    pub const ALL: [ClosureKind; 4] = [
        ClosureKind::FullDns,
        ClosureKind::Deterministic,
        ClosureKind::Salt,
        ClosureKind::EnergyPreserving,
    ];

    pub fn id(self) -> u8 {
        match self {
            ClosureKind::FullDns => 0,
            ClosureKind::Deterministic => 1,
            ClosureKind::Salt => 2,
            ClosureKind::EnergyPreserving => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == id)
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, ClosureKind::Salt | ClosureKind::EnergyPreserving)
    }

    pub fn name(self) -> &'static str {
        match self {
            ClosureKind::FullDns => "dns",
            ClosureKind::Deterministic => "no-model",
            ClosureKind::Salt => "salt",
            ClosureKind::EnergyPreserving => "epn",
        }
    }
}

impl fmt::Display for ClosureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<ClosureKind> for String {
    fn from(k: ClosureKind) -> Self {
        k.name().to_string()
    }
}

impl TryFrom<String> for ClosureKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for ClosureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dns" | "full-dns" => Ok(ClosureKind::FullDns),
            "no-model" | "deterministic" => Ok(ClosureKind::Deterministic),
            "salt" => Ok(ClosureKind::Salt),
            "epn" | "energy-preserving" => Ok(ClosureKind::EnergyPreserving),
            other => Err(Error::Config(format!("unknown closure `{other}`"))),
        }
    }
}

/// A closure together with its threshold degree `l̄` (ignored for DNS).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Closure {
    pub kind: ClosureKind,
    pub l_bar: usize,
}

impl Closure {
    pub fn dns(n: usize) -> Self {
        Self {
            kind: ClosureKind::FullDns,
            l_bar: n - 1,
        }
    }

    pub fn new(kind: ClosureKind, l_bar: usize, n: usize) -> Result<Self> {
        if kind != ClosureKind::FullDns && (l_bar < 1 || l_bar > n - 1) {
            return Err(Error::range("l_bar", l_bar, 1, n - 1));
        }
        let l_bar = if kind == ClosureKind::FullDns { n - 1 } else { l_bar };
        Ok(Self { kind, l_bar })
    }

    pub fn is_reduced(&self) -> bool {
        self.kind != ClosureKind::FullDns
    }

    /// Drift of the closure at `w`.
    pub fn drift<T: Real>(&self, basis: &BasisCache<T>, w: &ZMatrix<T>) -> Result<ZMatrix<T>> {
        match self.kind {
            ClosureKind::FullDns => dns_vector_field(basis, w),
            _ => reduced_drift(basis, w, self.l_bar, false),
        }
    }

    /// Stochastic increment `g(w, ΔB)` of the closure (`None` for the
    /// deterministic ones).
    pub fn diffusion<T: Real>(
        &self,
        basis: &BasisCache<T>,
        w: &ZMatrix<T>,
        agg: &NoiseAggregate<T>,
    ) -> Result<Option<ZMatrix<T>>> {
        match self.kind {
            ClosureKind::Salt => salt_diffusion(basis, w, agg, self.l_bar).map(Some),
            ClosureKind::EnergyPreserving => epn_diffusion(basis, w, agg, self.l_bar).map(Some),
            _ => Ok(None),
        }
    }
}

/// Matrix commutator `ab − ba` with a size check (general complex
/// matrices).
pub fn commutator<T: Real>(a: &ZMatrix<T>, b: &ZMatrix<T>) -> Result<ZMatrix<T>> {
    a.check_same_size(b)?;
    Ok(a.commutator_general(b))
}

/// Commutator of two `su(N)` elements (fast path).
pub fn su_commutator<T: Real>(a: &ZMatrix<T>, b: &ZMatrix<T>) -> Result<ZMatrix<T>> {
    a.check_same_size(b)?;
    Ok(a.skew_commutator(b))
}

/// Full Euler–Zeitlin vector field `[P, W]`.
pub fn dns_vector_field<T: Real>(basis: &BasisCache<T>, w: &VorticityMatrix<T>) -> Result<VorticityMatrix<T>> {
    let p = basis.solve_poisson(w)?;
    su_commutator(&p, w)
}

/// `π[P̄, W̄]`. With `check`, rejects inputs that are not in the
/// large-scale subspace (relative tolerance `√ε`).
pub fn reduced_drift<T: Real>(
    basis: &BasisCache<T>,
    w_bar: &VorticityMatrix<T>,
    l_bar: usize,
    check: bool,
) -> Result<VorticityMatrix<T>> {
    if check {
        check_large_scale(basis, w_bar, l_bar)?;
    }
    let p_bar = basis.solve_poisson(w_bar)?;
    let field = su_commutator(&p_bar, w_bar)?;
    basis.project_large(&field, l_bar)
}

pub fn check_large_scale<T: Real>(basis: &BasisCache<T>, w: &ZMatrix<T>, l_bar: usize) -> Result<()> {
    let pw = basis.project_large(w, l_bar)?;
    let norm = w.frobenius_norm();
    if pw.sub(w).frobenius_norm() > T::EPS.sqrt() * norm {
        return Err(Error::DegenerateInput(format!(
            "state has components above l_bar = {l_bar}"
        )));
    }
    Ok(())
}

/// Brownian increments `ΔB^{lm}` for the small-scale modes `l̄ < l ≤ N−1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Increments<T> {
    n: usize,
    l_bar: usize,
    values: Vec<T>,
}

impl<T: Real> Increments<T> {
    pub fn zeros(n: usize, l_bar: usize) -> Self {
        Self {
            n,
            l_bar,
            values: vec![T::zero(); mode_count(n - 1) - mode_count(l_bar)],
        }
    }

    /// Builds increments from an explicit `(l, m) → ΔB` map. Missing keys
    /// are zero; keys with `l ≤ l̄`, `l ≥ N` or `|m| > l` are rejected.
    pub fn from_map(n: usize, l_bar: usize, map: &BTreeMap<(usize, i64), T>) -> Result<Self> {
        let mut out = Self::zeros(n, l_bar);
        for (&(l, m), &v) in map {
            if l <= l_bar || l > n - 1 {
                return Err(Error::range("increment degree l", l, l_bar + 1, n - 1));
            }
            if m.unsigned_abs() as usize > l {
                return Err(Error::OutOfRange {
                    what: "increment order m",
                    value: m,
                    lo: -(l as i64),
                    hi: l as i64,
                });
            }
            out.set(l, m, v);
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l_bar(&self) -> usize {
        self.l_bar
    }

    #[inline]
    fn offset(&self, l: usize, m: i64) -> usize {
        mode_index(l, m) - mode_count(self.l_bar)
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> T {
        self.values[self.offset(l, m)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: i64, v: T) {
        let i = self.offset(l, m);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, T)> + '_ {
        (self.l_bar + 1..self.n).flat_map(move |l| {
            (-(l as i64)..=l as i64).map(move |m| (l, m, self.get(l, m)))
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == T::zero())
    }
}

/// Aggregated noise matrices for one step:
/// `r = Σ ΔB^{lm} T_lm`, `q = Σ ΔB^{lm} T_lm / (−l(l+1))`, `l > l̄`.
#[derive(Clone, Debug)]
pub struct NoiseAggregate<T> {
    pub q: VorticityMatrix<T>,
    pub r: VorticityMatrix<T>,
    pub h: T,
    pub seed: u64,
    pub step: u64,
}

pub fn build_noise_aggregates<T: Real>(
    basis: &BasisCache<T>,
    increments: &Increments<T>,
    l_bar: usize,
) -> Result<NoiseAggregate<T>> {
    let n = basis.n();
    if increments.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            got: increments.n(),
        });
    }
    if increments.l_bar() != l_bar {
        return Err(Error::Config(format!(
            "increments start above l_bar = {}, expected {l_bar}",
            increments.l_bar()
        )));
    }
    if l_bar >= n - 1 || increments.is_zero() {
        return Ok(NoiseAggregate {
            q: ZMatrix::zeros(n),
            r: ZMatrix::zeros(n),
            h: T::zero(),
            seed: 0,
            step: 0,
        });
    }
    let mut r_coeffs = CoeffField::zeros(n, n - 1);
    let mut q_coeffs = CoeffField::zeros(n, n - 1);
    for (l, m, v) in increments.iter() {
        r_coeffs.set(l, m, v);
        q_coeffs.set(l, m, v / laplacian_eigenvalue::<T>(l));
    }
    Ok(NoiseAggregate {
        q: basis.synthesize(&q_coeffs)?,
        r: basis.synthesize(&r_coeffs)?,
        h: T::zero(),
        seed: 0,
        step: 0,
    })
}

/// SALT diffusion `π[q, W̄]`.
pub fn salt_diffusion<T: Real>(
    basis: &BasisCache<T>,
    w_bar: &VorticityMatrix<T>,
    agg: &NoiseAggregate<T>,
    l_bar: usize,
) -> Result<VorticityMatrix<T>> {
    let field = su_commutator(&agg.q, w_bar)?;
    basis.project_large(&field, l_bar)
}

/// Energy-preserving diffusion `π[P̄, r]`.
pub fn epn_diffusion<T: Real>(
    basis: &BasisCache<T>,
    w_bar: &VorticityMatrix<T>,
    agg: &NoiseAggregate<T>,
    l_bar: usize,
) -> Result<VorticityMatrix<T>> {
    let p_bar = basis.solve_poisson(w_bar)?;
    let field = su_commutator(&p_bar, &agg.r)?;
    basis.project_large(&field, l_bar)
}
