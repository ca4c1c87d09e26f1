//! Quantized spherical harmonics on `su(N)`.
//!
//! The discrete Laplacian `Δ_N = −Σ_a ad²(S_a)` built from spin-`(N−1)/2`
//! generators acts on each matrix diagonal of offset `m` as a real symmetric
//! tridiagonal operator `L_m`. Its eigenvectors on diagonal `m` are the
//! profiles of the basis elements `T_lm`, `l = m..N−1`, with eigenvalue
//! `−l(l+1)`. Everything here (Laplacian, Poisson solve, analysis, synthesis,
//! projection onto low modes) works diagonal by diagonal in `O(N²)` or
//! `O(N·l_max²)`.
//!
//! Real basis convention, with `v` the unit eigenvector of `L_m` for degree
//! `l`:
//! - `m = 0`: `T_l0 = i·diag(v)`;
//! - `+m` (cosine type): `(i·v on both m-diagonals) / √2`;
//! - `−m` (sine type): `(v on the upper m-diagonal, −v on the lower one) / √2`.
//!
//! These are orthonormal under `⟨A, B⟩ = Re Tr(A† B)` and span `su(N)`.
//! With this pairing the map `Y_lm ↦ T_lm` turns the sphere's Poisson
//! bracket into `κ N^{3/2}` times the commutator up to `O(N⁻²)`, with the
//! same constant for every pair of modes (see [`crate::sph`]).

use crate::error::{Error, Result};
use crate::matrix::{VorticityMatrix, ZMatrix};
use crate::scalar::Real;
use crate::tridiag::{Ldl, SymTridiag};

/// Precomputed per-diagonal eigen-decompositions of `Δ_N`.
#[derive(Clone, Debug)]
pub struct BasisCache<T> {
    n: usize,
    ladder: Vec<T>,
    diagonals: Vec<DiagonalBasis<T>>,
}

/// Eigen-decomposition of `L_m` for one diagonal offset `m`.
#[derive(Clone, Debug)]
pub struct DiagonalBasis<T> {
    pub m: usize,
    pub operator: SymTridiag<T>,
    /// Row `k` is the unit eigenvector for degree `l = m + k`.
    vectors: Vec<T>,
    /// Exact eigenvalues `−l(l+1)`, `l = m..N−1`.
    pub eigenvalues: Vec<T>,
    /// Eigenvalues as returned by the QL iteration.
    pub computed_eigenvalues: Vec<T>,
    ldl: Option<Ldl<T>>,
}

impl<T: Real> DiagonalBasis<T> {
    pub fn len(&self) -> usize {
        self.operator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operator.is_empty()
    }

    /// Eigenvector profile for degree `l` (requires `m ≤ l ≤ N−1`).
    pub fn vector(&self, l: usize) -> &[T] {
        let len = self.len();
        let k = l - self.m;
        &self.vectors[k * len..(k + 1) * len]
    }
}

/// `−l(l+1)` as a scalar.
#[inline]
pub fn laplacian_eigenvalue<T: Real>(l: usize) -> T {
    -T::of_usize(l * (l + 1))
}

impl<T: Real> BasisCache<T> {
    /// Builds `Δ_N` on every diagonal and its eigen-decomposition.
    pub fn build(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(n));
        }
        // c_j² = (j−1)(N−j+1), j = 1..N+1
        let ladder_sq: Vec<usize> = (1..=n + 1).map(|j| (j - 1) * (n + 1 - j)).collect();
        let ladder: Vec<T> = ladder_sq.iter().map(|&c| T::of_usize(c).sqrt()).collect();

        let diagonals = (0..n)
            .map(|m| {
                let len = n - m;
                let diag = (0..len)
                    .map(|i| {
                        let s = ladder_sq[i] + ladder_sq[i + 1] + ladder_sq[i + m] + ladder_sq[i + m + 1];
                        -(T::of_usize(m * m) + T::of_usize(s) * T::of(0.5))
                    })
                    .collect();
                let off = (0..len.saturating_sub(1))
                    .map(|i| ladder[i + 1] * ladder[i + m + 1])
                    .collect();
                let operator = SymTridiag::new(diag, off);
                let eig = operator.eigen();
                let vectors = eig.vectors.concat();
                let eigenvalues = (m..n).map(laplacian_eigenvalue).collect();
                let ldl = (m > 0).then(|| operator.ldl());
                DiagonalBasis {
                    m,
                    operator,
                    vectors,
                    eigenvalues,
                    computed_eigenvalues: eig.values,
                    ldl,
                }
            })
            .collect();
        Ok(Self {
            n,
            ladder,
            diagonals,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Ladder coefficients `c_j = sqrt((j−1)(N−j+1))`, `j = 1..N+1`
    /// (stored zero-based).
    pub fn ladder(&self) -> &[T] {
        &self.ladder
    }

    pub fn diagonal(&self, m: usize) -> &DiagonalBasis<T> {
        &self.diagonals[m]
    }

    pub fn diagonals(&self) -> &[DiagonalBasis<T>] {
        &self.diagonals
    }

    fn check(&self, w: &ZMatrix<T>) -> Result<()> {
        if w.n() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: w.n(),
            });
        }
        Ok(())
    }

    fn check_degree(&self, what: &'static str, l: usize) -> Result<()> {
        if l < 1 || l > self.n - 1 {
            return Err(Error::range(what, l, 1, self.n - 1));
        }
        Ok(())
    }

    /// `Δ_N w`, diagonal by diagonal.
    pub fn laplacian_apply(&self, w: &ZMatrix<T>) -> Result<ZMatrix<T>> {
        self.check(w)?;
        let mut out = ZMatrix::zeros(self.n);
        for d in &self.diagonals {
            for &lower in lower_flags(d.m) {
                for imag in [false, true] {
                    let x = read_diag(w, d.m, lower, imag);
                    let y = d.operator.apply(&x);
                    write_diag(&mut out, d.m, lower, imag, &y);
                }
            }
        }
        Ok(out)
    }

    /// Unique trace-free `P` with `Δ_N P = w`.
    ///
    /// Offsets `m ≥ 1` use the `LDLᵀ` factor of the (negative definite)
    /// `L_m`; the main diagonal is integrated directly (see
    /// `solve_main_diagonal`), which is exact up to rounding and keeps the
    /// result trace-free.
    pub fn solve_poisson(&self, w: &ZMatrix<T>) -> Result<ZMatrix<T>> {
        self.check(w)?;
        let (tr, ti) = w.trace();
        let norm = w.frobenius_norm();
        if (tr * tr + ti * ti).sqrt() > T::EPS.sqrt() * norm {
            return Err(Error::DegenerateInput(
                "right-hand side has a nonzero trace (l = 0 component)".into(),
            ));
        }
        let mut out = ZMatrix::zeros(self.n);
        for d in &self.diagonals {
            for &lower in lower_flags(d.m) {
                for imag in [false, true] {
                    let mut x = read_diag(w, d.m, lower, imag);
                    match &d.ldl {
                        Some(ldl) => ldl.solve_in_place(&mut x),
                        None => x = solve_main_diagonal(d, &x),
                    }
                    write_diag(&mut out, d.m, lower, imag, &x);
                }
            }
        }
        Ok(out)
    }

    /// Coefficients `ω^{lm} = ⟨T_lm, w⟩` for `1 ≤ l ≤ l_max`.
    ///
    /// Components outside `su(N)` (Hermitian part, trace) are dropped
    /// silently; see [`BasisCache::analyze_strict`].
    pub fn analyze(&self, w: &ZMatrix<T>, l_max: usize) -> Result<CoeffField<T>> {
        self.check(w)?;
        self.check_degree("l_max", l_max)?;
        let mut c = CoeffField::zeros(self.n, l_max);
        let inv_sqrt2 = T::FRAC_1_SQRT_2();
        let d0 = &self.diagonals[0];
        let main = read_diag(w, 0, false, true);
        for l in 1..=l_max {
            c.set(l, 0, dot(d0.vector(l), &main));
        }
        for m in 1..=l_max {
            let d = &self.diagonals[m];
            let ur = read_diag(w, m, false, false);
            let lr = read_diag(w, m, true, false);
            let ui = read_diag(w, m, false, true);
            let li = read_diag(w, m, true, true);
            let sine: Vec<T> = ur.iter().zip(&lr).map(|(&u, &l)| (u - l) * inv_sqrt2).collect();
            let cosine: Vec<T> = ui.iter().zip(&li).map(|(&u, &l)| (u + l) * inv_sqrt2).collect();
            for l in m..=l_max {
                let v = d.vector(l);
                c.set(l, m as i64, dot(v, &cosine));
                c.set(l, -(m as i64), dot(v, &sine));
            }
        }
        Ok(c)
    }

    /// Like [`BasisCache::analyze`] but rejects inputs that are not
    /// skew-Hermitian and trace-free (relative tolerance `√ε`).
    pub fn analyze_strict(&self, w: &ZMatrix<T>, l_max: usize) -> Result<CoeffField<T>> {
        self.check(w)?;
        if w.su_defect() > T::EPS.sqrt() {
            return Err(Error::DegenerateInput(
                "matrix is not skew-Hermitian and trace-free".into(),
            ));
        }
        self.analyze(w, l_max)
    }

    /// `Σ ω^{lm} T_lm`.
    pub fn synthesize(&self, c: &CoeffField<T>) -> Result<ZMatrix<T>> {
        if c.n() != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: c.n(),
            });
        }
        self.check_degree("l_max", c.l_max())?;
        let n = self.n;
        let l_max = c.l_max();
        let mut out = ZMatrix::zeros(n);
        let inv_sqrt2 = T::FRAC_1_SQRT_2();
        let d0 = &self.diagonals[0];
        let mut main = vec![T::zero(); n];
        for l in 1..=l_max {
            axpy(c.get(l, 0), d0.vector(l), &mut main);
        }
        write_diag(&mut out, 0, false, true, &main);
        for m in 1..=l_max {
            let d = &self.diagonals[m];
            let mut cosine = vec![T::zero(); n - m];
            let mut sine = vec![T::zero(); n - m];
            for l in m..=l_max {
                let v = d.vector(l);
                axpy(c.get(l, m as i64) * inv_sqrt2, v, &mut cosine);
                axpy(c.get(l, -(m as i64)) * inv_sqrt2, v, &mut sine);
            }
            let neg: Vec<T> = sine.iter().map(|&x| -x).collect();
            write_diag(&mut out, m, false, false, &sine);
            write_diag(&mut out, m, true, false, &neg);
            write_diag(&mut out, m, false, true, &cosine);
            write_diag(&mut out, m, true, true, &cosine);
        }
        Ok(out)
    }

    /// Orthogonal projection `π` onto the modes `l ≤ l_bar`.
    ///
    /// `l_bar = N−1` is the identity and returns an exact copy.
    pub fn project_large(&self, w: &ZMatrix<T>, l_bar: usize) -> Result<ZMatrix<T>> {
        self.check(w)?;
        self.check_degree("l_bar", l_bar)?;
        if l_bar == self.n - 1 {
            return Ok(w.clone());
        }
        self.synthesize(&self.analyze(w, l_bar)?)
    }

    /// The single basis element `T_lm` as a matrix.
    pub fn basis_element(&self, l: usize, m: i64) -> Result<VorticityMatrix<T>> {
        self.check_degree("l", l)?;
        if m.unsigned_abs() as usize > l {
            return Err(Error::OutOfRange {
                what: "m",
                value: m,
                lo: -(l as i64),
                hi: l as i64,
            });
        }
        let mut c = CoeffField::zeros(self.n, l);
        c.set(l, m, T::one());
        self.synthesize(&c)
    }
}

/// Main-diagonal solve. `L_0` is minus a weighted path-graph Laplacian with
/// edge weights `off[i]`, so the flux `off[i]·(p[i+1] − p[i])` is the
/// running sum of the right-hand side; the kernel (constant shift) is fixed
/// by removing the mean.
fn solve_main_diagonal<T: Real>(d: &DiagonalBasis<T>, rhs: &[T]) -> Vec<T> {
    let n = rhs.len();
    let mut out = vec![T::zero(); n];
    let mut flux = T::zero();
    for i in 0..n - 1 {
        flux += rhs[i];
        out[i + 1] = out[i] + flux / d.operator.off[i];
    }
    let mean = out.iter().copied().sum::<T>() / T::of_usize(n);
    out.iter_mut().for_each(|x| *x -= mean);
    out
}

fn lower_flags(m: usize) -> &'static [bool] {
    if m == 0 {
        &[false]
    } else {
        &[false, true]
    }
}

/// Reads diagonal of offset `m` (upper: `(i, i+m)`, lower: `(i+m, i)`).
fn read_diag<T: Real>(w: &ZMatrix<T>, m: usize, lower: bool, imag: bool) -> Vec<T> {
    let n = w.n();
    let data = if imag { w.im() } else { w.re() };
    (0..n - m)
        .map(|i| {
            let (r, c) = if lower { (i + m, i) } else { (i, i + m) };
            data[r * n + c]
        })
        .collect()
}

fn write_diag<T: Real>(w: &mut ZMatrix<T>, m: usize, lower: bool, imag: bool, x: &[T]) {
    let n = w.n();
    let data = if imag { w.im_mut() } else { w.re_mut() };
    for (i, &v) in x.iter().enumerate() {
        let (r, c) = if lower { (i + m, i) } else { (i, i + m) };
        data[r * n + c] = v;
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    if alpha == T::zero() {
        return;
    }
    for (a, &b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// Real spectral coefficients `ω^{lm}`, `1 ≤ l ≤ l_max`, `−l ≤ m ≤ l`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffField<T> {
    n: usize,
    l_max: usize,
    values: Vec<T>,
}

/// Flat index of `(l, m)` in a coefficient vector starting at `l = 1`.
#[inline]
pub fn mode_index(l: usize, m: i64) -> usize {
    debug_assert!(l >= 1 && m.unsigned_abs() as usize <= l);
    (l * l - 1) + (m + l as i64) as usize
}

/// Number of modes with `1 ≤ l ≤ l_max`.
#[inline]
pub fn mode_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1) - 1
}

impl<T: Real> CoeffField<T> {
    pub fn zeros(n: usize, l_max: usize) -> Self {
        Self {
            n,
            l_max,
            values: vec![T::zero(); mode_count(l_max)],
        }
    }

    pub fn from_values(n: usize, l_max: usize, values: Vec<T>) -> Result<Self> {
        if values.len() != mode_count(l_max) {
            return Err(Error::SizeMismatch {
                expected: mode_count(l_max),
                got: values.len(),
            });
        }
        Ok(Self { n, l_max, values })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn get(&self, l: usize, m: i64) -> T {
        self.values[mode_index(l, m)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, m: i64, v: T) {
        self.values[mode_index(l, m)] = v;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Iterator over `(l, m, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, T)> + '_ {
        (1..=self.l_max).flat_map(move |l| {
            (-(l as i64)..=l as i64).map(move |m| (l, m, self.get(l, m)))
        })
    }

    pub fn sum_squares(&self) -> T {
        self.values.iter().map(|&x| x * x).sum()
    }

    /// Same coefficients with a different matrix size `n` (the degree range
    /// must fit).
    pub fn with_n(&self, n: usize) -> Result<Self> {
        if self.l_max > n - 1 {
            return Err(Error::range("l_max", self.l_max, 1, n - 1));
        }
        Ok(Self {
            n,
            l_max: self.l_max,
            values: self.values.clone(),
        })
    }
}
