//! Dense complex square matrices with split real/imaginary storage.
//!
//! The discrete vorticity `W`, the stream matrix `P` and all derived fields
//! live in `su(N)`: skew-Hermitian, trace-free. With split storage such a
//! matrix has an antisymmetric real part and a symmetric imaginary part, which
//! the fast commutator exploits.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `N×N` complex matrix, row-major, real and imaginary parts stored apart.
#[derive(Clone, Debug, PartialEq)]
pub struct ZMatrix<T> {
    n: usize,
    re: Vec<T>,
    im: Vec<T>,
}

/// Element of `su(N)`. The invariants (skew-Hermitian, trace-free) are
/// maintained by the operations that produce it and checked by
/// [`ZMatrix::su_defect`].
pub type VorticityMatrix<T> = ZMatrix<T>;

impl<T: Real> ZMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            re: vec![T::zero(); n * n],
            im: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            m.re[j * n + j] = T::one();
        }
        m
    }

    pub fn from_parts(n: usize, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: re.len(),
            });
        }
        if im.len() != n * n {
            return Err(Error::SizeMismatch {
                expected: n * n,
                got: im.len(),
            });
        }
        Ok(Self { n, re, im })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn re(&self) -> &[T] {
        &self.re
    }

    #[inline]
    pub fn im(&self) -> &[T] {
        &self.im
    }

    #[inline]
    pub fn re_mut(&mut self) -> &mut [T] {
        &mut self.re
    }

    #[inline]
    pub fn im_mut(&mut self) -> &mut [T] {
        &mut self.im
    }

    /// Entry `(row, col)` as `(re, im)`, zero-based.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> (T, T) {
        let i = row * self.n + col;
        (self.re[i], self.im[i])
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: (T, T)) {
        let i = row * self.n + col;
        self.re[i] = value.0;
        self.im[i] = value.1;
    }

    pub fn check_same_size(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let mut out = self.clone();
        out.axpy(alpha, other);
        out
    }

    /// In place `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.re.iter_mut().zip(&other.re) {
            *a += alpha * *b;
        }
        for (a, b) in self.im.iter_mut().zip(&other.im) {
            *a += alpha * *b;
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            n: self.n,
            re: self.re.iter().map(|&x| alpha * x).collect(),
            im: self.im.iter().map(|&x| alpha * x).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(-T::one(), other)
    }

    /// Real Frobenius inner product `Re Tr(A† B)`.
    pub fn inner(&self, other: &Self) -> T {
        debug_assert_eq!(self.n, other.n);
        let r: T = self.re.iter().zip(&other.re).map(|(&a, &b)| a * b).sum();
        let i: T = self.im.iter().zip(&other.im).map(|(&a, &b)| a * b).sum();
        r + i
    }

    pub fn frobenius_norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.re
            .iter()
            .chain(&self.im)
            .fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn trace(&self) -> (T, T) {
        let n = self.n;
        (0..n).fold((T::zero(), T::zero()), |(r, i), j| {
            (r + self.re[j * n + j], i + self.im[j * n + j])
        })
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                out.re[k * n + j] = self.re[j * n + k];
                out.im[k * n + j] = -self.im[j * n + k];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|x| x.is_finite())
    }

    /// Largest deviation from the `su(N)` invariants, relative to the
    /// Frobenius norm: `max(‖A + A†‖_F, |Tr A|) / ‖A‖_F` (0 for the zero
    /// matrix).
    pub fn su_defect(&self) -> T {
        let norm = self.frobenius_norm();
        if norm == T::zero() {
            return T::zero();
        }
        let n = self.n;
        let mut herm = T::zero();
        for j in 0..n {
            for k in 0..n {
                let dr = self.re[j * n + k] + self.re[k * n + j];
                let di = self.im[j * n + k] - self.im[k * n + j];
                herm += dr * dr + di * di;
            }
        }
        let (tr, ti) = self.trace();
        herm.sqrt().max((tr * tr + ti * ti).sqrt()) / norm
    }

    /// General complex product `self * other` (four real products).
    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let nn = n * n;
        let mut rr = vec![T::zero(); nn];
        let mut ii = vec![T::zero(); nn];
        let mut ri = vec![T::zero(); nn];
        let mut ir = vec![T::zero(); nn];
        T::gemm(n, n, n, &self.re, &other.re, &mut rr);
        T::gemm(n, n, n, &self.im, &other.im, &mut ii);
        T::gemm(n, n, n, &self.re, &other.im, &mut ri);
        T::gemm(n, n, n, &self.im, &other.re, &mut ir);
        for (a, b) in rr.iter_mut().zip(&ii) {
            *a -= *b;
        }
        for (a, b) in ri.iter_mut().zip(&ir) {
            *a += *b;
        }
        Self { n, re: rr, im: ri }
    }

    /// General commutator `AB − BA`.
    pub fn commutator_general(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Commutator of two skew-Hermitian matrices using four real products.
    ///
    /// With `A = Ar + i Ai`, `B = Br + i Bi` (`Ar, Br` antisymmetric,
    /// `Ai, Bi` symmetric):
    /// `Re[A,B] = (X − Xᵀ) − (Y − Yᵀ)` with `X = Ar Br`, `Y = Ai Bi`, and
    /// `Im[A,B] = (Z + Zᵀ) + (U + Uᵀ)` with `Z = Ar Bi`, `U = Ai Br`.
    /// The output is skew-Hermitian by construction and trace-free up to
    /// round-off.
    pub fn skew_commutator(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let nn = n * n;
        let mut x = vec![T::zero(); nn];
        let mut y = vec![T::zero(); nn];
        let mut z = vec![T::zero(); nn];
        let mut u = vec![T::zero(); nn];
        T::gemm(n, n, n, &self.re, &other.re, &mut x);
        T::gemm(n, n, n, &self.im, &other.im, &mut y);
        T::gemm(n, n, n, &self.re, &other.im, &mut z);
        T::gemm(n, n, n, &self.im, &other.re, &mut u);
        let mut out = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let jk = j * n + k;
                let kj = k * n + j;
                out.re[jk] = (x[jk] - x[kj]) - (y[jk] - y[kj]);
                out.im[jk] = (z[jk] + z[kj]) + (u[jk] + u[kj]);
            }
        }
        out
    }

    /// `Tr(Aᵖ)` for `p = 2..=p_max`, as `(re, im)` pairs.
    pub fn power_traces(&self, p_max: usize) -> Vec<(T, T)> {
        let mut out = Vec::new();
        if p_max < 2 {
            return out;
        }
        let mut pow = self.matmul(self);
        out.push(pow.trace());
        for _ in 3..=p_max {
            pow = pow.matmul(self);
            out.push(pow.trace());
        }
        out
    }

    /// Hermitian-part removal and trace removal: `(A − A†)/2 − (Tr A / N) I`.
    pub fn su_part(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for j in 0..n {
            for k in 0..n {
                let jk = j * n + k;
                let kj = k * n + j;
                out.re[jk] = (self.re[jk] - self.re[kj]) * T::of(0.5);
                out.im[jk] = (self.im[jk] + self.im[kj]) * T::of(0.5);
            }
        }
        let (_, ti) = out.trace();
        let shift = ti / T::of_usize(n);
        for j in 0..n {
            out.im[j * n + j] -= shift;
        }
        out
    }

    /// Largest singular value by power iteration on `A†A`.
    ///
    /// Stops when the relative change of the Rayleigh quotient drops below
    /// `tol` or after `max_iter` sweeps.
    pub fn operator_norm(&self, tol: T, max_iter: usize) -> T {
        let n = self.n;
        if self.max_abs() == T::zero() {
            return T::zero();
        }
        // fixed, non-symmetric start vector keeps the result reproducible
        let mut vr: Vec<T> = (0..n).map(|j| T::one() + T::of(0.01 * j as f64)).collect();
        let mut vi: Vec<T> = (0..n).map(|j| T::of(0.003 * ((j * 7) % 11) as f64)).collect();
        normalize(&mut vr, &mut vi);
        let adj = self.adjoint();
        let mut sigma2 = T::zero();
        for _ in 0..max_iter {
            let (ar, ai) = self.matvec(&vr, &vi);
            let (br, bi) = adj.matvec(&ar, &ai);
            let rq: T = br
                .iter()
                .zip(&vr)
                .map(|(&a, &b)| a * b)
                .chain(bi.iter().zip(&vi).map(|(&a, &b)| a * b))
                .sum();
            vr = br;
            vi = bi;
            let norm = normalize(&mut vr, &mut vi);
            if norm == T::zero() {
                return T::zero();
            }
            let converged = (rq - sigma2).abs() <= tol * rq.abs();
            sigma2 = rq;
            if converged {
                break;
            }
        }
        sigma2.max(T::zero()).sqrt()
    }

    fn matvec(&self, vr: &[T], vi: &[T]) -> (Vec<T>, Vec<T>) {
        let n = self.n;
        let mut or = vec![T::zero(); n];
        let mut oi = vec![T::zero(); n];
        for j in 0..n {
            let row_r = &self.re[j * n..(j + 1) * n];
            let row_i = &self.im[j * n..(j + 1) * n];
            let mut sr = T::zero();
            let mut si = T::zero();
            for k in 0..n {
                sr += row_r[k] * vr[k] - row_i[k] * vi[k];
                si += row_r[k] * vi[k] + row_i[k] * vr[k];
            }
            or[j] = sr;
            oi[j] = si;
        }
        (or, oi)
    }

    /// Number of leading off-diagonals containing nonzero entries
    /// (0 for a diagonal matrix).
    pub fn bandwidth(&self) -> usize {
        let n = self.n;
        let mut band = 0;
        for j in 0..n {
            for k in 0..n {
                let i = j * n + k;
                if self.re[i] != T::zero() || self.im[i] != T::zero() {
                    band = band.max(j.abs_diff(k));
                }
            }
        }
        band
    }

    /// Lossless (for f64) conversion to `f64` storage.
    pub fn to_f64(&self) -> ZMatrix<f64> {
        ZMatrix {
            n: self.n,
            re: self.re.iter().map(|x| x.to_f64_lossy()).collect(),
            im: self.im.iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    pub fn from_f64(m: &ZMatrix<f64>) -> Self {
        ZMatrix {
            n: m.n,
            re: m.re.iter().map(|&x| T::of(x)).collect(),
            im: m.im.iter().map(|&x| T::of(x)).collect(),
        }
    }
}

fn normalize<T: Real>(vr: &mut [T], vi: &mut [T]) -> T {
    let norm = vr
        .iter()
        .chain(vi.iter())
        .map(|&x| x * x)
        .sum::<T>()
        .sqrt();
    if norm > T::zero() {
        for x in vr.iter_mut().chain(vi.iter_mut()) {
            *x /= norm;
        }
    }
    norm
}
