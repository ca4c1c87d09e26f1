//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zeitlin::ZMatrix;

type C = Complex<f64>;

/// Spin-`(n−1)/2` generators `S_1, S_2, S_3` with `[S_1, S_2] = i S_3`.
pub fn spin_matrices(n: usize) -> [DMatrix<C>; 3] {
    let s = (n as f64 - 1.0) / 2.0;
    let mut sp = DMatrix::<C>::zeros(n, n);
    let mut s3 = DMatrix::<C>::zeros(n, n);
    for a in 0..n {
        let ma = s - a as f64;
        s3[(a, a)] = C::new(ma, 0.0);
        if a > 0 {
            // S_+ |m⟩ = sqrt(s(s+1) − m(m+1)) |m+1⟩; basis index a ↔ m = s − a
            let mb = s - a as f64;
            sp[(a - 1, a)] = C::new((s * (s + 1.0) - mb * (mb + 1.0)).sqrt(), 0.0);
        }
    }
    let sm = sp.adjoint();
    let s1 = (&sp + &sm) * C::new(0.5, 0.0);
    let s2 = (&sp - &sm) * C::new(0.0, -0.5);
    [s1, s2, s3]
}

/// Dense `n²×n²` matrix of `W ↦ −Σ_a [S_a, [S_a, W]]` on the matrix units
/// `E_jk` (column index `j·n + k`). Real and symmetric.
pub fn dense_casimir_operator(n: usize) -> DMatrix<f64> {
    let spins = spin_matrices(n);
    let mut op = DMatrix::<f64>::zeros(n * n, n * n);
    for j in 0..n {
        for k in 0..n {
            let mut e = DMatrix::<C>::zeros(n, n);
            e[(j, k)] = C::new(1.0, 0.0);
            let mut img = DMatrix::<C>::zeros(n, n);
            for s in &spins {
                let inner = s * &e - &e * s;
                img -= s * &inner - &inner * s;
            }
            for a in 0..n {
                for b in 0..n {
                    assert!(img[(a, b)].im.abs() < 1e-12);
                    op[(a * n + b, j * n + k)] = img[(a, b)].re;
                }
            }
        }
    }
    op
}

pub fn dense_eigenvalues(n: usize) -> Vec<f64> {
    let op = dense_casimir_operator(n);
    let mut vals: Vec<f64> = SymmetricEigen::new(op).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// Applies the dense operator to a complex matrix (real and imaginary
/// parts separately; the operator is real).
pub fn dense_apply(op: &DMatrix<f64>, w: &ZMatrix<f64>) -> ZMatrix<f64> {
    let n = w.n();
    let re = op * nalgebra::DVector::from_column_slice(w.re());
    let im = op * nalgebra::DVector::from_column_slice(w.im());
    ZMatrix::from_parts(n, re.as_slice().to_vec(), im.as_slice().to_vec()).unwrap()
}

/// Expected multiset `{−l(l+1)}` with multiplicity `2l+1`, sorted descending.
pub fn expected_spectrum(n: usize) -> Vec<f64> {
    let mut v = Vec::new();
    for l in 0..n {
        for _ in 0..2 * l + 1 {
            v.push(-((l * (l + 1)) as f64));
        }
    }
    v
}

/// Random skew-Hermitian trace-free matrix.
pub fn random_su(n: usize, seed: u64) -> ZMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let re = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let im = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ZMatrix::from_parts(n, re, im).unwrap().su_part()
}

/// Random matrix in the span of modes `l ≤ l_bar`.
pub fn random_large(basis: &zeitlin::Basis, l_bar: usize, seed: u64) -> ZMatrix<f64> {
    basis
        .project_large(&random_su(basis.n(), seed), l_bar)
        .unwrap()
}

pub fn to_dense(w: &ZMatrix<f64>) -> DMatrix<C> {
    let n = w.n();
    DMatrix::from_fn(n, n, |i, j| {
        let (re, im) = w.get(i, j);
        C::new(re, im)
    })
}

pub fn from_dense(a: &DMatrix<C>) -> ZMatrix<f64> {
    let n = a.nrows();
    let mut out = ZMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, (a[(i, j)].re, a[(i, j)].im));
        }
    }
    out
}

/// Dense commutator `ab − ba` computed with nalgebra.
pub fn dense_commutator(a: &ZMatrix<f64>, b: &ZMatrix<f64>) -> ZMatrix<f64> {
    let (a, b) = (to_dense(a), to_dense(b));
    from_dense(&(&a * &b - &b * &a))
}
