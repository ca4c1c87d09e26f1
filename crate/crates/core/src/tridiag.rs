//! Real symmetric tridiagonal matrices: implicit QL eigen-decomposition and
//! an `LDLᵀ` solver for the definite case.

use crate::scalar::Real;

/// Symmetric tridiagonal matrix given by its diagonal and first
/// off-diagonal (`off[i]` couples rows `i` and `i + 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiag<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

/// Eigenpairs sorted by decreasing eigenvalue; `vectors[k]` belongs to
/// `values[k]`.
#[derive(Clone, Debug)]
pub struct TridiagEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Real> SymTridiag<T> {
    pub fn new(diag: Vec<T>, off: Vec<T>) -> Self {
        assert!(
            diag.is_empty() && off.is_empty() || off.len() + 1 == diag.len(),
            "off-diagonal length must be n - 1"
        );
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Full eigen-decomposition by implicit QL with Wilkinson shifts.
    ///
    /// Eigenvectors are normalized and signed so that their first entry of
    /// non-negligible magnitude is positive.
    pub fn eigen(&self) -> TridiagEigen<T> {
        let n = self.len();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(T::zero());
        // rows of `z` are the eigenvectors
        let mut z = vec![T::zero(); n * n];
        for i in 0..n {
            z[i * n + i] = T::one();
        }
        let two = T::of(2.0);
        for l in 0..n {
            let mut iter = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= T::EPS * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iter += 1;
                assert!(iter <= 200, "tridiagonal QL failed to converge");
                let mut g = (d[l + 1] - d[l]) / (two * e[l]);
                let mut r = g.hypot(T::one());
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
                let mut i = m;
                let mut deflated = false;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == T::zero() {
                        d[i + 1] -= p;
                        e[m] = T::zero();
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + two * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    let (head, tail) = z.split_at_mut((i + 1) * n);
                    let zi = &mut head[i * n..];
                    let zi1 = &mut tail[..n];
                    for k in 0..n {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = T::zero();
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).expect("finite eigenvalues"));
        let values = order.iter().map(|&k| d[k]).collect();
        let vectors = order
            .iter()
            .map(|&k| {
                let mut v = z[k * n..(k + 1) * n].to_vec();
                fix_sign(&mut v);
                v
            })
            .collect();
        TridiagEigen { values, vectors }
    }

    /// `LDLᵀ` factorization without pivoting. Valid for definite matrices.
    pub fn ldl(&self) -> Ldl<T> {
        let n = self.len();
        let mut d = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n.saturating_sub(1));
        if n == 0 {
            return Ldl { d, l };
        }
        d.push(self.diag[0]);
        for i in 0..n - 1 {
            let li = self.off[i] / d[i];
            l.push(li);
            d.push(self.diag[i + 1] - li * self.off[i]);
        }
        Ldl { d, l }
    }
}

/// Sign convention: the first entry whose magnitude exceeds `√ε · max|v|`
/// is made positive.
fn fix_sign<T: Real>(v: &mut [T]) {
    let vmax = v.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    let thresh = T::EPS.sqrt() * vmax;
    if let Some(first) = v.iter().find(|x| x.abs() > thresh) {
        if *first < T::zero() {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Factor `A = L D Lᵀ` of a symmetric tridiagonal matrix.
#[derive(Clone, Debug)]
pub struct Ldl<T> {
    d: Vec<T>,
    l: Vec<T>,
}

impl<T: Real> Ldl<T> {
    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let n = self.d.len();
        debug_assert_eq!(x.len(), n);
        for i in 1..n {
            let prev = x[i - 1];
            x[i] -= self.l[i - 1] * prev;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let next = x[i + 1];
            x[i] -= self.l[i] * next;
        }
    }
}
