//! Real orthonormal spherical harmonics on Gauss–Legendre × uniform
//! longitude grids, the continuous Poisson bracket, and the check that the
//! matrix commutator approximates it under quantization.
//!
//! Conventions: `θ` is colatitude, `φ` longitude, `x = cos θ`.
//! `Y_l0 = P̄_l⁰(x)`, `Y_lm = √2 P̄_l^m(x) cos(mφ)` and
//! `Y_l,−m = √2 P̄_l^m(x) sin(mφ)` for `m > 0`, where `P̄` carries the
//! `4π`-normalization and the Condon–Shortley phase.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{BasisCache, CoeffField};

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes in decreasing
/// order (north to south).
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (
        nodes.into_iter().map(T::of).collect(),
        weights.into_iter().map(T::of).collect(),
    )
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Normalized associated Legendre functions `P̄_l^m(x)` for `0 ≤ m ≤ l ≤
/// l_max`, stored at `[l (l+1)/2 + m]`.
pub fn legendre_table<T: Real>(l_max: usize, x: T) -> Vec<T> {
    let mut p = vec![T::zero(); (l_max + 1) * (l_max + 2) / 2];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let sin_t = (T::one() - x * x).max(T::zero()).sqrt();
    p[0] = (T::one() / (T::of(4.0) * T::PI())).sqrt();
    for m in 1..=l_max {
        let f = T::of(((2 * m + 1) as f64 / (2 * m) as f64).sqrt());
        p[idx(m, m)] = -f * sin_t * p[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        p[idx(m + 1, m)] = T::of(((2 * m + 3) as f64).sqrt()) * x * p[idx(m, m)];
    }
    for m in 0..=l_max {
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[idx(l, m)] = T::of(a) * (x * p[idx(l - 1, m)] - T::of(b) * p[idx(l - 2, m)]);
        }
    }
    p
}

/// Values on a product grid, row-major in (`θ`, `φ`).
#[derive(Clone, Debug)]
pub struct SphereGrid<T> {
    pub theta: Vec<T>,
    pub phi: Vec<T>,
    /// Gauss–Legendre weights, one per `θ` row.
    pub weights: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> SphereGrid<T> {
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.phi.len() + j]
    }

    /// `∫ f g dΩ` by the grid quadrature.
    pub fn integrate_product(&self, other: &SphereGrid<T>) -> T {
        let dphi = T::of(2.0) * T::PI() / T::of_usize(self.n_phi());
        let np = self.n_phi();
        (0..self.n_theta())
            .map(|i| {
                let row: T = (0..np)
                    .map(|j| self.values[i * np + j] * other.values[i * np + j])
                    .sum();
                row * self.weights[i] * dphi
            })
            .sum()
    }
}

/// Field and its `θ`/`φ` derivatives on a grid.
struct FieldDerivs<T> {
    f: Vec<T>,
    d_theta: Vec<T>,
    d_phi: Vec<T>,
}

fn check_grid(l_max: usize, n_theta: usize, n_phi: usize) -> Result<()> {
    if n_theta < l_max + 1 {
        return Err(Error::Quadrature(format!(
            "{n_theta} latitudes cannot resolve degree {l_max} (need {})",
            l_max + 1
        )));
    }
    if n_phi < 2 * l_max + 1 {
        return Err(Error::Quadrature(format!(
            "{n_phi} longitudes cannot resolve degree {l_max} (need {})",
            2 * l_max + 1
        )));
    }
    Ok(())
}

fn grid_axes<T: Real>(n_theta: usize, n_phi: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (x, w) = gauss_legendre::<T>(n_theta);
    let theta = x.iter().map(|&x| x.acos()).collect();
    let phi = (0..n_phi)
        .map(|j| T::of(2.0) * T::PI() * T::of_usize(j) / T::of_usize(n_phi))
        .collect();
    (theta, w, phi)
}

fn evaluate_with_derivs<T: Real>(
    c: &CoeffField<T>,
    theta: &[T],
    phi: &[T],
) -> FieldDerivs<T> {
    let l_max = c.l_max();
    let (nt, np) = (theta.len(), phi.len());
    let mut f = vec![T::zero(); nt * np];
    let mut d_theta = vec![T::zero(); nt * np];
    let mut d_phi = vec![T::zero(); nt * np];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let sqrt2 = T::SQRT_2();
    for (i, &th) in theta.iter().enumerate() {
        let x = th.cos();
        let s = th.sin();
        let p = legendre_table(l_max, x);
        // dP̄_l^m/dθ = (l x P̄_l^m − sqrt((2l+1)(l²−m²)/(2l−1)) P̄_{l−1}^m) / sin θ
        let dp = |l: usize, m: usize| -> T {
            let lf = l as f64;
            let mf = m as f64;
            let prev = if l > m {
                T::of(((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt())
                    * p[idx(l - 1, m)]
            } else {
                T::zero()
            };
            (T::of(lf) * x * p[idx(l, m)] - prev) / s
        };
        for (j, &ph) in phi.iter().enumerate() {
            let mut fv = T::zero();
            let mut ft = T::zero();
            let mut fp = T::zero();
            for l in 1..=l_max {
                fv += c.get(l, 0) * p[idx(l, 0)];
                ft += c.get(l, 0) * dp(l, 0);
                for m in 1..=l {
                    let mf = T::of_usize(m);
                    let (sn, cs) = (mf * ph).sin_cos();
                    let a = c.get(l, m as i64) * sqrt2;
                    let b = c.get(l, -(m as i64)) * sqrt2;
                    let pv = p[idx(l, m)];
                    let dv = dp(l, m);
                    fv += pv * (a * cs + b * sn);
                    ft += dv * (a * cs + b * sn);
                    fp += pv * mf * (b * cs - a * sn);
                }
            }
            f[i * np + j] = fv;
            d_theta[i * np + j] = ft;
            d_phi[i * np + j] = fp;
        }
    }
    FieldDerivs { f, d_theta, d_phi }
}

/// Evaluates `Σ ω^{lm} Y_lm` on an `n_theta × n_phi` Gauss–Legendre ×
/// uniform-longitude grid.
pub fn sph_evaluate<T: Real>(c: &CoeffField<T>, n_theta: usize, n_phi: usize) -> Result<SphereGrid<T>> {
    check_grid(c.l_max(), n_theta, n_phi)?;
    let (theta, weights, phi) = grid_axes::<T>(n_theta, n_phi);
    let values = evaluate_with_derivs(c, &theta, &phi).f;
    Ok(SphereGrid {
        theta,
        phi,
        weights,
        values,
    })
}

/// Projects grid values onto `Y_lm`, `1 ≤ l ≤ l_max`, by quadrature.
/// Exact for data of degree at most `l_max` when `n_theta ≥ l_max + 1` and
/// `n_phi ≥ 2 l_max + 1`.
pub fn sph_analyze<T: Real>(grid: &SphereGrid<T>, n: usize, l_max: usize) -> Result<CoeffField<T>> {
    check_grid(l_max, grid.n_theta(), grid.n_phi())?;
    let np = grid.n_phi();
    let dphi = T::of(2.0) * T::PI() / T::of_usize(np);
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let sqrt2 = T::SQRT_2();
    let mut c = CoeffField::zeros(n, l_max);
    for (i, &th) in grid.theta.iter().enumerate() {
        let p = legendre_table(l_max, th.cos());
        let row = &grid.values[i * np..(i + 1) * np];
        let wq = grid.weights[i] * dphi;
        // Fourier sums of this latitude row
        for m in 0..=l_max {
            let mf = T::of_usize(m);
            let (mut cs, mut sn) = (T::zero(), T::zero());
            for (j, &v) in row.iter().enumerate() {
                let (s, co) = (mf * grid.phi[j]).sin_cos();
                cs += v * co;
                sn += v * s;
            }
            for l in m.max(1)..=l_max {
                let pv = p[idx(l, m)] * wq;
                if m == 0 {
                    c.set(l, 0, c.get(l, 0) + pv * cs);
                } else {
                    c.set(l, m as i64, c.get(l, m as i64) + pv * sqrt2 * cs);
                    c.set(l, -(m as i64), c.get(l, -(m as i64)) + pv * sqrt2 * sn);
                }
            }
        }
    }
    Ok(c)
}

/// Spherical-harmonic coefficients of `{ψ, ω} = ∇ψ · ∇⊥ω`,
/// `∇⊥ = r̂ × ∇`, i.e. `(∂_φψ ∂_θω − ∂_θψ ∂_φω) / sin θ`.
///
/// The bracket of fields of degrees `l_ψ`, `l_ω` has degree at most
/// `l_ψ + l_ω − 1`; the grid must resolve it exactly.
pub fn poisson_bracket_coeffs<T: Real>(
    psi: &CoeffField<T>,
    omega: &CoeffField<T>,
    n_theta: usize,
    n_phi: usize,
) -> Result<CoeffField<T>> {
    let l_out = (psi.l_max() + omega.l_max()).saturating_sub(1).max(1);
    check_grid(l_out, n_theta, n_phi)?;
    let (theta, weights, phi) = grid_axes::<T>(n_theta, n_phi);
    let a = evaluate_with_derivs(psi, &theta, &phi);
    let b = evaluate_with_derivs(omega, &theta, &phi);
    let np = phi.len();
    let mut values = vec![T::zero(); theta.len() * np];
    for (i, &th) in theta.iter().enumerate() {
        let s = th.sin();
        for j in 0..np {
            let k = i * np + j;
            values[k] = (a.d_phi[k] * b.d_theta[k] - a.d_theta[k] * b.d_phi[k]) / s;
        }
    }
    let grid = SphereGrid {
        theta,
        phi,
        weights,
        values,
    };
    sph_analyze(&grid, psi.n(), l_out)
}

/// Operator-norm discrepancy `‖p_N{ψ,ω} − N^{3/2}[p_Nψ, p_Nω]‖` for each
/// `N` in `n_list`, where `p_N` maps `Y_lm ↦ T_lm` (degrees above `N−1` are
/// dropped).
///
/// The bracket is computed on a Gauss–Legendre grid with
/// `2·l_bracket + 2` latitudes and `4·l_max` (at least `2·l_bracket + 1`)
/// longitudes, which integrates it exactly.
pub fn bracket_consistency<T: Real>(
    psi: &CoeffField<T>,
    omega: &CoeffField<T>,
    n_list: &[usize],
) -> Result<Vec<T>> {
    bracket_sweep(psi, omega, n_list, T::one(), false)
}

/// Constant `κ = 1/(4√π)` with `p_N{ψ,ω} ≈ κ N^{3/2} [p_Nψ, p_Nω]` for the
/// Frobenius-orthonormal basis.
pub fn bracket_constant<T: Real>() -> T {
    T::one() / (T::of(4.0) * T::PI().sqrt())
}

/// Relative discrepancy `‖p_N{ψ,ω} − κ N^{3/2}[p_Nψ, p_Nω]‖ / ‖p_N{ψ,ω}‖`
/// (operator norms) with `κ` from [`bracket_constant`]. Tends to zero as
/// `N` grows; `0` when the bracket vanishes identically.
pub fn bracket_consistency_relative<T: Real>(
    psi: &CoeffField<T>,
    omega: &CoeffField<T>,
    n_list: &[usize],
) -> Result<Vec<T>> {
    bracket_sweep(psi, omega, n_list, bracket_constant(), true)
}

fn bracket_sweep<T: Real>(
    psi: &CoeffField<T>,
    omega: &CoeffField<T>,
    n_list: &[usize],
    kappa: T,
    relative: bool,
) -> Result<Vec<T>> {
    let l_in = psi.l_max().max(omega.l_max());
    let l_bracket = (psi.l_max() + omega.l_max()).saturating_sub(1).max(1);
    let n_theta = 2 * l_bracket + 2;
    let n_phi = (4 * l_in).max(2 * l_bracket + 1);
    let bracket = poisson_bracket_coeffs(psi, omega, n_theta, n_phi)?;
    let tol = T::of(1e-8);
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if n < 2 || l_in > n - 1 {
            return Err(Error::range("l_max", l_in, 1, n.saturating_sub(1)));
        }
        let basis = BasisCache::<T>::build(n)?;
        let p_psi = basis.synthesize(&psi.with_n(n)?)?;
        let p_omega = basis.synthesize(&omega.with_n(n)?)?;
        let p_bracket = basis.synthesize(&truncate(&bracket, n))?;
        let scale = kappa * T::of_usize(n).powf(T::of(1.5));
        let comm = p_psi.skew_commutator(&p_omega).scaled(scale);
        let diff = p_bracket.sub(&comm).operator_norm(tol, 20_000);
        if relative {
            let reference = p_bracket.operator_norm(tol, 20_000);
            out.push(if reference > T::zero() { diff / reference } else { diff });
        } else {
            out.push(diff);
        }
    }
    Ok(out)
}

fn truncate<T: Real>(c: &CoeffField<T>, n: usize) -> CoeffField<T> {
    let l_max = c.l_max().min(n - 1);
    let mut out = CoeffField::zeros(n, l_max);
    for (l, m, v) in c.iter() {
        if l <= l_max {
            out.set(l, m, v);
        }
    }
    out
}
