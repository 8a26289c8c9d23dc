//! Dense complex kernels: LU, extreme singular values, eigenvalues and the
//! matrix exponential.
//!
//! Small matrices go straight to nalgebra's SVD. Larger ones use an LU
//! factorization that skips structurally zero work (banded and tridiagonal
//! inputs factor in near-linear time) combined with a fully reorthogonalized
//! Lanczos iteration.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative tolerance for iterative kernels.
pub const TOL: f64 = 1e-12;

/// Matrices up to this order use a full SVD instead of Lanczos.
pub const DENSE_CUTOFF: usize = 24;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builds a matrix from entries listed row by row, rejecting non-finite values.
pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<CMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("{rows}x{cols} matrix has no entries")));
    }
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{rows}x{cols} matrix needs {} entries, got {}",
            rows * cols,
            entries.len()
        )));
    }
    let m = CMatrix::from_row_slice(rows, cols, entries);
    check_finite(&m)?;
    Ok(m)
}

pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<CMatrix> {
    let data: Vec<C64> = entries.iter().map(|&x| c64(x, 0.0)).collect();
    from_rows(rows, cols, &data)
}

pub fn real_diag(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| c64(x, 0.0))))
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn ensure_square(m: &CMatrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for j in 0..n {
        for i in 0..=j {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// `M M^H = M^H M` to relative tolerance `tol`.
pub fn is_normal(m: &CMatrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let mh = m.adjoint();
    let comm = m * &mh - &mh * m;
    let scale = max_abs(m).powi(2).max(f64::MIN_POSITIVE);
    max_abs(&comm) <= tol * scale * m.nrows() as f64
}

/// Deterministic pseudo-random start vector for Krylov iterations.
fn start_vector(n: usize) -> Vec<C64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v: Vec<C64> = (0..n).map(|_| c64(next(), next())).collect();
    let nrm = vec_norm(&v);
    v.iter_mut().for_each(|z| *z /= nrm);
    v
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Largest eigenvalue of a symmetric tridiagonal matrix by Sturm bisection.
fn tridiag_max_eig(alpha: &[f64], beta: &[f64], lower: f64) -> f64 {
    let k = alpha.len();
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let off = if i > 0 { beta[i - 1].abs() } else { 0.0 }
            + if i + 1 < k { beta[i].abs() } else { 0.0 };
        hi = hi.max(alpha[i] + off);
    }
    let mut lo = lower.min(hi);
    // Count of eigenvalues strictly greater than x.
    let count_above = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..k {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = f64::EPSILON * (x.abs() + 1.0);
            }
            if d > 0.0 {
                count += 1;
            }
        }
        count
    };
    if count_above(lo) == 0 {
        lo = alpha.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * beta.iter().map(|b| b.abs()).sum::<f64>();
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_above(mid) > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator of order
/// `n`, given only its action, by Lanczos with full reorthogonalization.
pub fn lanczos_max_eig(n: usize, mut apply: impl FnMut(&[C64], &mut [C64])) -> f64 {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut q = start_vector(n);
    let mut w = vec![C64::default(); n];
    let mut theta = 0.0_f64;
    let mut calm_steps = 0;
    for k in 0..n {
        apply(&q, &mut w);
        let a = dot(&q, &w).re;
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= qi * a;
        }
        if k > 0 {
            let b = beta[k - 1];
            for (wi, pi) in w.iter_mut().zip(&basis[k - 1]) {
                *wi -= pi * b;
            }
        }
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let h = dot(v, &w);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= vi * h;
                }
            }
        }
        alpha.push(a);
        let b = vec_norm(&w);
        let next = tridiag_max_eig(&alpha, &beta, theta);
        let settled = (next - theta).abs() <= 1e-14 * next.abs();
        theta = next;
        calm_steps = if settled { calm_steps + 1 } else { 0 };
        if calm_steps >= 2 || b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        beta.push(b);
        for (qi, wi) in q.iter_mut().zip(&w) {
            *qi = wi / b;
        }
    }
    theta
}

/// LU factorization with partial pivoting, `P A = L U`, stored column-major.
///
/// Multipliers that are exactly zero and pivot-row entries that are exactly
/// zero are skipped, and the extent of each column of `L` and `U` is
/// recorded, so structured inputs (tridiagonal, block companion) factor and
/// solve far below the dense cost.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    a: Vec<C64>,
    pivots: Vec<usize>,
    lower_end: Vec<usize>,
    upper_start: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl Lu {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let n = ensure_square(m, "LU input")?;
        let mut a: Vec<C64> = m.as_slice().to_vec();
        let mut pivots = vec![0; n];
        let mut lower_end = vec![0; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0_f64;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k + k * n].norm();
            for i in k + 1..n {
                let v = a[i + k * n].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            pivots[k] = p;
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            if p != k {
                for j in 0..n {
                    a.swap(k + j * n, p + j * n);
                }
            }
            lower_end[k] = k + 1;
            if best == 0.0 {
                continue;
            }
            let pivot = a[k + k * n];
            for i in k + 1..n {
                if a[i + k * n] != C64::default() {
                    a[i + k * n] /= pivot;
                    lower_end[k] = i + 1;
                }
            }
            let end = lower_end[k];
            if end == k + 1 {
                continue;
            }
            for j in k + 1..n {
                let akj = a[k + j * n];
                if akj == C64::default() {
                    continue;
                }
                let (left, right) = a.split_at_mut(j * n);
                let lcol = &left[k * n..k * n + n];
                let col = &mut right[..n];
                for i in k + 1..end {
                    col[i] -= lcol[i] * akj;
                }
            }
        }
        let upper_start = (0..n)
            .map(|j| (0..=j).find(|&i| a[i + j * n] != C64::default()).unwrap_or(j))
            .collect();
        Ok(Self { n, a, pivots, lower_end, upper_start, min_pivot, max_pivot })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// True when some pivot is exactly zero.
    pub fn has_zero_pivot(&self) -> bool {
        self.min_pivot == 0.0
    }

    /// Ratio of smallest to largest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        if self.max_pivot == 0.0 {
            0.0
        } else {
            self.min_pivot / self.max_pivot
        }
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for k in 0..n {
            b.swap(k, self.pivots[k]);
        }
        for k in 0..n {
            let yk = b[k];
            if yk == C64::default() {
                continue;
            }
            let col = &self.a[k * n..k * n + n];
            for i in k + 1..self.lower_end[k] {
                b[i] -= col[i] * yk;
            }
        }
        for k in (0..n).rev() {
            let col = &self.a[k * n..k * n + n];
            b[k] /= col[k];
            let xk = b[k];
            if xk == C64::default() {
                continue;
            }
            for i in self.upper_start[k]..k {
                b[i] -= col[i] * xk;
            }
        }
    }

    /// Overwrites `b` with `A^{-H} b`.
    pub fn solve_adjoint_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        for k in 0..n {
            let col = &self.a[k * n..k * n + n];
            let mut s = b[k];
            for i in self.upper_start[k]..k {
                s -= col[i].conj() * b[i];
            }
            b[k] = s / col[k].conj();
        }
        for k in (0..n).rev() {
            let col = &self.a[k * n..k * n + n];
            let mut s = b[k];
            for i in k + 1..self.lower_end[k] {
                s -= col[i].conj() * b[i];
            }
            b[k] = s;
        }
        for k in (0..n).rev() {
            b.swap(k, self.pivots[k]);
        }
    }

    pub fn solve_matrix(&self, rhs: &CMatrix) -> CMatrix {
        let mut x = rhs.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        x
    }

    pub fn inverse(&self) -> CMatrix {
        self.solve_matrix(&CMatrix::identity(self.n, self.n))
    }
}

fn singular_values(m: &CMatrix) -> DVector<f64> {
    SVD::new(m.clone(), false, false).singular_values
}

/// Smallest singular value of a square matrix.
pub fn sigma_min(m: &CMatrix) -> Result<f64> {
    let n = ensure_square(m, "sigma_min input")?;
    if n == 1 {
        return Ok(m[(0, 0)].norm());
    }
    if n <= DENSE_CUTOFF {
        return Ok(singular_values(m).min());
    }
    let lu = Lu::new(m)?;
    Ok(sigma_min_from_lu(&lu))
}

/// Smallest singular value of the factored matrix.
pub fn sigma_min_from_lu(lu: &Lu) -> f64 {
    if lu.has_zero_pivot() {
        return 0.0;
    }
    let lambda = lanczos_max_eig(lu.order(), |x, y| {
        y.copy_from_slice(x);
        lu.solve_adjoint_in_place(y);
        lu.solve_in_place(y);
    });
    if lambda.is_finite() && lambda > 0.0 {
        1.0 / lambda.sqrt()
    } else {
        0.0
    }
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMatrix) -> f64 {
    let (r, c) = m.shape();
    if r != c || r <= DENSE_CUTOFF {
        return singular_values(m).max();
    }
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let mut t = CVector::zeros(r);
    let lambda = lanczos_max_eig(r, |x, y| {
        let xv = nalgebra::DVectorView::from_slice(x, r);
        t.gemv(one, m, &xv, zero);
        let mut yv = nalgebra::DVectorViewMut::from_slice(y, r);
        yv.gemv_ad(one, m, &t, zero);
    });
    lambda.max(0.0).sqrt()
}

/// Spectral norm of a square operator known through its action and the
/// action of its adjoint.
pub fn operator_norm2(
    n: usize,
    apply: impl Fn(&[C64], &mut [C64]),
    apply_adjoint: impl Fn(&[C64], &mut [C64]),
) -> f64 {
    let mut tmp = vec![C64::default(); n];
    let lambda = lanczos_max_eig(n, |x, y| {
        apply(x, &mut tmp);
        apply_adjoint(&tmp, y);
    });
    lambda.max(0.0).sqrt()
}

/// 2-norm condition number `σ_max / σ_min`; infinite for singular input.
pub fn cond2(m: &CMatrix) -> Result<f64> {
    ensure_square(m, "cond2 input")?;
    let s = singular_values(m);
    let lo = s.min();
    Ok(if lo == 0.0 { f64::INFINITY } else { s.max() / lo })
}

/// Solves `m x = rhs`.
pub fn solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(m, "system matrix")?;
    if rhs.nrows() != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, system has order {n}",
            rhs.nrows()
        )));
    }
    let lu = Lu::new(m)?;
    if lu.pivot_ratio() <= n as f64 * f64::EPSILON {
        return Err(Error::Singular { pivot: lu.min_pivot });
    }
    Ok(lu.solve_matrix(rhs))
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(m, "matrix")?;
    solve(m, &CMatrix::identity(n, n))
}

/// Eigenvalues with multiplicity.
pub fn eig(m: &CMatrix) -> Result<Vec<C64>> {
    let n = ensure_square(m, "eig input")?;
    check_finite(m)?;
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let max_iter = 200 * n;
    if is_hermitian(m, 1e-14) {
        let se = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
            .ok_or(Error::NoConvergence { what: "Hermitian eigensolver", residual: f64::NAN })?;
        return Ok(se.eigenvalues.iter().map(|&x| c64(x, 0.0)).collect());
    }
    if is_real(m) {
        let real = m.map(|z| z.re);
        return real_eigenvalues(real);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, max_iter)
        .ok_or_else(|| Error::NoConvergence { what: "complex Schur iteration", residual: f64::NAN })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Eigenvalues of a real matrix through the real Schur form.
pub fn real_eigenvalues(m: DMatrix<f64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    let schur = Schur::try_new(m, f64::EPSILON, 200 * n.max(1))
        .ok_or(Error::NoConvergence { what: "real Schur iteration", residual: f64::NAN })?;
    Ok(schur.complex_eigenvalues().iter().cloned().collect())
}

/// Eigenvalues together with unit-norm right eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    /// `‖M V − V Λ‖₂ / ‖M‖₂`.
    pub residual: f64,
}

pub fn eig_vectors(m: &CMatrix) -> Result<EigenDecomposition> {
    let n = ensure_square(m, "eig input")?;
    check_finite(m)?;
    let max_iter = 200 * n;
    let (values, vectors) = if is_hermitian(m, 1e-14) {
        let se = SymmetricEigen::try_new(m.clone(), f64::EPSILON, max_iter)
            .ok_or(Error::NoConvergence { what: "Hermitian eigensolver", residual: f64::NAN })?;
        (se.eigenvalues.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>(), se.eigenvectors)
    } else {
        let schur = Schur::try_new(m.clone(), f64::EPSILON, max_iter)
            .ok_or(Error::NoConvergence { what: "complex Schur iteration", residual: f64::NAN })?;
        let (q, t) = schur.unpack();
        let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let floor = f64::EPSILON * max_abs(&t).max(f64::MIN_POSITIVE);
        let mut x = CMatrix::zeros(n, n);
        for k in 0..n {
            x[(k, k)] = C64::new(1.0, 0.0);
            for i in (0..k).rev() {
                let mut s = C64::default();
                for j in i + 1..=k {
                    s += t[(i, j)] * x[(j, k)];
                }
                let mut den = t[(i, i)] - t[(k, k)];
                if den.norm() < floor {
                    den = C64::new(floor, 0.0);
                }
                x[(i, k)] = -s / den;
            }
        }
        let mut v = q * x;
        for mut col in v.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= C64::new(nrm, 0.0);
            }
        }
        (values, v)
    };
    let lambda = CMatrix::from_diagonal(&CVector::from_vec(values.clone()));
    let scale = norm2(m).max(f64::MIN_POSITIVE);
    let residual = norm2(&(m * &vectors - &vectors * lambda)) / scale;
    Ok(EigenDecomposition { values, vectors, residual })
}

pub fn spectral_abscissa(m: &CMatrix) -> Result<f64> {
    Ok(eig(m)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eig(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn scaled<T: ComplexField<RealField = f64>>(m: &DMatrix<T>, s: f64) -> DMatrix<T> {
    m.map(|x| x * T::from_real(s))
}

fn pade_low<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &[f64]) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let a2 = a * a;
    let mut powers = vec![DMatrix::<T>::identity(n, n), a2.clone()];
    while powers.len() * 2 < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = DMatrix::<T>::zeros(n, n);
    let mut v = DMatrix::<T>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 < b.len() {
            u += scaled(p, b[2 * k + 1]);
        }
        v += scaled(p, b[2 * k]);
    }
    (a * u, v)
}

fn pade13<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let n = a.nrows();
    let b = &PADE13;
    let id = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a * (&a6 * inner_u + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]));
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = &a6 * inner_v + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (u, v)
}

fn expm_generic<T: ComplexField<RealField = f64>>(a: DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let norm = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let coeffs: [&[f64]; 4] = [&PADE3, &PADE5, &PADE7, &PADE9];
    for (i, &(_, theta)) in THETA.iter().enumerate() {
        if norm <= theta {
            let (u, v) = pade_low(&a, coeffs[i]);
            return pade_solve(u, v);
        }
    }
    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let a = scaled(&a, 0.5_f64.powi(s));
    let (u, v) = pade13(&a);
    let mut x = pade_solve(u, v);
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

fn pade_solve<T: ComplexField<RealField = f64>>(u: DMatrix<T>, v: DMatrix<T>) -> DMatrix<T> {
    let num = &v + &u;
    let den = v - u;
    den.lu().solve(&num).expect("Pade denominator is nonsingular within the scaling bounds")
}

/// `e^{t m}` by scaling and squaring with Padé approximants up to degree 13.
pub fn expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    ensure_square(m, "expm input")?;
    if !t.is_finite() {
        return Err(Error::Domain(format!("expm time must be finite, got {t}")));
    }
    if is_real(m) {
        let real = m.map(|z| z.re * t);
        return Ok(expm_generic(real).map(|x| c64(x, 0.0)));
    }
    Ok(expm_generic(m.map(|z| z * t)))
}

/// Logarithmic 2-norm `λ_max((M + M^H)/2)`.
pub fn log_norm(m: &CMatrix) -> Result<f64> {
    ensure_square(m, "log_norm input")?;
    let h = (m + m.adjoint()).map(|z| z * 0.5);
    let se = SymmetricEigen::new(h);
    Ok(se.eigenvalues.max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lcg_matrix(n: usize, seed: u64) -> CMatrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| c64(next(), next()))
    }

    #[test]
    fn sigma_min_small_cases() {
        assert_abs_diff_eq!(sigma_min(&CMatrix::identity(3, 3)).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(sigma_min(&CMatrix::zeros(2, 2)).unwrap(), 0.0);
        let m = lcg_matrix(4, 7);
        let full = SVD::new(m.clone(), true, true);
        assert_abs_diff_eq!(sigma_min(&m).unwrap(), full.singular_values.min(), epsilon = 1e-12);
    }

    #[test]
    fn sigma_min_rejects_rectangular() {
        assert!(matches!(sigma_min(&CMatrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn lanczos_path_matches_svd() {
        for seed in 1..4 {
            let m = lcg_matrix(40, seed);
            let s = SVD::new(m.clone(), false, false).singular_values;
            let lo = sigma_min(&m).unwrap();
            assert!((lo - s.min()).abs() <= 1e-10 * s.min(), "{lo} vs {}", s.min());
            let hi = norm2(&m);
            assert!((hi - s.max()).abs() <= 1e-10 * s.max());
        }
    }

    #[test]
    fn lu_solves_tridiagonal_and_adjoint() {
        let n = 60;
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(-2.0, 0.3)
            } else if i.abs_diff(j) == 1 {
                c64(1.0, -0.1 * i as f64)
            } else {
                C64::default()
            }
        });
        let lu = Lu::new(&m).unwrap();
        let b: Vec<C64> = (0..n).map(|i| c64(i as f64, 1.0)).collect();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let r = &m * CVector::from_vec(x) - CVector::from_vec(b.clone());
        assert!(r.norm() < 1e-10);
        let mut y = b.clone();
        lu.solve_adjoint_in_place(&mut y);
        let r = m.adjoint() * CVector::from_vec(y) - CVector::from_vec(b);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn lu_handles_pivoting_dense() {
        let m = lcg_matrix(30, 11);
        let lu = Lu::new(&m).unwrap();
        let inv = lu.inverse();
        let err = max_abs(&(&m * inv - CMatrix::identity(30, 30)));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn expm_basic_cases() {
        let z = CMatrix::zeros(3, 3);
        assert_eq!(expm(&z, 7.0).unwrap(), CMatrix::identity(3, 3));
        let nil = from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let e = expm(&nil, 1.0).unwrap();
        let expected = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(max_abs(&(e - expected)) < 1e-15);
        let d = real_diag(&[-1.0, -2.0]);
        let e = expm(&d, 2f64.ln()).unwrap();
        assert_abs_diff_eq!(e[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(e[(1, 1)].re, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn expm_large_norm_rotation() {
        let rot = from_real_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        let t = 50.0;
        let e = expm(&rot, t).unwrap();
        assert_abs_diff_eq!(e[(0, 0)].re, t.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(0, 1)].re, t.sin(), epsilon = 1e-12);
    }

    #[test]
    fn eig_small_cases() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c64(1.0, 0.0), c64(2.0, 3.0)]));
        let mut ev = eig(&d).unwrap();
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert_abs_diff_eq!(ev[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].im, 3.0, epsilon = 1e-14);
        let rot = from_real_rows(2, 2, &[0.0, 1.0, -1.0, 0.0]).unwrap();
        let mut ev = eig(&rot).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert_abs_diff_eq!(ev[0].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].im, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenvectors_satisfy_residual() {
        let m = lcg_matrix(12, 3);
        let dec = eig_vectors(&m).unwrap();
        assert!(dec.residual < 1e-12, "{}", dec.residual);
    }

    #[test]
    fn scalar_summaries() {
        let d = real_diag(&[-1.0, -2.0]);
        assert_abs_diff_eq!(spectral_abscissa(&d).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spectral_radius(&d).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cond2(&CMatrix::identity(4, 4)).unwrap(), 1.0, epsilon = 1e-15);
        let m = from_real_rows(2, 2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(norm2(&m), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_rejects_singular() {
        let m = from_real_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(solve(&m, &CMatrix::identity(2, 2)), Err(Error::Singular { .. })));
    }

    #[test]
    fn from_rows_validates() {
        assert!(matches!(from_real_rows(1, 1, &[f64::NAN]), Err(Error::NonFinite { .. })));
        assert!(matches!(from_real_rows(2, 2, &[1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn resolvent_identity() {
        let m = lcg_matrix(6, 5);
        let z = c64(0.3, 2.1);
        let shifted = CMatrix::identity(6, 6).map(|x| x * z) - &m;
        let inv = inverse(&shifted).unwrap();
        let product = sigma_min(&shifted).unwrap() * norm2(&inv);
        assert_abs_diff_eq!(product, 1.0, epsilon = 1e-10);
    }
}
