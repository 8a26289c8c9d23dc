//! Reference computations written independently of the library kernels.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use pseudobound::linalg::{c64, CMatrix, CVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `e^{tM}` by a Taylor series on `tM/2^s` followed by `s` squarings.
pub fn taylor_expm(m: &CMatrix, t: f64) -> CMatrix {
    let n = m.nrows();
    let scaled = m * c64(t, 0.0);
    let norm1 = (0..n).map(|j| scaled.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let a = scaled * c64(0.5f64.powi(s), 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &a * c64(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Largest singular value through the eigenvalues of `M*M`.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let h = DMatrix::from_fn(2 * g.nrows(), 2 * g.ncols(), |i, j| {
        let (n, r, c) = (g.nrows(), i % g.nrows(), j % g.ncols());
        let z = g[(r, c)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    h.symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Classical RK4 for `x' = Mx` with `steps` equal steps of size `h`,
/// recording every state.
pub fn rk4_linear(m: &CMatrix, x0: &CVector, h: f64, steps: usize) -> Vec<CVector> {
    let mut out = vec![x0.clone()];
    let mut x = x0.clone();
    let hc = c64(h, 0.0);
    for _ in 0..steps {
        let k1 = m * &x;
        let k2 = m * (&x + &k1 * (hc * 0.5));
        let k3 = m * (&x + &k2 * (hc * 0.5));
        let k4 = m * (&x + &k3 * hc);
        x += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * (hc / 6.0);
        out.push(x.clone());
    }
    out
}

/// `‖y_n‖` for `y_{n+1} = Σ_j A_j y_{n−j}` by direct iteration.
pub fn iterate_recurrence(coeffs: &[CMatrix], initial: &[CVector], steps: usize) -> Vec<f64> {
    let mut history: Vec<CVector> = initial.to_vec();
    let mut norms = vec![history[0].norm()];
    for _ in 0..steps {
        let mut next = CVector::zeros(history[0].len());
        for (a, y) in coeffs.iter().zip(&history) {
            next += a * y;
        }
        history.insert(0, next);
        history.truncate(coeffs.len());
        norms.push(history[0].norm());
    }
    norms
}

/// Roots of a monic polynomial `z^d + c[d-1] z^{d-1} + … + c[0]` by the
/// Durand–Kerner iteration.
pub fn monic_roots(c: &[Complex64]) -> Vec<Complex64> {
    let d = c.len();
    let p = |z: Complex64| c.iter().rev().fold(Complex64::new(1.0, 0.0), |acc, &ck| acc * z + ck);
    let mut roots: Vec<Complex64> = (0..d).map(|k| Complex64::new(0.4, 0.9).powu(k as u32) * 10.0).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..d {
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, r) in prev.iter().enumerate() {
                if j != i {
                    denom *= roots[i] - r;
                }
            }
            let step = p(roots[i]) / denom;
            roots[i] -= step;
        }
    }
    roots
}

/// Stable nonnormal matrices: random upper triangular part over a diagonal
/// in `[−3, −1.2]`, rotated by a random orthogonal similarity.
pub fn random_stable_nonnormal(n: usize, count: usize, seed: u64) -> Vec<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut t = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                t[(i, i)] = rng.gen_range(-3.0..-1.2);
                for j in i + 1..n {
                    t[(i, j)] = rng.gen_range(-4.0..4.0);
                }
            }
            let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let q = g.qr().q();
            let m = &q * t * q.transpose();
            m.map(|x| c64(x, 0.0))
        })
        .collect()
}

/// `u(t)` on `[0, 2]` for `u' = −u − u(t−1)/2` with `φ ≡ 1`, by the method
/// of steps in closed form.
pub fn scalar_dde_exact(t: f64) -> f64 {
    let e = std::f64::consts::E;
    if t <= 1.0 {
        -0.5 + 1.5 * (-t).exp()
    } else {
        0.25 + (1.5 - 0.75 * e) * (-t).exp() - 0.75 * (t - 1.0) * (-(t - 1.0)).exp()
    }
}
