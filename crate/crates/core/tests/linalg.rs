mod common;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use pseudobound::linalg::{self, c64, CMatrix};

fn complex_matrix(n: usize, entries: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let (re, im) = entries[i * n + j];
        c64(re, im)
    })
}

fn entries(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn expm_matches_taylor_series(e in entries(4), t in 0.0..3.0f64) {
        let m = complex_matrix(4, &e);
        let ours = linalg::expm(&m, t).unwrap();
        let reference = common::taylor_expm(&m, t);
        let scale = common::spectral_norm(&reference).max(1.0);
        prop_assert!(common::spectral_norm(&(ours - reference)) <= 1e-10 * scale);
    }

    #[test]
    fn norm2_matches_gram_eigenvalues(e in entries(5)) {
        let m = complex_matrix(5, &e);
        let oracle = common::spectral_norm(&m);
        prop_assert!((linalg::norm2(&m) - oracle).abs() <= 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn sigma_min_is_reciprocal_inverse_norm(e in entries(4)) {
        let m = complex_matrix(4, &e) + CMatrix::identity(4, 4) * c64(6.0, 0.0);
        let inv = linalg::inverse(&m).unwrap();
        let oracle = 1.0 / common::spectral_norm(&inv);
        prop_assert!((linalg::sigma_min(&m).unwrap() - oracle).abs() <= 1e-9 * oracle);
    }

    #[test]
    fn real_spectra_close_under_conjugation(e in prop::collection::vec(-3.0..3.0f64, 36)) {
        let m = linalg::from_real_rows(6, 6, &e).unwrap();
        let eig = linalg::eig(&m).unwrap();
        for z in &eig {
            let partner = eig.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(partner <= 1e-8 * (1.0 + z.norm()));
        }
    }

    #[test]
    fn log_norm_bounds_exponential_growth(e in entries(3), t in 0.0..2.0f64) {
        let m = complex_matrix(3, &e);
        let mu = linalg::log_norm(&m).unwrap();
        let norm = common::spectral_norm(&common::taylor_expm(&m, t));
        prop_assert!(norm <= (mu * t).exp() * (1.0 + 1e-10));
    }
}

#[test]
fn companion_eigenvalues_match_polynomial_roots() {
    let coeffs = [c64(2.0, 0.0), c64(-1.0, 0.5), c64(0.0, 3.0), c64(1.5, 0.0)];
    let d = coeffs.len();
    let companion = CMatrix::from_fn(d, d, |i, j| {
        if i + 1 == j {
            c64(1.0, 0.0)
        } else if i == d - 1 {
            -coeffs[j]
        } else {
            c64(0.0, 0.0)
        }
    });
    let roots = common::monic_roots(&coeffs);
    let eig = linalg::eig(&companion).unwrap();
    for r in &roots {
        let nearest = eig.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-10, "root {r} missing from {eig:?}");
    }
}

#[test]
fn laser_eigenvalues_match_characteristic_roots() {
    let (a, _) = pseudobound::problems::laser_matrices();
    // Characteristic polynomial coefficients from the Faddeev–LeVerrier recursion.
    let n = a.nrows();
    let mut m = CMatrix::identity(n, n);
    let mut c: Vec<Complex64> = Vec::new();
    for k in 1..=n {
        let am = &a * &m;
        let ck = -am.trace() / c64(k as f64, 0.0);
        c.push(ck);
        m = am + CMatrix::identity(n, n) * ck;
    }
    let monic: Vec<Complex64> = c.iter().rev().cloned().collect();
    let roots = common::monic_roots(&monic);
    let eig = linalg::eig(&a).unwrap();
    for r in &roots {
        let nearest = eig.iter().map(|z| (z - r).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-8 * (1.0 + r.norm()), "root {r} missing from {eig:?}");
    }
    assert!(linalg::spectral_abscissa(&a).unwrap() < 0.0);
}

#[test]
fn singular_matrix_is_reported() {
    let m = linalg::from_real_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
    assert!(matches!(linalg::inverse(&m), Err(pseudobound::Error::Singular { .. })));
}

#[test]
fn non_finite_entries_are_located() {
    match linalg::from_real_rows(2, 2, &[1.0, 0.0, f64::NAN, 1.0]) {
        Err(pseudobound::Error::NonFinite { row, col }) => assert_eq!((row, col), (1, 0)),
        other => panic!("expected a non-finite error, got {other:?}"),
    }
}

#[test]
fn normal_matrices_have_unit_condition_number() {
    let q = DMatrix::<f64>::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
    let d = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -3.0]));
    let m = (&q * d * q.transpose()).map(|x| c64(x, 0.0));
    assert!(linalg::is_normal(&m, 1e-12));
    let v = linalg::eig_vectors(&m).unwrap();
    assert_relative_eq!(linalg::cond2(&v.vectors).unwrap(), 1.0, epsilon = 1e-10);
}
