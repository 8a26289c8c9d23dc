mod common;

use approx::assert_relative_eq;
use pseudobound::linalg::{self, c64, CMatrix, CVector};
use pseudobound::matfun::{HodeProblem, Recurrence};
use pseudobound::problems::{self, Problem};
use pseudobound::simulate::{self, DdeProblem, History, Interpolation, Via};

fn vector(entries: &[f64]) -> CVector {
    CVector::from_iterator(entries.len(), entries.iter().map(|&x| c64(x, 0.0)))
}

fn preset_dde(name: &str) -> DdeProblem {
    match problems::preset(name).unwrap().resolve().unwrap() {
        Problem::Dde(p) => p,
        other => panic!("{name} resolved to {other:?}"),
    }
}

#[test]
fn scalar_delay_equation_matches_the_method_of_steps() {
    let p = preset_dde("scalar");
    let traj = simulate::integrate_dde(&p, 1.0 / 400.0, 2.0).unwrap();
    assert_eq!(traj.times.len(), 801);
    for (t, u) in traj.times.iter().zip(&traj.states) {
        assert!((u[0].re - common::scalar_dde_exact(*t)).abs() < 1e-9, "t = {t}");
        assert_eq!(u[0].im, 0.0);
    }
}

#[test]
fn convolution_and_direct_integration_agree() {
    let p = preset_dde("laser");
    let h = 1.0 / 400.0;
    let direct = simulate::solution_with_history(&p, Via::Direct, h, 5.0).unwrap();
    let convolved = simulate::solution_with_history(&p, Via::Convolution, h, 5.0).unwrap();
    let scale = direct.max_norm();
    for (a, b) in direct.norms.iter().zip(&convolved.norms) {
        assert!((a - b).abs() <= 1e-6 * scale, "{a} vs {b}");
    }
}

#[test]
fn zero_coupling_reduces_to_the_exponential() {
    let a = linalg::from_real_rows(2, 2, &[-1.0, 4.0, -0.5, -0.2]).unwrap();
    let b = CMatrix::zeros(2, 2);
    let (times, psi) = simulate::fundamental_solution(&a, &b, 0.5, 0.5 / 100.0, 3.0, 20).unwrap();
    for (t, m) in times.iter().zip(&psi) {
        let exact = common::taylor_expm(&a, *t);
        assert!(common::spectral_norm(&(m - &exact)) < 1e-8, "t = {t}");
    }
}

#[test]
fn fundamental_norms_match_matrix_solution() {
    let (a, b) = problems::laser_matrices();
    let h = 1.0 / 200.0;
    let (times, psi) = simulate::fundamental_solution(&a, &b, 1.0, h, 4.0, 10).unwrap();
    let series = simulate::fundamental_norms(&a, &b, 1.0, h, 4.0, 10).unwrap();
    assert_eq!(series.times, times);
    for (n, m) in series.norms.iter().zip(&psi) {
        assert_relative_eq!(*n, common::spectral_norm(m), max_relative = 1e-10);
    }
    assert_relative_eq!(series.norms[0], 1.0, epsilon = 1e-14);
}

#[test]
fn step_must_divide_the_delay() {
    let p = preset_dde("scalar");
    assert!(matches!(simulate::integrate_dde(&p, 0.3, 1.0), Err(pseudobound::Error::Precondition(_))));
    let h = simulate::default_step(&p.a, p.tau);
    assert!(simulate::integrate_dde(&p, h, 1.0).is_ok());
}

#[test]
fn difference_iteration_matches_the_recurrence() {
    let a0 = linalg::from_real_rows(2, 2, &[0.5, 1.0, 0.0, -0.3]).unwrap();
    let a1 = linalg::from_real_rows(2, 2, &[0.0, 0.2, 0.1, 0.0]).unwrap();
    let initial = vec![vector(&[1.0, 0.0]), vector(&[0.0, 2.0])];
    let h = HodeProblem::new(vec![a0.clone(), a1.clone()], initial.clone(), Recurrence::Difference).unwrap();
    let traj = simulate::iterate_difference(&h, 30).unwrap();
    let oracle = common::iterate_recurrence(&[a0, a1], &initial, 30);
    for (a, b) in traj.norms.iter().zip(&oracle) {
        assert_relative_eq!(*a, *b, max_relative = 1e-13);
    }
}

#[test]
fn oscillator_solution_matches_runge_kutta() {
    let h = HodeProblem::new(
        vec![linalg::real_diag(&[-1.0]), linalg::real_diag(&[-0.1])],
        vec![vector(&[1.0]), vector(&[0.0])],
        Recurrence::Differential,
    )
    .unwrap();
    let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let traj = simulate::hode_solution(&h, &times).unwrap();
    let companion = linalg::from_real_rows(2, 2, &[0.0, 1.0, -1.0, -0.1]).unwrap();
    let rk = common::rk4_linear(&companion, &vector(&[1.0, 0.0]), 0.001, 10_000);
    for (t, y) in times.iter().zip(&traj.states) {
        assert!((y[0] - rk[(t * 1000.0).round() as usize][0]).norm() < 1e-10, "t = {t}");
    }
    // Damped oscillation: y(t) ≈ e^{−t/20} cos(ωt) with ω² = 1 − 1/400.
    let omega = (1.0f64 - 1.0 / 400.0).sqrt();
    let closed = |t: f64| (-t / 20.0).exp() * ((omega * t).cos() + (omega * t).sin() / (20.0 * omega));
    for (t, y) in times.iter().zip(&traj.states) {
        assert_relative_eq!(y[0].re, closed(*t), epsilon = 1e-12);
    }
}

#[test]
fn expm_norms_match_the_series() {
    let a = linalg::from_real_rows(2, 2, &[-1.0, 20.0, 0.0, -2.0]).unwrap();
    let times = [0.0, 0.3, 1.0, 4.0];
    let norms = simulate::expm_norms(&a, &times).unwrap();
    for (t, n) in times.iter().zip(&norms) {
        assert_relative_eq!(*n, common::spectral_norm(&common::taylor_expm(&a, *t)), max_relative = 1e-11);
    }
}

#[test]
fn history_interpolation_reproduces_polynomials() {
    let tau = 2.0;
    let f = |s: f64| 1.0 + s - 0.5 * s * s + 0.25 * s * s * s;
    let samples: Vec<CVector> = (0..9).map(|k| vector(&[f(-tau + k as f64 * tau / 8.0)])).collect();
    let cubic = History::Samples { values: samples.clone(), order: Interpolation::Cubic };
    for s in [-1.93, -1.1, -0.4, -0.01] {
        assert_relative_eq!(cubic.eval(s, tau, 1)[0].re, f(s), epsilon = 1e-12);
    }
    let line = |s: f64| 3.0 - 2.0 * s;
    let linear = History::Samples {
        values: (0..5).map(|k| vector(&[line(-tau + k as f64 * tau / 4.0)])).collect(),
        order: Interpolation::Linear,
    };
    assert_relative_eq!(linear.eval(-0.77, tau, 1)[0].re, line(-0.77), epsilon = 1e-12);
}

#[test]
fn problem_construction_checks_dimensions() {
    let a = linalg::real_diag(&[-1.0, -2.0]);
    let b = linalg::real_diag(&[0.1]);
    assert!(DdeProblem::new(a.clone(), b, 1.0, History::Zero, vector(&[1.0, 0.0])).is_err());
    let b = linalg::real_diag(&[0.1, 0.1]);
    assert!(DdeProblem::new(a.clone(), b.clone(), 0.0, History::Zero, vector(&[1.0, 0.0])).is_err());
    let short = History::Samples { values: vec![vector(&[1.0, 0.0])], order: Interpolation::Linear };
    assert!(DdeProblem::new(a, b, 1.0, short, vector(&[1.0, 0.0])).is_err());
}
