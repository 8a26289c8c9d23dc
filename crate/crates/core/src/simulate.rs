//! Reference trajectories: fixed-step RK4 for constant-delay equations by the
//! method of steps, fundamental solutions, difference-equation iteration and
//! matrix-exponential propagation.

use nalgebra::{ComplexField, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector, C64};
use crate::matfun::{self, HodeProblem, Recurrence};

/// How a sampled history is interpolated between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Cubic,
}

/// The initial function `φ` on `[−τ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum History {
    Zero,
    Constant { value: CVector },
    /// Uniform samples at `−τ + kτ/(len−1)`; the last sample is `φ(0−)`.
    Samples { values: Vec<CVector>, order: Interpolation },
}

impl History {
    /// `φ(s)` for `s ∈ [−τ, 0]`, where `s = 0` means the left limit.
    pub fn eval(&self, s: f64, tau: f64, n: usize) -> CVector {
        match self {
            History::Zero => CVector::zeros(n),
            History::Constant { value } => value.clone(),
            History::Samples { values, order } => {
                let last = values.len() - 1;
                let x = ((s + tau) / tau * last as f64).clamp(0.0, last as f64);
                let i = (x.floor() as usize).min(last - 1);
                let f = x - i as f64;
                match order {
                    Interpolation::Linear => &values[i] * c64(1.0 - f, 0.0) + &values[i + 1] * c64(f, 0.0),
                    Interpolation::Cubic if last >= 3 => {
                        let start = i.saturating_sub(1).min(last - 3);
                        let xs: Vec<f64> = (start..start + 4).map(|k| k as f64).collect();
                        let mut out = CVector::zeros(n);
                        for a in 0..4 {
                            let mut w = 1.0;
                            for b in 0..4 {
                                if a != b {
                                    w *= (x - xs[b]) / (xs[a] - xs[b]);
                                }
                            }
                            out += &values[start + a] * c64(w, 0.0);
                        }
                        out
                    }
                    Interpolation::Cubic => {
                        &values[i] * c64(1.0 - f, 0.0) + &values[i + 1] * c64(f, 0.0)
                    }
                }
            }
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            History::Zero => Ok(()),
            History::Constant { value } if value.len() == n => Ok(()),
            History::Samples { values, .. } if values.len() >= 2 && values.iter().all(|v| v.len() == n) => Ok(()),
            History::Samples { values, .. } if values.len() < 2 => {
                Err(Error::Dimension("a sampled history needs at least two samples".into()))
            }
            _ => Err(Error::Dimension(format!("history vectors must have length {n}"))),
        }
    }
}

/// `u'(t) = A u(t) + B u(t − τ)` with `u = φ` on `[−τ, 0)` and `u(0) = u_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeProblem {
    pub a: CMatrix,
    pub b: CMatrix,
    pub tau: f64,
    pub history: History,
    pub u0: CVector,
}

impl DdeProblem {
    pub fn new(a: CMatrix, b: CMatrix, tau: f64, history: History, u0: CVector) -> Result<Self> {
        let n = linalg::ensure_square(&a, "A")?;
        if b.shape() != (n, n) || u0.len() != n {
            return Err(Error::Dimension(format!("B must be {n}x{n} and u0 of length {n}")));
        }
        linalg::check_finite(&a)?;
        linalg::check_finite(&b)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("delay must be positive and finite, got {tau}")));
        }
        history.validate(n)?;
        Ok(Self { a, b, tau, history, u0 })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rk4MethodOfSteps,
    Convolution,
    DifferenceIteration,
    MatrixExponential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
    pub norms: Vec<f64>,
    pub h: f64,
    pub method: Method,
}

impl Trajectory {
    fn from_states(times: Vec<f64>, states: Vec<CVector>, h: f64, method: Method) -> Self {
        let norms = states.iter().map(|s| s.norm()).collect();
        Self { times, states, norms, h, method }
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

/// Time samples with the spectral norm of a matrix-valued solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub h: f64,
}

impl NormSeries {
    pub fn max_norm(&self) -> f64 {
        self.norms.iter().cloned().fold(0.0, f64::max)
    }
}

/// Scalar types the integrator runs on; real data avoids complex arithmetic.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn from_c64(z: C64) -> Self;
    fn to_c64(self) -> C64;
}

impl Scalar for f64 {
    fn from_c64(z: C64) -> Self {
        z.re
    }
    fn to_c64(self) -> C64 {
        c64(self, 0.0)
    }
}

impl Scalar for C64 {
    fn from_c64(z: C64) -> Self {
        z
    }
    fn to_c64(self) -> C64 {
        self
    }
}

/// Dense or compressed-row operator, whichever is cheaper to apply.
enum Operator<T: Scalar> {
    Dense(DMatrix<T>),
    Sparse { rows: Vec<Vec<(usize, T)>> },
}

impl<T: Scalar> Operator<T> {
    fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        let nnz = m.iter().filter(|z| **z != C64::default()).count();
        if 4 * nnz <= n * n {
            let rows = (0..n)
                .map(|i| {
                    (0..n)
                        .filter(|&j| m[(i, j)] != C64::default())
                        .map(|j| (j, T::from_c64(m[(i, j)])))
                        .collect()
                })
                .collect();
            Operator::Sparse { rows }
        } else {
            Operator::Dense(m.map(T::from_c64))
        }
    }

    /// `out += self · x`.
    fn apply_add(&self, x: &DMatrix<T>, out: &mut DMatrix<T>) {
        match self {
            Operator::Dense(m) => out.gemm(T::one(), m, x, T::one()),
            Operator::Sparse { rows } => {
                for c in 0..x.ncols() {
                    let col = x.column(c);
                    for (i, row) in rows.iter().enumerate() {
                        let mut s = T::zero();
                        for &(j, v) in row {
                            s += v * col[j];
                        }
                        out[(i, c)] += s;
                    }
                }
            }
        }
    }
}

/// `m = τ/h` when it is a positive integer (to relative precision 1e-9).
fn steps_per_delay(tau: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let ratio = tau / h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > 1e-9 * ratio {
        return Err(Error::Precondition(format!("step {h} does not divide the delay {tau}")));
    }
    Ok(m as usize)
}

fn step_count(h: f64, t_end: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Domain(format!("end time must be finite and nonnegative, got {t_end}")));
    }
    Ok((t_end / h - 1e-9).ceil().max(0.0) as usize)
}

/// Default step `τ/m` with `m ≥ 200` and `h‖A‖₂ ≤ 2.5`, inside the RK4
/// stability interval.
pub fn default_step(a: &CMatrix, tau: f64) -> f64 {
    let m = (tau * linalg::norm2(a) / 2.5).ceil().max(200.0);
    tau / m
}

struct Recorded<T: Scalar> {
    times: Vec<f64>,
    states: Vec<DMatrix<T>>,
}

/// RK4 with delayed reads from a ring buffer of the last `m + 2` steps;
/// half-step delayed values come from cubic Hermite interpolation using the
/// stored derivatives, with the derivative jump at `t = τ` accounted for.
fn method_of_steps<T: Scalar>(
    a: &Operator<T>,
    b: &Operator<T>,
    m: usize,
    h: f64,
    n_steps: usize,
    u0: DMatrix<T>,
    phi: &dyn Fn(f64) -> DMatrix<T>,
    stride: usize,
) -> Recorded<T> {
    let (rows, cols) = u0.shape();
    let rhs = |u: &DMatrix<T>, d: &DMatrix<T>| -> DMatrix<T> {
        let mut out = DMatrix::<T>::zeros(rows, cols);
        a.apply_add(u, &mut out);
        b.apply_add(d, &mut out);
        out
    };
    let mut jump = DMatrix::<T>::zeros(rows, cols);
    b.apply_add(&(&u0 - phi(0.0)), &mut jump);

    let len = m + 2;
    let mut values: Vec<DMatrix<T>> = vec![DMatrix::zeros(rows, cols); len];
    let mut derivs: Vec<DMatrix<T>> = vec![DMatrix::zeros(rows, cols); len];
    let half = T::from_real(0.5);
    let eighth_h = T::from_real(h / 8.0);
    let hs = T::from_real(h);
    let sixth = T::from_real(h / 6.0);
    let two = T::from_real(2.0);

    let mut rec = Recorded { times: vec![0.0], states: vec![u0.clone()] };
    values[0] = u0;
    for n in 0..n_steps {
        let slot = n % len;
        let u = values[slot].clone();
        let s = (n as f64 - m as f64) * h;
        let d0 = if n < m { phi(s) } else { values[(n - m) % len].clone() };
        let k1 = rhs(&u, &d0);
        derivs[slot] = k1.clone();
        let (dmid, d1) = if n < m {
            (phi(s + 0.5 * h), phi(s + h))
        } else {
            let k = n - m;
            let (ua, da) = (&values[k % len], &derivs[k % len]);
            let ub = &values[(k + 1) % len];
            let db = if k + 1 == m { &derivs[(k + 1) % len] - &jump } else { derivs[(k + 1) % len].clone() };
            ((ua + ub) * half + (da - db) * eighth_h, ub.clone())
        };
        let k2 = rhs(&(&u + &k1 * (hs * half)), &dmid);
        let k3 = rhs(&(&u + &k2 * (hs * half)), &dmid);
        let k4 = rhs(&(&u + &k3 * hs), &d1);
        let next = &u + (k1 + k2 * two + k3 * two + k4) * sixth;
        values[(n + 1) % len] = next;
        if (n + 1) % stride == 0 || n + 1 == n_steps {
            rec.times.push((n + 1) as f64 * h);
            rec.states.push(values[(n + 1) % len].clone());
        }
    }
    rec
}

fn to_t<T: Scalar>(m: &CMatrix) -> DMatrix<T> {
    m.map(T::from_c64)
}

fn to_c<T: Scalar>(m: &DMatrix<T>) -> CMatrix {
    m.map(|x| x.to_c64())
}

#[allow(clippy::too_many_arguments)]
fn run<T: Scalar>(
    a: &CMatrix,
    b: &CMatrix,
    tau: f64,
    h: f64,
    t_end: f64,
    u0: &CMatrix,
    phi: &(dyn Fn(f64) -> CMatrix + Sync),
    stride: usize,
) -> Result<Recorded<T>> {
    let m = steps_per_delay(tau, h)?;
    let n_steps = step_count(h, t_end)?;
    let phi_t = |s: f64| to_t::<T>(&phi(s));
    Ok(method_of_steps(
        &Operator::<T>::new(a),
        &Operator::<T>::new(b),
        m,
        h,
        n_steps,
        to_t(u0),
        &phi_t,
        stride.max(1),
    ))
}

fn real_data(mats: &[&CMatrix]) -> bool {
    mats.iter().all(|m| linalg::is_real(m))
}

fn integrate_columns(
    a: &CMatrix,
    b: &CMatrix,
    tau: f64,
    h: f64,
    t_end: f64,
    u0: &CMatrix,
    phi: &(dyn Fn(f64) -> CMatrix + Sync),
    real: bool,
    stride: usize,
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    if real {
        let r = run::<f64>(a, b, tau, h, t_end, u0, phi, stride)?;
        Ok((r.times, r.states.iter().map(to_c).collect()))
    } else {
        let r = run::<C64>(a, b, tau, h, t_end, u0, phi, stride)?;
        Ok((r.times, r.states))
    }
}

/// RK4 trajectory recorded at every step.
pub fn integrate_dde(p: &DdeProblem, h: f64, t_end: f64) -> Result<Trajectory> {
    integrate_dde_every(p, h, t_end, 1)
}

/// RK4 trajectory recorded every `stride` steps and at the final step.
pub fn integrate_dde_every(p: &DdeProblem, h: f64, t_end: f64, stride: usize) -> Result<Trajectory> {
    let n = p.dim();
    let phi = |s: f64| -> CMatrix {
        let v = p.history.eval(s, p.tau, n);
        CMatrix::from_column_slice(n, 1, v.as_slice())
    };
    let u0 = CMatrix::from_column_slice(n, 1, p.u0.as_slice());
    let history_real = match &p.history {
        History::Zero => true,
        History::Constant { value } => value.iter().all(|z| z.im == 0.0),
        History::Samples { values, .. } => values.iter().all(|v| v.iter().all(|z| z.im == 0.0)),
    };
    let real = real_data(&[&p.a, &p.b, &u0]) && history_real;
    let (times, states) = integrate_columns(&p.a, &p.b, p.tau, h, t_end, &u0, &phi, real, stride)?;
    let states = states.into_iter().map(|s| s.column(0).into_owned()).collect();
    Ok(Trajectory::from_states(times, states, h, Method::Rk4MethodOfSteps))
}

/// `Ψ(t)`: zero history and `Ψ(0) = I`, recorded every `stride` steps.
pub fn fundamental_solution(
    a: &CMatrix,
    b: &CMatrix,
    tau: f64,
    h: f64,
    t_end: f64,
    stride: usize,
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    let n = linalg::ensure_square(a, "A")?;
    if b.shape() != (n, n) {
        return Err(Error::Dimension("A and B must have the same order".into()));
    }
    let zero = move |_: f64| CMatrix::zeros(n, n);
    integrate_columns(a, b, tau, h, t_end, &CMatrix::identity(n, n), &zero, real_data(&[a, b]), stride)
}

/// `‖Ψ(t)‖₂` every `stride` steps.
pub fn fundamental_norms(a: &CMatrix, b: &CMatrix, tau: f64, h: f64, t_end: f64, stride: usize) -> Result<NormSeries> {
    let n = linalg::ensure_square(a, "A")?;
    if b.shape() != (n, n) {
        return Err(Error::Dimension("A and B must have the same order".into()));
    }
    let zero = move |_: f64| CMatrix::zeros(n, n);
    let id = CMatrix::identity(n, n);
    let (times, norms) = if real_data(&[a, b]) {
        let r = run::<f64>(a, b, tau, h, t_end, &id, &zero, stride)?;
        let norms = r.states.par_iter().map(|s| s.singular_values().max()).collect();
        (r.times, norms)
    } else {
        let r = run::<C64>(a, b, tau, h, t_end, &id, &zero, stride)?;
        let norms = r.states.par_iter().map(linalg::norm2).collect();
        (r.times, norms)
    };
    Ok(NormSeries { times, norms, h })
}

/// How [`solution_with_history`] evaluates the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Via {
    /// Direct RK4 integration.
    Direct,
    /// `u(t) = Ψ(t)u_0 + ∫_0^τ Ψ(t−ν) B φ(ν−τ) dν` by composite quadrature.
    Convolution,
}

/// Composite Simpson weights on `count` equal intervals, closing with a
/// 3/8 panel when `count` is odd.
fn panel_weights(count: usize) -> Vec<f64> {
    let mut w = vec![0.0; count + 1];
    match count {
        0 => {}
        1 => {
            w[0] = 0.5;
            w[1] = 0.5;
        }
        _ => {
            let simpson = if count % 2 == 0 { count } else { count - 3 };
            let mut k = 0;
            while k < simpson {
                w[k] += 1.0 / 3.0;
                w[k + 1] += 4.0 / 3.0;
                w[k + 2] += 1.0 / 3.0;
                k += 2;
            }
            if simpson < count {
                for (i, c) in [3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0].iter().enumerate() {
                    w[simpson + i] += c;
                }
            }
        }
    }
    w
}

pub fn solution_with_history(p: &DdeProblem, via: Via, h: f64, t_end: f64) -> Result<Trajectory> {
    if via == Via::Direct {
        return integrate_dde(p, h, t_end);
    }
    let n = p.dim();
    let m = steps_per_delay(p.tau, h)?;
    let (times, psi) = fundamental_solution(&p.a, &p.b, p.tau, h, t_end, 1)?;
    let forcing: Vec<CVector> = (0..=m)
        .map(|j| &p.b * p.history.eval(j as f64 * h - p.tau, p.tau, n))
        .collect();
    let states: Vec<CVector> = (0..times.len())
        .into_par_iter()
        .map(|k| {
            let mut u = &psi[k] * &p.u0;
            let top = k.min(m);
            let mut cuts: Vec<usize> = vec![0, top];
            let mut c = k % m;
            while c < top {
                cuts.push(c);
                c += m;
            }
            cuts.sort_unstable();
            cuts.dedup();
            for w in cuts.windows(2) {
                let weights = panel_weights(w[1] - w[0]);
                for (i, wt) in weights.iter().enumerate() {
                    let j = w[0] + i;
                    u += &psi[k - j] * &forcing[j] * c64(wt * h, 0.0);
                }
            }
            u
        })
        .collect();
    Ok(Trajectory::from_states(times, states, h, Method::Convolution))
}

/// `y_{n+1} = Σ_j A_j y_{n−j}` for `n_steps` steps from `y_0, y_{−1}, …`.
pub fn iterate_difference(h: &HodeProblem, n_steps: usize) -> Result<Trajectory> {
    if h.recurrence != Recurrence::Difference {
        return Err(Error::Precondition("expected a difference recurrence".into()));
    }
    let mut window: std::collections::VecDeque<CVector> = h.initial.iter().cloned().collect();
    let mut states = vec![window[0].clone()];
    for _ in 0..n_steps {
        let mut next = CVector::zeros(h.block());
        for (a, y) in h.coeffs.iter().zip(window.iter()) {
            next += a * y;
        }
        window.pop_back();
        window.push_front(next.clone());
        states.push(next);
    }
    let times = (0..=n_steps).map(|n| n as f64).collect();
    Ok(Trajectory::from_states(times, states, 1.0, Method::DifferenceIteration))
}

/// `y(t)` of `y^{(n)} = Σ_j A_j y^{(j)}` through the companion exponential.
pub fn hode_solution(h: &HodeProblem, times: &[f64]) -> Result<Trajectory> {
    if h.recurrence != Recurrence::Differential {
        return Err(Error::Precondition("expected a differential recurrence".into()));
    }
    let m = matfun::companion(h);
    let x0 = h.initial_state();
    let k = h.block();
    let states = times
        .par_iter()
        .map(|&t| linalg::expm(&m, t).map(|e| (e * &x0).rows(0, k).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory::from_states(times.to_vec(), states, 0.0, Method::MatrixExponential))
}

/// `‖e^{tA}‖₂` at the given times.
pub fn expm_norms(a: &CMatrix, times: &[f64]) -> Result<Vec<f64>> {
    times.par_iter().map(|&t| linalg::expm(a, t).map(|e| linalg::norm2(&e))).collect()
}
