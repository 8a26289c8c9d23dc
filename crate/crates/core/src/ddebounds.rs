//! Upper bounds on the fundamental solution of `u'(t) = A u(t) + B u(t − τ)`
//! from a contour that hugs the imaginary axis near the origin and bends left
//! logarithmically further out.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector, Lu, C64, DENSE_CUTOFF};
use crate::matfun::shift;
use crate::odebounds::{check_times, BoundCurve, Provenance};
use crate::pseudo::{dde_spectral_abscissa, AbscissaEstimate};
use crate::quad::{integrate_vec, integrate_vec_split, QuadOptions};
use crate::simulate::{self, History};

/// How the resolvent of `A` is bounded on the curved part of the contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourMode {
    /// `‖(zI − A)^{-1}‖ ≤ 1/|Im z|`.
    Hermitian,
    /// `A = VDV^{-1}` with `‖(zI − A)^{-1}‖ ≤ κ₂(V)/(|Im z| − β)`.
    Diagonalizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `‖e^{At}‖ + e^{x₀t}(I₀ + Cτ/t)`.
    Split,
    /// Vertical line beyond `y₀`: `‖e^{At}‖ + e^{x₀t}(I₀ + C)`.
    Vertical,
    /// No separation of `e^{At}`: `e^{x₀t}(Ĩ₀ + Cτ/t)`.
    Nonsplit,
    /// As `Nonsplit`, with the contour allowed to the left of `α(A)`.
    NonsplitShifted,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Split, Variant::Vertical, Variant::Nonsplit, Variant::NonsplitShifted];

    fn separates_exponential(self) -> bool {
        matches!(self, Variant::Split | Variant::Vertical)
    }

    fn decays_like_inverse_time(self) -> bool {
        !matches!(self, Variant::Vertical)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Split => "split",
            Variant::Vertical => "vertical",
            Variant::Nonsplit => "nonsplit",
            Variant::NonsplitShifted => "nonsplit-shifted",
        }
    }
}

/// Exponent of the time factor in the `Cτ/t` tail term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailForm {
    /// `e^{x₀t} Cτ/t`.
    Statement,
    /// `e^{x₀(t−τ)} Cτ/t`, larger by `e^{−x₀τ}`.
    Proof,
}

/// Exponent under the square root of the diagonalizable-mode constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadicalExponent {
    /// `√((τ(y₀−β))^{-2} + 1)`, from the arc-length factor of the contour.
    Squared,
    /// `√((τ(y₀−β))^{-1} + 1)`.
    Printed,
}

/// Parameters of the contour `x(y) = −(1/τ) log(η(|y| − β))` for `|y| ≥ y₀`
/// and `x = x₀` for `|y| ≤ y₀` (with `β = 0` in Hermitian mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourParams {
    pub y0: f64,
    pub eta: f64,
    pub tau: f64,
    pub beta: f64,
    pub x0: f64,
    pub mode: ContourMode,
    pub variant: Variant,
}

impl ContourParams {
    /// `η y₀` or `η(y₀ − β)`, the quantity squeezed between 1 and the limits.
    pub fn w(&self) -> f64 {
        self.eta * (self.y0 - self.beta)
    }
}

/// `x(y)` on the curved part of the contour.
pub fn contour_x(y: f64, p: &ContourParams) -> Result<f64> {
    let lead = y.abs() - p.beta;
    let ok = match p.mode {
        ContourMode::Hermitian => y.abs() >= p.y0,
        ContourMode::Diagonalizable => lead > 0.0,
    };
    if !ok || !y.is_finite() {
        return Err(Error::Domain(format!("contour abscissa undefined at height {y}")));
    }
    Ok(-(p.eta * lead).ln() / p.tau)
}

/// `‖(X − Y)^{-1}‖ ≤ 1/(‖X^{-1}‖^{-1} − ‖Y‖)` when `‖X^{-1}‖‖Y‖ < 1`.
pub fn neumann_inverse_bound(x_inv_norm: f64, y_norm: f64) -> Result<f64> {
    if !(x_inv_norm > 0.0) || !(y_norm >= 0.0) || x_inv_norm * y_norm >= 1.0 {
        return Err(Error::Precondition(format!(
            "Neumann series needs ‖X⁻¹‖‖Y‖ < 1, got {x_inv_norm} · {y_norm}"
        )));
    }
    Ok(1.0 / (1.0 / x_inv_norm - y_norm))
}

/// Everything about `(A, B, τ)` that the contour construction needs.
#[derive(Debug, Clone)]
pub struct DelaySystem {
    pub a: CMatrix,
    pub b: CMatrix,
    pub tau: f64,
    pub mode: ContourMode,
    pub norm_b: f64,
    /// `‖B‖₂` in Hermitian mode, `‖V^{-1}BV‖₂` otherwise.
    pub coupling: f64,
    /// Largest `|Im λ|` over eigenvalues of `A`; zero in Hermitian mode.
    pub beta: f64,
    /// `κ₂(V)`; one in Hermitian mode.
    pub cond_v: f64,
    pub alpha_a: f64,
    pub alpha_t: AbscissaEstimate,
    eigenvalues: Vec<C64>,
    vectors: CMatrix,
    vectors_inv: CMatrix,
    /// `B V`, used to apply `B R(z)` column by column when `V` is unitary.
    coupled_vectors: CMatrix,
    normal_a: bool,
    real_data: bool,
}

impl DelaySystem {
    /// Analyzes the system, estimating `α(T)` by collocation at `n_nodes`
    /// and `2·n_nodes` points.
    pub fn new(a: CMatrix, b: CMatrix, tau: f64, n_nodes: usize) -> Result<Self> {
        let alpha_t = dde_spectral_abscissa(&a, &b, tau, n_nodes)?;
        Self::with_abscissa(a, b, tau, alpha_t)
    }

    pub fn with_abscissa(a: CMatrix, b: CMatrix, tau: f64, alpha_t: AbscissaEstimate) -> Result<Self> {
        let n = linalg::ensure_square(&a, "A")?;
        if b.shape() != (n, n) {
            return Err(Error::Dimension("A and B must have the same order".into()));
        }
        linalg::check_finite(&a)?;
        linalg::check_finite(&b)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("delay must be positive and finite, got {tau}")));
        }
        let norm_b = linalg::norm2(&b);
        let real_data = linalg::is_real(&a) && linalg::is_real(&b);
        let normal_a = linalg::is_normal(&a, 1e-12);
        let hermitian = linalg::is_hermitian(&a, 1e-13);
        let ed = linalg::eig_vectors(&a)?;
        let coupled_vectors = &b * &ed.vectors;
        let (mode, coupling, beta, cond_v, vectors_inv) = if hermitian {
            let inv = ed.vectors.adjoint();
            (ContourMode::Hermitian, norm_b, 0.0, 1.0, inv)
        } else {
            if ed.residual > 1e-8 {
                return Err(Error::Unsupported(format!(
                    "A is neither Hermitian nor diagonalizable to working precision (residual {:.2e})",
                    ed.residual
                )));
            }
            let inv = linalg::inverse(&ed.vectors)?;
            let e = &inv * &b * &ed.vectors;
            let beta = ed.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            (ContourMode::Diagonalizable, linalg::norm2(&e), beta, linalg::cond2(&ed.vectors)?, inv)
        };
        let alpha_a = ed.values.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            a,
            b,
            tau,
            mode,
            norm_b,
            coupling,
            beta,
            cond_v,
            alpha_a,
            alpha_t,
            eigenvalues: ed.values,
            vectors: ed.vectors,
            vectors_inv,
            coupled_vectors,
            normal_a,
            real_data,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn has_delay_term(&self) -> bool {
        self.norm_b > 0.0
    }

    /// `‖e^{At}‖₂`, exact for normal `A`.
    pub fn expm_norm(&self, t: f64) -> Result<f64> {
        if self.normal_a {
            Ok((self.alpha_a * t).exp())
        } else {
            Ok(linalg::norm2(&linalg::expm(&self.a, t)?))
        }
    }

    fn resolvent_apply(&self, z: C64, x: &[C64], out: &mut [C64]) {
        let xv = CVector::from_column_slice(x);
        let mut y = &self.vectors_inv * xv;
        for (yi, lam) in y.iter_mut().zip(&self.eigenvalues) {
            *yi /= z - lam;
        }
        out.copy_from_slice((&self.vectors * y).as_slice());
    }

    fn resolvent_adjoint_apply(&self, z: C64, x: &[C64], out: &mut [C64]) {
        let xv = CVector::from_column_slice(x);
        let mut y = self.vectors.adjoint() * xv;
        for (yi, lam) in y.iter_mut().zip(&self.eigenvalues) {
            *yi /= (z - lam).conj();
        }
        out.copy_from_slice((self.vectors_inv.adjoint() * y).as_slice());
    }

    fn resolvent(&self, z: C64) -> CMatrix {
        let d = CVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|lam| 1.0 / (z - lam)));
        &self.vectors * CMatrix::from_diagonal(&d) * &self.vectors_inv
    }

    fn char_matrix(&self, z: C64) -> CMatrix {
        shift(&self.a, z) - &self.b * (-z * self.tau).exp()
    }

    /// `‖T(z)^{-1} − R(z)‖ = |e^{−τz}| ‖T(z)^{-1} B R(z)‖`, or `None` where
    /// `T(z)` is singular.
    pub fn split_integrand(&self, z: C64) -> Option<f64> {
        let n = self.dim();
        let decay = (-z * self.tau).exp();
        let t = self.char_matrix(z);
        let lu = Lu::new(&t).ok()?;
        if lu.has_zero_pivot() {
            return None;
        }
        if self.mode == ContourMode::Hermitian && n > DENSE_CUTOFF {
            // ‖T⁻¹BQDQ*‖ = ‖T⁻¹(BQ)D‖ for unitary Q.
            let mut x = lu.solve_matrix(&self.coupled_vectors);
            for (mut col, lam) in x.column_iter_mut().zip(&self.eigenvalues) {
                col *= 1.0 / (z - lam);
            }
            return Some(decay.norm() * linalg::norm2(&x));
        }
        if n <= DENSE_CUTOFF {
            let br = &self.b * self.resolvent(z);
            let x = lu.solve_matrix(&br);
            return Some(decay.norm() * linalg::norm2(&x));
        }
        let b_adj = self.b.adjoint();
        let v = linalg::operator_norm2(
            n,
            |x, y| {
                let mut r = vec![C64::default(); n];
                self.resolvent_apply(z, x, &mut r);
                let br = &self.b * CVector::from_column_slice(&r);
                y.copy_from_slice(br.as_slice());
                lu.solve_in_place(y);
            },
            |x, y| {
                let mut w = x.to_vec();
                lu.solve_adjoint_in_place(&mut w);
                let bw = &b_adj * CVector::from_column_slice(&w);
                self.resolvent_adjoint_apply(z, bw.as_slice(), y);
            },
        );
        Some(decay.norm() * v)
    }

    /// `‖T(z)^{-1}‖`, or `None` where `T(z)` is singular.
    pub fn inverse_norm(&self, z: C64) -> Option<f64> {
        let s = linalg::sigma_min(&self.char_matrix(z)).ok()?;
        if s > 0.0 { Some(1.0 / s) } else { None }
    }
}

/// Limits on `w = η y₀` (or `η(y₀ − β)`) and whether a given `w` respects them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainReport {
    pub w: f64,
    /// `y₀/‖B‖` or `(y₀−β)/‖E‖`.
    pub coupling_limit: f64,
    /// `e^{−α(T)τ}`.
    pub alpha_t_limit: f64,
    /// `e^{−α(A)τ}`; infinite when the variant does not need it.
    pub alpha_a_limit: f64,
    pub holds: bool,
    pub binding: &'static str,
}

fn limits(sys: &DelaySystem, y0: f64, variant: Variant) -> Result<(f64, f64, f64)> {
    let lead = y0 - sys.beta;
    if !(lead > 0.0) || !y0.is_finite() {
        return Err(Error::Infeasible(format!(
            "y0 = {y0} must exceed the largest imaginary part {} of the eigenvalues of A",
            sys.beta
        )));
    }
    let coupling = if sys.coupling > 0.0 { lead / sys.coupling } else { f64::INFINITY };
    let alpha_t = (-sys.alpha_t.conservative() * sys.tau).exp();
    let alpha_a = if variant == Variant::NonsplitShifted { f64::INFINITY } else { (-sys.alpha_a * sys.tau).exp() };
    Ok((coupling, alpha_t, alpha_a))
}

fn binding_name(c: f64, t: f64, a: f64) -> &'static str {
    if c <= t && c <= a {
        "coupling limit y0/‖B‖ (or (y0−β)/‖E‖)"
    } else if t <= a {
        "delay-root limit exp(−α(T)τ)"
    } else {
        "exponential limit exp(−α(A)τ)"
    }
}

/// Checks `1 < w < min{coupling, e^{−α(T)τ}, e^{−α(A)τ}}` for the given `η`.
pub fn check_chain(sys: &DelaySystem, y0: f64, eta: f64, variant: Variant) -> Result<ChainReport> {
    let (c, t, a) = limits(sys, y0, variant)?;
    let w = eta * (y0 - sys.beta);
    let upper = c.min(t).min(a);
    Ok(ChainReport {
        w,
        coupling_limit: c,
        alpha_t_limit: t,
        alpha_a_limit: a,
        holds: w > 1.0 && w < upper,
        binding: if w <= 1.0 { "lower limit 1" } else { binding_name(c, t, a) },
    })
}

/// Contour with a caller-chosen `η`, rejected unless the chain holds.
pub fn contour_params(sys: &DelaySystem, y0: f64, eta: f64, variant: Variant) -> Result<ContourParams> {
    let report = check_chain(sys, y0, eta, variant)?;
    if !report.holds {
        return Err(Error::Infeasible(format!(
            "w = {:.6} violates the admissible interval; binding constraint: {}",
            report.w, report.binding
        )));
    }
    Ok(ContourParams {
        y0,
        eta,
        tau: sys.tau,
        beta: sys.beta,
        x0: -report.w.ln() / sys.tau,
        mode: sys.mode,
        variant,
    })
}

/// Contour with `w` at the logarithmic midpoint of its admissible interval.
pub fn choose_contour(sys: &DelaySystem, y0: f64, variant: Variant) -> Result<ContourParams> {
    let (c, t, a) = limits(sys, y0, variant)?;
    let upper = c.min(t).min(a);
    if !(upper > 1.0) {
        return Err(Error::Infeasible(format!(
            "empty admissible interval for y0 = {y0}; binding constraint: {}",
            binding_name(c, t, a)
        )));
    }
    if upper.is_infinite() {
        return Err(Error::Infeasible("no delay coupling: the contour degenerates; use the exponential".into()));
    }
    let w = upper.sqrt();
    contour_params(sys, y0, w / (y0 - sys.beta), variant)
}

/// The constant multiplying the curved-contour tail term.
#[allow(clippy::too_many_arguments)]
pub fn c_constant(
    coupling: f64,
    eta: f64,
    tau: f64,
    y0: f64,
    beta: f64,
    mode: ContourMode,
    variant: Variant,
    cond_v: f64,
    exponent: RadicalExponent,
) -> Result<f64> {
    let q = coupling * eta;
    if !(q < 1.0) {
        return Err(Error::Precondition(format!("‖B‖η = {q} must be below 1")));
    }
    let lead = tau * (y0 - beta);
    let power = match (mode, exponent) {
        (ContourMode::Diagonalizable, RadicalExponent::Printed) => -1.0,
        _ => -2.0,
    };
    let radical = (lead.powf(power) + 1.0).sqrt();
    let kappa = if mode == ContourMode::Hermitian { 1.0 } else { cond_v };
    let value = match variant {
        Variant::Split => kappa * q * radical,
        Variant::Vertical => kappa * q,
        Variant::Nonsplit | Variant::NonsplitShifted => kappa * radical,
    };
    Ok(value / (PI * (1.0 - q)))
}

/// `I₀` (or `Ĩ₀`) and `C` for one contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayTerms {
    pub params: ContourParams,
    pub i0: f64,
    /// Quadrature error estimate, added to `I₀` in every bound.
    pub i0_error: f64,
    pub c: f64,
    pub converged: bool,
}

impl DelayTerms {
    fn i0_bound(&self) -> f64 {
        self.i0 + self.i0_error
    }

    /// The contour part of the bound at time `s`, decreasing in `s`.
    fn contour_part(&self, s: f64, tail: TailForm) -> f64 {
        let p = &self.params;
        let shift = match tail {
            TailForm::Statement => 0.0,
            TailForm::Proof => p.tau,
        };
        let g = if p.variant.decays_like_inverse_time() { p.tau / s } else { 1.0 };
        (p.x0 * s).exp() * self.i0_bound() + (p.x0 * (s - shift)).exp() * self.c * g
    }
}

/// `‖T(z)^{-1}‖` has kinks where singular values cross, so its integral is
/// resolved to a looser relative tolerance; the error estimate is added to
/// the bound either way.
fn quad_options(abs_tol: f64, variant: Variant) -> QuadOptions {
    let rel_tol = if variant.separates_exponential() { 1e-9 } else { 1e-8 };
    QuadOptions { abs_tol: abs_tol.max(1e-13), rel_tol, max_intervals: 4000 }
}

fn integrand_at(sys: &DelaySystem, x0: f64, y: f64, variant: Variant, singular: &AtomicBool) -> f64 {
    let z = c64(x0, y);
    let v = if variant.separates_exponential() { sys.split_integrand(z) } else { sys.inverse_norm(z) };
    match v {
        Some(v) if v.is_finite() => v,
        _ => {
            singular.store(true, Ordering::Relaxed);
            0.0
        }
    }
}

/// `(1/2π)∫` of the integrand over `lo ≤ |y| ≤ hi`, with its error estimate.
///
/// `abs_tol` lets a segment appended to an existing integral be resolved only
/// relative to that integral.
fn band_integral(sys: &DelaySystem, x0: f64, variant: Variant, lo: f64, hi: f64, abs_tol: f64) -> Result<(f64, f64, bool)> {
    let opts = quad_options(abs_tol, variant);
    let singular = AtomicBool::new(false);
    let f = |y: f64| vec![integrand_at(sys, x0, y, variant, &singular)];
    let (value, error, converged) = if sys.real_data {
        let r = integrate_vec(f, lo, hi, opts);
        (2.0 * r.value[0], 2.0 * r.error, r.converged)
    } else {
        let up = integrate_vec(&f, lo, hi, opts);
        let down = integrate_vec(&f, -hi, -lo, opts);
        (up.value[0] + down.value[0], up.error + down.error, up.converged && down.converged)
    };
    if singular.load(Ordering::Relaxed) {
        return Err(Error::Infeasible(format!(
            "T(z) is singular on the segment Re z = {x0}; the contour crosses a characteristic root"
        )));
    }
    Ok((value / (2.0 * PI), error / (2.0 * PI), converged))
}

/// `I₀` and `C` for the given contour.
pub fn delay_terms(sys: &DelaySystem, p: &ContourParams, exponent: RadicalExponent) -> Result<DelayTerms> {
    let (i0, i0_error, converged) = if sys.has_delay_term() || !p.variant.separates_exponential() {
        band_integral(sys, p.x0, p.variant, 0.0, p.y0, 0.0)?
    } else {
        (0.0, 0.0, true)
    };
    let c = c_constant(sys.coupling, p.eta, p.tau, p.y0, p.beta, p.mode, p.variant, sys.cond_v, exponent)?;
    Ok(DelayTerms { params: *p, i0, i0_error, c, converged })
}

/// Choices that shape a delay bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayOptions {
    pub tail: TailForm,
    pub exponent: RadicalExponent,
    /// Fixed `y₀`; `None` scans a logarithmic mesh.
    pub y0: Option<f64>,
    /// Reference time of the `y₀` scan; defaults to `5τ`.
    pub t_ref: Option<f64>,
    pub mesh: usize,
    /// Span of the scan, as the ratio of the largest to smallest `y₀`.
    pub span: f64,
    /// The scan stops after this many consecutive candidates fail to improve.
    pub patience: usize,
}

impl Default for DelayOptions {
    fn default() -> Self {
        Self { tail: TailForm::Statement, exponent: RadicalExponent::Squared, y0: None, t_ref: None, mesh: 24, span: 1e3, patience: 4 }
    }
}

fn score(terms: &DelayTerms, t: f64, tail: TailForm) -> f64 {
    terms.contour_part(t, tail)
}

/// Integrals already computed during `y₀` scans, keyed by integrand, `x₀`
/// and `y₀`, so variants sharing an integrand share the work.
#[derive(Debug, Default)]
pub struct ScanCache {
    entries: HashMap<(bool, u64, u64), (f64, f64, bool)>,
}

/// Scans `y₀` on a logarithmic mesh above the first feasible value and keeps
/// the contour minimizing the contour part of the bound at the reference
/// time. Candidates sharing `x₀` reuse one cumulative integral.
pub fn auto_contour(sys: &DelaySystem, variant: Variant, opts: &DelayOptions) -> Result<DelayTerms> {
    auto_contour_with(sys, variant, opts, &mut ScanCache::default())
}

pub fn auto_contour_with(
    sys: &DelaySystem,
    variant: Variant,
    opts: &DelayOptions,
    cache: &mut ScanCache,
) -> Result<DelayTerms> {
    if !sys.has_delay_term() {
        return Err(Error::Infeasible("no delay coupling: the bound is the exponential itself".into()));
    }
    let (_, t_lim, a_lim) = limits(sys, sys.beta + 1.0, variant)?;
    if !(t_lim > 1.0) {
        return Err(Error::Infeasible("α(T) ≥ 0: no contour left of the imaginary axis".into()));
    }
    if !(a_lim > 1.0) {
        return Err(Error::Infeasible("α(A) ≥ 0: the contour cannot pass right of the spectrum of A".into()));
    }
    let t_ref = opts.t_ref.unwrap_or(5.0 * sys.tau);
    let y_min = (sys.beta + sys.coupling) * (1.0 + 1e-2);
    let count = opts.mesh.max(2);
    let ratio = opts.span.max(1.0 + 1e-9).powf(1.0 / (count - 1) as f64);
    let candidates: Vec<ContourParams> = (0..count)
        .filter_map(|k| choose_contour(sys, y_min * ratio.powi(k as i32), variant).ok())
        .collect();
    if candidates.is_empty() {
        return Err(Error::Infeasible("no feasible y0 on the scan mesh".into()));
    }
    let kind = variant.separates_exponential();
    let mut best: Option<(f64, DelayTerms)> = None;
    let mut worse_in_a_row = 0;
    let mut previous: Option<(f64, f64, (f64, f64, bool))> = None;
    for p in candidates {
        let key = (kind, p.x0.to_bits(), p.y0.to_bits());
        let (i0, i0_error, converged) = match cache.entries.get(&key) {
            Some(&hit) => hit,
            None => {
                let (lo, (base, base_err, base_ok)) = match previous {
                    Some((x0, y_prev, acc)) if x0 == p.x0 => (y_prev, acc),
                    _ => (0.0, (0.0, 0.0, true)),
                };
                let (v, e, ok) = band_integral(sys, p.x0, variant, lo, p.y0, 1e-10 * base)?;
                let entry = (base + v, base_err + e, base_ok && ok);
                cache.entries.insert(key, entry);
                entry
            }
        };
        previous = Some((p.x0, p.y0, (i0, i0_error, converged)));
        let c = c_constant(sys.coupling, p.eta, p.tau, p.y0, p.beta, p.mode, p.variant, sys.cond_v, opts.exponent)?;
        let terms = DelayTerms { params: p, i0, i0_error, c, converged };
        let s = score(&terms, t_ref, opts.tail);
        if best.as_ref().map_or(true, |(b, _)| s < *b) {
            best = Some((s, terms));
            worse_in_a_row = 0;
        } else {
            worse_in_a_row += 1;
            if worse_in_a_row >= opts.patience {
                break;
            }
        }
    }
    Ok(best.expect("at least one candidate").1)
}

/// Record of how a delay bound was built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayProvenance {
    pub variant: Variant,
    pub terms: DelayTerms,
    pub tail: TailForm,
    pub exponent: RadicalExponent,
    pub alpha_t: f64,
    pub alpha_t_converged: bool,
    pub alpha_a: f64,
    pub coupling: f64,
    pub cond_v: f64,
    /// History weight `∫₀^τ ‖Bφ(ν−τ)‖ dν` and `‖u₀‖` for solution bounds.
    pub history: Option<(f64, f64)>,
    pub notes: Vec<String>,
}

fn provenance(sys: &DelaySystem, terms: &DelayTerms, opts: &DelayOptions) -> DelayProvenance {
    let mut notes = Vec::new();
    notes.push(match opts.tail {
        TailForm::Statement => "tail term uses exp(x0 t) C tau/t".to_string(),
        TailForm::Proof => "tail term uses exp(x0 (t - tau)) C tau/t".to_string(),
    });
    if sys.mode == ContourMode::Diagonalizable {
        notes.push(match opts.exponent {
            RadicalExponent::Squared => "radical uses (tau (y0 - beta))^-2".to_string(),
            RadicalExponent::Printed => "radical uses (tau (y0 - beta))^-1".to_string(),
        });
    }
    if let Some(w) = &sys.alpha_t.warning {
        notes.push(w.clone());
    }
    DelayProvenance {
        variant: terms.params.variant,
        terms: *terms,
        tail: opts.tail,
        exponent: opts.exponent,
        alpha_t: sys.alpha_t.conservative(),
        alpha_t_converged: sys.alpha_t.converged,
        alpha_a: sys.alpha_a,
        coupling: sys.coupling,
        cond_v: sys.cond_v,
        history: None,
        notes,
    }
}

/// `‖Ψ(t)‖ ≤ F(t)` on the given times from precomputed terms.
pub fn fundamental_bound_from_terms(
    sys: &DelaySystem,
    terms: &DelayTerms,
    times: &[f64],
    opts: &DelayOptions,
) -> Result<BoundCurve> {
    check_times(times)?;
    let variant = terms.params.variant;
    if let Some(t) = times.iter().find(|&&t| t < sys.tau) {
        if variant.separates_exponential() {
            return Err(Error::Domain(format!(
                "t = {t} precedes the delay; there Ψ(t) = exp(At) exactly"
            )));
        }
        if *t <= 0.0 {
            return Err(Error::Domain("the bound is infinite at t = 0".into()));
        }
    }
    let values = times
        .iter()
        .map(|&t| {
            let expm = if variant.separates_exponential() { sys.expm_norm(t)? } else { 0.0 };
            Ok(expm + terms.contour_part(t, opts.tail))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        certified: terms.converged && sys.alpha_t.converged,
        provenance: Provenance::DelayContour(provenance(sys, terms, opts)),
    })
}

/// `‖Ψ(t)‖₂` bound for one variant; with no delay coupling the exponential
/// norm itself is returned.
pub fn fundamental_bound(sys: &DelaySystem, variant: Variant, times: &[f64], opts: &DelayOptions) -> Result<BoundCurve> {
    if !sys.has_delay_term() {
        check_times(times)?;
        let values = times.iter().map(|&t| sys.expm_norm(t)).collect::<Result<Vec<f64>>>()?;
        return Ok(BoundCurve { times: times.to_vec(), values, certified: true, provenance: Provenance::Exponential });
    }
    let terms = match opts.y0 {
        Some(y0) => delay_terms(sys, &choose_contour(sys, y0, variant)?, opts.exponent)?,
        None => auto_contour(sys, variant, opts)?,
    };
    fundamental_bound_from_terms(sys, &terms, times, opts)
}

/// Bounds for several variants, sharing integrals between variants that use
/// the same integrand.
pub fn fundamental_bounds(
    sys: &DelaySystem,
    variants: &[Variant],
    times: &[f64],
    opts: &DelayOptions,
) -> Vec<Result<BoundCurve>> {
    let mut cache = ScanCache::default();
    variants
        .iter()
        .map(|&v| {
            if !sys.has_delay_term() || opts.y0.is_some() {
                return fundamental_bound(sys, v, times, opts);
            }
            let terms = auto_contour_with(sys, v, opts, &mut cache)?;
            fundamental_bound_from_terms(sys, &terms, times, opts)
        })
        .collect()
}

/// Upper bounds for `sup ‖e^{As}‖` over windows of `[0, t_max]`.
///
/// Normal `A` uses `e^{α s}` directly. Otherwise `‖e^{As_k}‖` is tabulated on
/// a uniform mesh by repeated multiplication with `e^{AΔ}` (resynchronized
/// periodically), and every value between mesh points is bounded through the
/// logarithmic norm: `‖e^{As}‖ ≤ ‖e^{As_k}‖ e^{μ⁺(s − s_k)}`.
pub struct ExpmSup {
    alpha: Option<f64>,
    delta: f64,
    values: Vec<f64>,
    slack: f64,
}

impl ExpmSup {
    pub fn new(sys: &DelaySystem, t_max: f64) -> Result<Self> {
        if sys.normal_a {
            return Ok(Self { alpha: Some(sys.alpha_a), delta: 0.0, values: Vec::new(), slack: 1.0 });
        }
        let mu = linalg::log_norm(&sys.a)?.max(0.0);
        let steps = ((mu * t_max / 1e-3).ceil() as usize).clamp(1000, 200_000);
        let delta = t_max.max(f64::MIN_POSITIVE) / steps as f64;
        let step = linalg::expm(&sys.a, delta)?;
        let mut current = CMatrix::identity(sys.dim(), sys.dim());
        let mut values = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            if k > 0 {
                current = if k % 1000 == 0 { linalg::expm(&sys.a, k as f64 * delta)? } else { &current * &step };
            }
            values.push(linalg::norm2(&current));
        }
        Ok(Self { alpha: None, delta, values, slack: (mu * delta).exp() })
    }

    /// Upper bound for `sup_{lo ≤ s ≤ hi} ‖e^{As}‖`.
    pub fn sup(&self, lo: f64, hi: f64) -> f64 {
        if let Some(a) = self.alpha {
            return (a * lo).exp().max((a * hi).exp());
        }
        let last = self.values.len() - 1;
        let i0 = ((lo / self.delta).floor().max(0.0) as usize).min(last);
        let i1 = ((hi / self.delta).ceil() as usize).min(last);
        let m = self.values[i0..=i1].iter().cloned().fold(0.0, f64::max);
        m * self.slack
    }
}

/// `∫₀^τ ‖Bφ(ν − τ)‖ dν` for the given history.
pub fn history_weight(b: &CMatrix, history: &History, tau: f64) -> f64 {
    let n = b.nrows();
    let f = |nu: f64| vec![(b * history.eval(nu - tau, tau, n)).norm()];
    let breaks: Vec<f64> = match history {
        History::Samples { values, .. } => {
            let last = values.len() - 1;
            (0..=last).map(|k| tau * k as f64 / last as f64).collect()
        }
        _ => vec![0.0, tau],
    };
    integrate_vec_split(f, &breaks, QuadOptions::default()).value[0]
}

/// `‖u(t)‖ ≤ k₁(t)‖u₀‖ + k₂(t) ∫₀^τ ‖Bφ(ν − τ)‖ dν` with the piecewise
/// `k₂` built from windows of `‖e^{As}‖` and the contour part of the bound.
pub fn history_bound(
    sys: &DelaySystem,
    terms: &DelayTerms,
    u0_norm: f64,
    phi_weight: f64,
    times: &[f64],
    opts: &DelayOptions,
) -> Result<BoundCurve> {
    check_times(times)?;
    let tau = sys.tau;
    let t_max = times.last().copied().unwrap_or(0.0);
    let table = ExpmSup::new(sys, t_max)?;
    let has_expm = terms.params.variant.separates_exponential() || !sys.has_delay_term();
    let delay = |s: f64| if sys.has_delay_term() { terms.contour_part(s, opts.tail) } else { 0.0 };
    let values = times
        .iter()
        .map(|&t| -> Result<f64> {
            let k1 = if t < tau || !sys.has_delay_term() {
                sys.expm_norm(t)?
            } else {
                let e = if has_expm { sys.expm_norm(t)? } else { 0.0 };
                e + delay(t)
            };
            let expm_window = |lo: f64, hi: f64| if has_expm { table.sup(lo, hi) } else { 0.0 };
            let k2 = if t < tau {
                table.sup(0.0, t)
            } else if !sys.has_delay_term() {
                table.sup(t - tau, t)
            } else if t < 2.0 * tau {
                table.sup(t - tau, tau) + expm_window(tau, t) + delay(tau)
            } else {
                expm_window(t - tau, t) + delay(t - tau)
            };
            Ok(k1 * u0_norm + k2 * phi_weight)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut prov = provenance(sys, terms, opts);
    prov.history = Some((phi_weight, u0_norm));
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        certified: terms.converged && sys.alpha_t.converged,
        provenance: Provenance::DelayContour(prov),
    })
}

/// One point of the contour with the quantities its validity rests on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSample {
    pub z: C64,
    pub sigma_min: f64,
    /// `‖R(z)‖ ‖B‖ |e^{−τz}|`, below one wherever the Neumann bound applies.
    pub neumann: f64,
}

/// Samples the straight segment and both curved branches up to `y_max`.
pub fn contour_samples(sys: &DelaySystem, p: &ContourParams, count: usize, y_max: f64) -> Result<Vec<ContourSample>> {
    let straight = count / 4;
    let curved = count - straight;
    let mut zs: Vec<C64> = (0..straight)
        .map(|k| c64(p.x0, -p.y0 + 2.0 * p.y0 * (k as f64 + 0.5) / straight as f64))
        .collect();
    let ratio = (y_max / p.y0).max(1.0);
    for k in 0..curved {
        let frac = (k / 2) as f64 / ((curved / 2).max(2) - 1) as f64;
        let y = p.y0 * ratio.powf(frac);
        let y = if k % 2 == 0 { y } else { -y };
        zs.push(c64(contour_x(y, p)?, y));
    }
    Ok(zs
        .into_iter()
        .map(|z| {
            let sigma_min = linalg::sigma_min(&sys.char_matrix(z)).unwrap_or(0.0);
            let r = linalg::norm2(&sys.resolvent(z));
            ContourSample { z, sigma_min, neumann: r * sys.norm_b * (-z * sys.tau).exp().norm() }
        })
        .collect())
}

/// Residuals of contour-integral reconstructions of `Ψ(t)` against the
/// simulated fundamental solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeformationCheck {
    pub t: f64,
    pub residual_vertical: f64,
    pub residual_deformed: f64,
    /// `e^{At}` plus the contour integral of `T^{-1} − R` over the bent contour.
    pub residual_split: f64,
    pub converged: bool,
}

fn flatten(m: &CMatrix) -> Vec<f64> {
    m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)).collect()
}

fn unflatten(v: &[f64], n: usize) -> CMatrix {
    let half = n * n;
    CMatrix::from_iterator(n, n, (0..half).map(|i| c64(v[i], v[half + i])))
}

/// Reconstructs `Ψ(t)` from the inverse Laplace transform of `T^{-1}` along
/// the vertical line `Re z = γ` and along the bent contour, both truncated
/// at `|Im z| = y_trunc`, and compares with RK4 at step `h`.
///
/// The slowly decaying part `R + e^{−τz} R B R` is inverted exactly:
/// `e^{At}` plus, for `t > τ`, the off-diagonal block of
/// `exp([[A, B], [0, A]](t − τ))`. Only the remainder
/// `e^{−2τz} T^{-1} B R B R` is integrated numerically.
pub fn verify_contour_deformation(
    sys: &DelaySystem,
    p: &ContourParams,
    t: f64,
    gamma: f64,
    y_trunc: f64,
    h: f64,
) -> Result<DeformationCheck> {
    if !(gamma > sys.alpha_t.conservative()) || !(gamma > sys.alpha_a) {
        return Err(Error::Precondition(format!("γ = {gamma} must lie right of every root")));
    }
    if !(y_trunc > p.y0) {
        return Err(Error::Precondition("truncation height must exceed y0".into()));
    }
    let n = sys.dim();
    let tau = sys.tau;
    let (_, psi) = simulate::fundamental_solution(&sys.a, &sys.b, tau, h, t, usize::MAX)?;
    let simulated = psi.last().expect("at least the initial state").clone();

    let mut exact = linalg::expm(&sys.a, t)?;
    if t > tau {
        let mut big = CMatrix::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&sys.a);
        big.view_mut((0, n), (n, n)).copy_from(&sys.b);
        big.view_mut((n, n), (n, n)).copy_from(&sys.a);
        exact += linalg::expm(&big, t - tau)?.view((0, n), (n, n)).into_owned();
    }
    let remainder = |z: C64| -> CMatrix {
        let r = sys.resolvent(z);
        let brbr = &sys.b * &r * &sys.b * &r;
        let x = linalg::solve(&sys.char_matrix(z), &brbr).unwrap_or_else(|_| CMatrix::zeros(n, n));
        x * (-2.0 * tau * z).exp()
    };
    let first_order = |z: C64| -> CMatrix {
        let br = &sys.b * sys.resolvent(z);
        let x = linalg::solve(&sys.char_matrix(z), &br).unwrap_or_else(|_| CMatrix::zeros(n, n));
        x * (-tau * z).exp()
    };
    let opts = QuadOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_intervals: 6000 };
    let breaks = [-y_trunc, -p.y0, 0.0, p.y0, y_trunc];
    let point = |y: f64| -> (C64, C64) {
        if y.abs() <= p.y0 {
            (c64(p.x0, y), c64(0.0, 1.0))
        } else {
            let x = contour_x(y, p).expect("outside the straight segment");
            let slope = -1.0 / (tau * (y.abs() - p.beta)) * y.signum();
            (c64(x, y), c64(slope, 1.0))
        }
    };

    let vertical = integrate_vec_split(
        |y| {
            let z = c64(gamma, y);
            flatten(&(remainder(z) * ((z * t).exp() / (2.0 * PI))))
        },
        &[-y_trunc, 0.0, y_trunc],
        opts,
    );
    let deformed = integrate_vec_split(
        |y| {
            let (z, dz) = point(y);
            flatten(&(remainder(z) * ((z * t).exp() * dz / c64(0.0, 2.0 * PI))))
        },
        &breaks,
        opts,
    );
    let split = integrate_vec_split(
        |y| {
            let (z, dz) = point(y);
            flatten(&(first_order(z) * ((z * t).exp() * dz / c64(0.0, 2.0 * PI))))
        },
        &breaks,
        opts,
    );
    let psi_vertical = &exact + unflatten(&vertical.value, n);
    let psi_deformed = &exact + unflatten(&deformed.value, n);
    let psi_split = linalg::expm(&sys.a, t)? + unflatten(&split.value, n);
    let res = |m: &CMatrix| linalg::norm2(&(m - &simulated));
    Ok(DeformationCheck {
        t,
        residual_vertical: res(&psi_vertical),
        residual_deformed: res(&psi_deformed),
        residual_split: res(&psi_split),
        converged: vertical.converged && deformed.converged && split.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diag;
    use approx::assert_abs_diff_eq;

    fn scalar_system() -> DelaySystem {
        DelaySystem::new(real_diag(&[-1.0]), real_diag(&[-0.5]), 1.0, 24).unwrap()
    }

    #[test]
    fn neumann_examples() {
        assert_eq!(neumann_inverse_bound(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(neumann_inverse_bound(0.5, 1.0).unwrap(), 1.0);
        assert!(neumann_inverse_bound(1.0, 1.0).is_err());
    }

    #[test]
    fn contour_abscissa_examples() {
        let p = ContourParams {
            y0: 2.0,
            eta: 0.5,
            tau: 1.0,
            beta: 0.0,
            x0: 0.0,
            mode: ContourMode::Hermitian,
            variant: Variant::Split,
        };
        assert_abs_diff_eq!(contour_x(2.0, &p).unwrap(), 0.0, epsilon = 1e-15);
        let q = ContourParams { eta: std::f64::consts::E, y0: 1.0, ..p };
        assert_abs_diff_eq!(contour_x(1.0, &q).unwrap(), -1.0, epsilon = 1e-15);
        assert!(contour_x(0.5, &q).is_err());
    }

    #[test]
    fn c_constant_examples() {
        let vert = c_constant(0.5, 1.0, 1.0, 3.0, 0.0, ContourMode::Hermitian, Variant::Vertical, 1.0, RadicalExponent::Squared)
            .unwrap();
        assert_abs_diff_eq!(vert, 1.0 / PI, epsilon = 1e-15);
        let split = c_constant(0.5, 1.0, 1.0, 1e12, 0.0, ContourMode::Hermitian, Variant::Split, 1.0, RadicalExponent::Squared)
            .unwrap();
        assert_abs_diff_eq!(split, vert, epsilon = 1e-12);
        assert!(c_constant(2.0, 0.5, 1.0, 3.0, 0.0, ContourMode::Hermitian, Variant::Split, 1.0, RadicalExponent::Squared)
            .is_err());
    }

    #[test]
    fn scalar_contour_is_admissible() {
        let sys = scalar_system();
        let p = choose_contour(&sys, 4.0, Variant::Split).unwrap();
        let report = check_chain(&sys, p.y0, p.eta, Variant::Split).unwrap();
        assert!(report.holds);
        assert!(p.x0 < 0.0 && p.x0 > sys.alpha_t.conservative());
        let tighter = contour_params(&sys, 4.0, p.eta * 0.99, Variant::Split).unwrap();
        assert!(tighter.x0 > p.x0);
    }

    #[test]
    fn zero_coupling_is_exponential() {
        let sys = DelaySystem::new(real_diag(&[-1.0, -2.0]), CMatrix::zeros(2, 2), 1.0, 8).unwrap();
        let b = fundamental_bound(&sys, Variant::Split, &[1.0, 2.0], &DelayOptions::default()).unwrap();
        assert_abs_diff_eq!(b.values[1], (-2.0f64).exp(), epsilon = 1e-15);
        let terms = DelayTerms {
            params: ContourParams {
                y0: 1.0,
                eta: 1.0,
                tau: 1.0,
                beta: 0.0,
                x0: 0.0,
                mode: ContourMode::Hermitian,
                variant: Variant::Split,
            },
            i0: 0.0,
            i0_error: 0.0,
            c: 0.0,
            converged: true,
        };
        let h = history_bound(&sys, &terms, 1.0, 0.0, &[0.0, 0.5, 3.0], &DelayOptions::default()).unwrap();
        assert_abs_diff_eq!(h.values[2], (-3.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn split_time_domain() {
        let sys = scalar_system();
        let opts = DelayOptions { y0: Some(4.0), ..Default::default() };
        assert!(matches!(fundamental_bound(&sys, Variant::Split, &[0.5], &opts), Err(Error::Domain(_))));
        assert!(fundamental_bound(&sys, Variant::Nonsplit, &[0.5], &opts).is_ok());
    }
}
