//! Transient bounds for linear ODEs, higher-order ODEs and difference
//! equations from the geometry of pseudospectra.

use std::f64::consts::PI;

use serde::Serialize;

use crate::ddebounds::DelayProvenance;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64};
use crate::matfun::{self, HodeProblem, MatFunction, MatrixPoly, Recurrence};
use crate::pseudo::{self, GeometryOptions, GridSpec, LevelGeometry};

/// One contour term `weight · L e^{t x}/(2π ε_eff)` (or `L r^n/(2π ε_eff)`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourTerm {
    /// Block index `j` of the initial datum the term multiplies.
    pub index: usize,
    /// `‖y^{(j)}(0)‖` or `‖y_{−j}‖`.
    pub weight: f64,
    /// Which function's level set was traced.
    pub form: TermForm,
    pub geometry: LevelGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermForm {
    /// `zI − M`.
    Resolvent,
    /// A block of `(zI − M)^{-1}` for the companion matrix.
    CompanionBlock,
    /// `|z|^N ‖P(z)^{-1}‖`, equal to the leading block in the difference case.
    LeadingPower,
    /// `‖A_N‖ |z|^{j−1} ‖P(z)^{-1}‖`, a majorant of the block.
    Majorant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    ResolventContour { epsilon: f64, terms: Vec<ContourTerm> },
    DelayContour(DelayProvenance),
    /// No delayed term: the value is `‖e^{At}‖` itself.
    Exponential,
}

/// Upper-bound values on a time (or step) grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// False when a traced level set failed the resolution-doubling check.
    pub certified: bool,
    pub provenance: Provenance,
}

impl BoundCurve {
    pub fn sup(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::Domain(format!("times must be finite and nonnegative, got {t}")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(())
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

/// Poles of `(zI − M)^{-1}` and a disk radius around them whose union covers
/// `Λ_ε(M)`: the Bauer–Fike radius `κ(V)ε`, or a disk containing
/// `{|z| ≤ ‖M‖ + ε}` when that is smaller or `M` is not diagonalizable.
pub fn spectral_seeds(m: &CMatrix, epsilon: f64) -> Result<(Vec<C64>, f64)> {
    let ed = linalg::eig_vectors(m)?;
    let kappa = if ed.residual <= 1e-8 { linalg::cond2(&ed.vectors)? } else { f64::INFINITY };
    let norm_radius = 2.0 * (linalg::norm2(m) + epsilon);
    Ok((ed.values, (1.05 * kappa * epsilon).min(norm_radius)))
}

/// Contour geometry of `Λ_ε(M)`: exact disks for normal `M`, traced otherwise.
pub fn pencil_geometry(m: &CMatrix, epsilon: f64, opts: GeometryOptions) -> Result<LevelGeometry> {
    check_epsilon(epsilon)?;
    if linalg::is_normal(m, 1e-12) {
        return Ok(pseudo::normal_disk_geometry(&linalg::eig(m)?, epsilon));
    }
    let (poles, radius) = spectral_seeds(m, epsilon)?;
    pseudo::level_geometry(&MatFunction::pencil(m.clone())?, epsilon, &poles, radius, opts)
}

/// `‖e^{tM}‖ ≤ L_ε e^{t α_ε}/(2πε)` on the given times.
pub fn ode_upper_bound(m: &CMatrix, epsilon: f64, times: &[f64], opts: GeometryOptions) -> Result<BoundCurve> {
    check_times(times)?;
    let geometry = pencil_geometry(m, epsilon, opts)?;
    let values = times.iter().map(|&t| geometry.exp_bound(t)).collect();
    let certified = geometry.certified;
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        certified,
        provenance: Provenance::ResolventContour {
            epsilon,
            terms: vec![ContourTerm { index: 0, weight: 1.0, form: TermForm::Resolvent, geometry }],
        },
    })
}

/// Window around `Λ_ε(M)` derived from [`spectral_seeds`].
pub fn pencil_window(m: &CMatrix, epsilon: f64, n: usize) -> Result<GridSpec> {
    let (poles, radius) = spectral_seeds(m, epsilon)?;
    let r = 1.1 * radius.max(epsilon);
    let re_lo = poles.iter().map(|z| z.re).fold(f64::INFINITY, f64::min) - r;
    let re_hi = poles.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max) + r;
    let im_lo = poles.iter().map(|z| z.im).fold(f64::INFINITY, f64::min) - r;
    let im_hi = poles.iter().map(|z| z.im).fold(f64::NEG_INFINITY, f64::max) + r;
    GridSpec::with_resolution(re_lo, re_hi, im_lo, im_hi, n)
}

/// `α_ε(M)`: exact for normal `M`, otherwise grid search seeded with the
/// eigenvalues, plus refinement.
pub fn pencil_abscissa(m: &CMatrix, epsilon: f64, grid: usize) -> Result<f64> {
    check_epsilon(epsilon)?;
    if linalg::is_normal(m, 1e-12) {
        return Ok(linalg::spectral_abscissa(m)? + epsilon);
    }
    let window = pencil_window(m, epsilon, grid)?;
    let t = MatFunction::pencil(m.clone())?;
    let field = pseudo::compute_field(&t, window);
    pseudo::pseudo_abscissa_seeded(&t, epsilon, &field, &linalg::eig(m)?)
}

/// `sup_{t≥0} e^{−ωt}‖e^{tM}‖ ≥ (α_ε − ω)/ε`, clipped at zero.
pub fn ode_lower_bound(m: &CMatrix, epsilon: f64, omega: f64) -> Result<f64> {
    let alpha = pencil_abscissa(m, epsilon, 400)?;
    Ok(((alpha - omega) / epsilon).max(0.0))
}

fn combine_exp(times: &[f64], terms: &[ContourTerm]) -> Vec<f64> {
    times
        .iter()
        .map(|&t| terms.iter().map(|term| term.weight * term.geometry.exp_bound(t)).sum())
        .collect()
}

/// `‖y(t)‖ ≤ Σ_j L_ε^{(j)} e^{t α_ε(T_j)}/(2πε) ‖y^{(j)}(0)‖` for
/// `y^{(n)} = Σ_j A_j y^{(j)}`; terms with zero initial data are dropped.
pub fn hode_upper_bound(h: &HodeProblem, epsilon: f64, times: &[f64], opts: GeometryOptions) -> Result<BoundCurve> {
    check_times(times)?;
    check_epsilon(epsilon)?;
    if h.recurrence != Recurrence::Differential {
        return Err(Error::Precondition("expected a differential recurrence".into()));
    }
    let weights: Vec<f64> = h.initial.iter().map(|v| v.norm()).collect();
    let mut terms = Vec::new();
    if h.blocks() == 1 {
        if weights[0] > 0.0 {
            let geometry = pencil_geometry(&h.coeffs[0], epsilon, opts)?;
            terms.push(ContourTerm { index: 0, weight: weights[0], form: TermForm::Resolvent, geometry });
        }
    } else {
        let m = matfun::companion(h);
        let (poles, radius) = spectral_seeds(&m, epsilon)?;
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let t = matfun::transfer_block(h, j)?;
            let geometry = pseudo::level_geometry(&t, epsilon, &poles, radius, opts)?;
            terms.push(ContourTerm { index: j, weight: w, form: TermForm::CompanionBlock, geometry });
        }
    }
    let values = combine_exp(times, &terms);
    let certified = terms.iter().all(|t| t.geometry.certified);
    Ok(BoundCurve {
        times: times.to_vec(),
        values,
        certified,
        provenance: Provenance::ResolventContour { epsilon, terms },
    })
}

/// `‖y_n‖ ≤ Σ_j L_ε^{(j)} ρ_ε(T_j)^n/(2πε) ‖y_{−j}‖` for
/// `y_{n+1} = Σ_j A_j y_{n−j}`.
///
/// The leading term uses `|z|^N ‖P(z)^{-1}‖`, which equals the block norm.
/// For `j ≥ 1`, `majorant` replaces the block by `‖A_N‖ |z|^{j−1} ‖P(z)^{-1}‖`,
/// which requires all coefficients except `A_0` and `A_N` to vanish; without
/// it the companion block itself is traced.
pub fn diffeq_upper_bound(
    h: &HodeProblem,
    epsilon: f64,
    steps: &[u32],
    majorant: bool,
    opts: GeometryOptions,
) -> Result<BoundCurve> {
    check_epsilon(epsilon)?;
    if h.recurrence != Recurrence::Difference {
        return Err(Error::Precondition("expected a difference recurrence".into()));
    }
    if steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("steps must be strictly increasing".into()));
    }
    let weights: Vec<f64> = h.initial.iter().map(|v| v.norm()).collect();
    let mut terms = Vec::new();
    if h.blocks() == 1 {
        if weights[0] > 0.0 {
            let geometry = pencil_geometry(&h.coeffs[0], epsilon, opts)?;
            terms.push(ContourTerm { index: 0, weight: weights[0], form: TermForm::Resolvent, geometry });
        }
    } else {
        if majorant && weights[1..].iter().any(|&w| w > 0.0) && !h.endpoint_structure() {
            return Err(Error::Unsupported(
                "the power majorant needs every coefficient except the first and last to vanish".into(),
            ));
        }
        let big_n = h.blocks() - 1;
        let m = matfun::companion(h);
        let (poles, radius) = spectral_seeds(&m, epsilon)?;
        let tf = matfun::transfer_functions(h);
        let p: MatrixPoly = tf[0].0.clone();
        let tail_scale = linalg::norm2(&h.coeffs[big_n]);
        for (j, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (t, form) = if j == 0 {
                (MatFunction::scaled_power(p.clone(), 1.0, big_n as i32)?, TermForm::LeadingPower)
            } else if majorant {
                (MatFunction::scaled_power(p.clone(), tail_scale, j as i32 - 1)?, TermForm::Majorant)
            } else {
                (matfun::transfer_block(h, j)?, TermForm::CompanionBlock)
            };
            let geometry = pseudo::level_geometry(&t, epsilon, &poles, radius, opts)?;
            terms.push(ContourTerm { index: j, weight: w, form, geometry });
        }
    }
    let values = steps
        .iter()
        .map(|&n| terms.iter().map(|term| term.weight * term.geometry.power_bound(n)).sum())
        .collect();
    let certified = terms.iter().all(|t| t.geometry.certified);
    Ok(BoundCurve {
        times: steps.iter().map(|&n| n as f64).collect(),
        values,
        certified,
        provenance: Provenance::ResolventContour { epsilon, terms },
    })
}

/// Pointwise minimum over curves sharing a time grid, with the index of the
/// minimizing curve.
pub fn envelope(curves: &[BoundCurve]) -> Result<Vec<(f64, usize)>> {
    let first = curves.first().ok_or_else(|| Error::Precondition("no curves to combine".into()))?;
    if curves.iter().any(|c| c.times != first.times) {
        return Err(Error::Dimension("curves must share one time grid".into()));
    }
    Ok((0..first.times.len())
        .map(|i| {
            curves
                .iter()
                .enumerate()
                .map(|(k, c)| (c.values[i], k))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("at least one curve")
        })
        .collect())
}

/// Logarithmic ε-mesh `{10^{−k/2}}` for `k` in the given range.
pub fn epsilon_mesh(k_lo: u32, k_hi: u32) -> Vec<f64> {
    (k_lo..=k_hi).map(|k| 10f64.powf(-(k as f64) / 2.0)).collect()
}

/// `L/(2π ε_eff)`, the constant in front of the growth factor.
pub fn contour_constant(g: &LevelGeometry) -> f64 {
    g.length / (2.0 * PI * g.eps_eff)
}
