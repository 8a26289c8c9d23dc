//! Structured matrix-valued functions `T(z)` and their resolvent norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector, Lu, C64};

/// `P(z) = Σ_k C_k z^k` with square coefficients of a common order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPoly {
    coeffs: Vec<CMatrix>,
}

impl MatrixPoly {
    /// Coefficients in ascending powers of `z`.
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Dimension("matrix polynomial needs at least one coefficient".into()))?;
        let k = linalg::ensure_square(first, "polynomial coefficient")?;
        for c in &coeffs {
            if c.shape() != (k, k) {
                return Err(Error::Dimension(format!(
                    "polynomial coefficients must all be {k}x{k}, found {}x{}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            linalg::check_finite(c)?;
        }
        Ok(Self { coeffs })
    }

    pub fn block(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    /// `Σ_k C_k z^k` over the nonzero coefficients only, so sparse
    /// polynomials of high degree stay cheap.
    pub fn eval(&self, z: C64) -> CMatrix {
        let k = self.block();
        let mut acc = CMatrix::zeros(k, k);
        let mut power = c64(1.0, 0.0);
        let mut reached = 0;
        for (d, c) in self.coeffs.iter().enumerate() {
            if c.iter().all(|x| *x == C64::default()) {
                continue;
            }
            power *= z.powu((d - reached) as u32);
            reached = d;
            acc.zip_apply(c, |a, b| *a += b * power);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatFunction {
    /// `zI − M`.
    Pencil { m: CMatrix },
    /// `zI − A − B e^{−τz}`.
    DelayChar { a: CMatrix, b: CMatrix, tau: f64 },
    MatrixPoly(MatrixPoly),
    /// Known only through its inverse, the `(out_block, in_block)` block of
    /// `(zI − M)^{-1}` for a partition of `M` into `block`-sized blocks.
    TransferBlock { m: CMatrix, out_block: usize, in_block: usize, block: usize },
    /// Known only through the inverse-norm majorant `scale·|z|^power·‖P(z)^{-1}‖`.
    ScaledPower { poly: MatrixPoly, scale: f64, power: i32 },
}

impl MatFunction {
    pub fn pencil(m: CMatrix) -> Result<Self> {
        linalg::ensure_square(&m, "pencil matrix")?;
        linalg::check_finite(&m)?;
        Ok(Self::Pencil { m })
    }

    pub fn delay(a: CMatrix, b: CMatrix, tau: f64) -> Result<Self> {
        let n = linalg::ensure_square(&a, "A")?;
        if b.shape() != (n, n) {
            return Err(Error::Dimension(format!("B must be {n}x{n}, got {}x{}", b.nrows(), b.ncols())));
        }
        linalg::check_finite(&a)?;
        linalg::check_finite(&b)?;
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("delay must be positive and finite, got {tau}")));
        }
        Ok(Self::DelayChar { a, b, tau })
    }

    pub fn transfer_block(m: CMatrix, out_block: usize, in_block: usize, block: usize) -> Result<Self> {
        let n = linalg::ensure_square(&m, "transfer matrix")?;
        if block == 0 || n % block != 0 {
            return Err(Error::Dimension(format!("block size {block} does not partition order {n}")));
        }
        let blocks = n / block;
        if out_block >= blocks || in_block >= blocks {
            return Err(Error::Dimension(format!(
                "block indices ({out_block}, {in_block}) outside a {blocks}-block partition"
            )));
        }
        linalg::check_finite(&m)?;
        Ok(Self::TransferBlock { m, out_block, in_block, block })
    }

    pub fn scaled_power(poly: MatrixPoly, scale: f64, power: i32) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("majorant scale must be finite and nonnegative, got {scale}")));
        }
        Ok(Self::ScaledPower { poly, scale, power })
    }

    /// Order of the square matrices `T(z)` (or of the inverse block).
    pub fn dim(&self) -> usize {
        match self {
            Self::Pencil { m } => m.nrows(),
            Self::DelayChar { a, .. } => a.nrows(),
            Self::MatrixPoly(p) => p.block(),
            Self::TransferBlock { block, .. } => *block,
            Self::ScaledPower { poly, .. } => poly.block(),
        }
    }

    /// All defining data real, so `‖T(z̄)^{-1}‖ = ‖T(z)^{-1}‖`.
    pub fn is_real_data(&self) -> bool {
        match self {
            Self::Pencil { m } => linalg::is_real(m),
            Self::DelayChar { a, b, .. } => linalg::is_real(a) && linalg::is_real(b),
            Self::MatrixPoly(p) => p.coeffs().iter().all(linalg::is_real),
            Self::TransferBlock { m, .. } => linalg::is_real(m),
            Self::ScaledPower { poly, .. } => poly.coeffs().iter().all(linalg::is_real),
        }
    }

    pub fn eval(&self, z: C64) -> Result<CMatrix> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain("evaluation point must be finite".into()));
        }
        match self {
            Self::Pencil { m } => Ok(shift(m, z)),
            Self::DelayChar { a, b, tau } => {
                let decay = (-z * *tau).exp();
                Ok(shift(a, z) - b.map(|x| x * decay))
            }
            Self::MatrixPoly(p) => Ok(p.eval(z)),
            Self::TransferBlock { .. } => {
                Err(Error::Unsupported("a transfer block is defined only through its inverse".into()))
            }
            Self::ScaledPower { .. } => {
                Err(Error::Unsupported("a scaled-power majorant is defined only through its inverse norm".into()))
            }
        }
    }

    /// `‖T(z)^{-1}‖₂`, or `+∞` where `T(z)` is singular.
    pub fn resolvent_norm(&self, z: C64) -> f64 {
        match self {
            Self::Pencil { .. } | Self::DelayChar { .. } | Self::MatrixPoly(_) => {
                let t = self.eval(z).expect("evaluable form");
                invert_sigma(linalg::sigma_min(&t).expect("square"))
            }
            Self::TransferBlock { m, out_block, in_block, block } => {
                let k = *block;
                let lu = Lu::new(&shift(m, z)).expect("square");
                if lu.has_zero_pivot() {
                    return f64::INFINITY;
                }
                let n = m.nrows();
                let mut sub = CMatrix::zeros(k, k);
                let mut col = vec![C64::default(); n];
                for c in 0..k {
                    col.iter_mut().for_each(|x| *x = C64::default());
                    col[in_block * k + c] = c64(1.0, 0.0);
                    lu.solve_in_place(&mut col);
                    for r in 0..k {
                        sub[(r, c)] = col[out_block * k + r];
                    }
                }
                let v = linalg::norm2(&sub);
                if v.is_finite() { v } else { f64::INFINITY }
            }
            Self::ScaledPower { poly, scale, power } => {
                let inner = invert_sigma(linalg::sigma_min(&poly.eval(z)).expect("square"));
                let r = z.norm();
                if *power < 0 && r == 0.0 {
                    return f64::INFINITY;
                }
                let v = inner * scale * r.powi(*power);
                if v.is_nan() { f64::INFINITY } else { v }
            }
        }
    }

    /// `1/‖T(z)^{-1}‖`, the quantity whose sublevel sets are pseudospectra.
    pub fn sigma(&self, z: C64) -> f64 {
        let r = self.resolvent_norm(z);
        if r.is_infinite() { 0.0 } else { 1.0 / r }
    }
}

fn invert_sigma(s: f64) -> f64 {
    if s > 0.0 { 1.0 / s } else { f64::INFINITY }
}

/// `zI − m`.
pub fn shift(m: &CMatrix, z: C64) -> CMatrix {
    let mut t = -m.clone();
    for i in 0..m.nrows() {
        t[(i, i)] += z;
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recurrence {
    /// `y^{(n)} = Σ_j A_j y^{(j)}` with initial derivatives `y^{(j)}(0)`.
    Differential,
    /// `y_{n+1} = Σ_j A_j y_{n−j}` with initial samples `y_0, y_{−1}, …`.
    Difference,
}

/// A higher-order linear system with its initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct HodeProblem {
    pub coeffs: Vec<CMatrix>,
    pub initial: Vec<CVector>,
    pub recurrence: Recurrence,
}

impl HodeProblem {
    pub fn new(coeffs: Vec<CMatrix>, initial: Vec<CVector>, recurrence: Recurrence) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Dimension("at least one coefficient matrix is required".into()))?;
        let k = linalg::ensure_square(first, "coefficient")?;
        for c in &coeffs {
            if c.shape() != (k, k) {
                return Err(Error::Dimension(format!("coefficients must all be {k}x{k}")));
            }
            linalg::check_finite(c)?;
        }
        if initial.len() != coeffs.len() {
            return Err(Error::Dimension(format!(
                "{} initial vectors supplied for {} coefficients",
                initial.len(),
                coeffs.len()
            )));
        }
        if let Some(v) = initial.iter().find(|v| v.len() != k) {
            return Err(Error::Dimension(format!("initial vector of length {} for block size {k}", v.len())));
        }
        Ok(Self { coeffs, initial, recurrence })
    }

    pub fn block(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// Number of stacked blocks in the first-order form.
    pub fn blocks(&self) -> usize {
        self.coeffs.len()
    }

    /// Stacked initial state of the first-order form.
    pub fn initial_state(&self) -> CVector {
        let k = self.block();
        let mut x = CVector::zeros(k * self.blocks());
        for (j, v) in self.initial.iter().enumerate() {
            x.rows_mut(j * k, k).copy_from(v);
        }
        x
    }

    /// Only the first and last coefficients nonzero: the structure produced by
    /// forward-Euler discretization of a single-delay equation.
    pub fn endpoint_structure(&self) -> bool {
        let n = self.coeffs.len();
        n >= 2 && self.coeffs[1..n - 1].iter().all(|c| c.iter().all(|z| *z == C64::default()))
    }
}

/// Block companion matrix of the first-order form.
pub fn companion(h: &HodeProblem) -> CMatrix {
    let k = h.block();
    let n = h.blocks();
    let mut m = CMatrix::zeros(n * k, n * k);
    let id = CMatrix::identity(k, k);
    match h.recurrence {
        Recurrence::Differential => {
            for j in 0..n - 1 {
                m.view_mut((j * k, (j + 1) * k), (k, k)).copy_from(&id);
            }
            for (j, a) in h.coeffs.iter().enumerate() {
                m.view_mut(((n - 1) * k, j * k), (k, k)).copy_from(a);
            }
        }
        Recurrence::Difference => {
            for (j, a) in h.coeffs.iter().enumerate() {
                m.view_mut((0, j * k), (k, k)).copy_from(a);
            }
            for j in 1..n {
                m.view_mut((j * k, (j - 1) * k), (k, k)).copy_from(&id);
            }
        }
    }
    m
}

/// Pairs `(P, X_j)` with `T_j(z)^{-1} = P(z)^{-1} X_j(z)`, where `T_j^{-1}` is
/// the `(0, j)` block of `(zI − M)^{-1}` for the companion matrix `M`.
pub fn transfer_functions(h: &HodeProblem) -> Vec<(MatrixPoly, MatrixPoly)> {
    let k = h.block();
    let n = h.blocks();
    let id = CMatrix::identity(k, k);
    let zero = CMatrix::zeros(k, k);
    let mut p = vec![zero.clone(); n + 1];
    p[n] = id.clone();
    let mut xs: Vec<Vec<CMatrix>> = Vec::with_capacity(n);
    match h.recurrence {
        Recurrence::Differential => {
            for (j, a) in h.coeffs.iter().enumerate() {
                p[j] = -a.clone();
            }
            for j in 0..n {
                let mut x = vec![zero.clone(); n - j];
                x[n - 1 - j] = id.clone();
                for kk in j + 1..n {
                    x[kk - 1 - j] -= &h.coeffs[kk];
                }
                xs.push(x);
            }
        }
        Recurrence::Difference => {
            let big_n = n - 1;
            for (j, a) in h.coeffs.iter().enumerate() {
                p[big_n - j] -= a;
            }
            let mut x0 = vec![zero.clone(); big_n + 1];
            x0[big_n] = id.clone();
            xs.push(x0);
            for j in 1..n {
                let mut x = vec![zero.clone(); big_n + j];
                for kk in j..=big_n {
                    x[big_n + j - 1 - kk] += &h.coeffs[kk];
                }
                xs.push(x);
            }
        }
    }
    let p = MatrixPoly::new(p).expect("validated coefficients");
    xs.into_iter()
        .map(|x| (p.clone(), MatrixPoly::new(x).expect("validated coefficients")))
        .collect()
}

/// `T_j` of the companion form as a resolvent block.
pub fn transfer_block(h: &HodeProblem, j: usize) -> Result<MatFunction> {
    MatFunction::transfer_block(companion(h), 0, j, h.block())
}
