//! Built-in problems and the JSON problem format.
//!
//! Matrices are arrays of rows whose entries are either real numbers or
//! `[re, im]` pairs; a matrix may instead name a builder, e.g.
//! `{"builder": "pdde-a", "n": 100}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, CVector, C64};
use crate::matfun::{HodeProblem, Recurrence};
use crate::simulate::{DdeProblem, History, Interpolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Ode,
    Hode,
    Diffeq,
    Dde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> C64 {
        match self {
            Entry::Real(x) => c64(x, 0.0),
            Entry::Complex([re, im]) => c64(re, im),
        }
    }

    fn from_value(z: C64) -> Self {
        if z.im == 0.0 { Entry::Real(z.re) } else { Entry::Complex([z.re, z.im]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<Entry>>),
    Builder { builder: String, n: usize },
}

impl MatrixSpec {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixSpec::Rows(
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| Entry::from_value(m[(i, j)])).collect()).collect(),
        )
    }

    fn build(&self, path: &str) -> Result<CMatrix> {
        match self {
            MatrixSpec::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, |row| row.len());
                if r == 0 || c == 0 {
                    return Err(schema(path, "matrix must be non-empty"));
                }
                if let Some(i) = rows.iter().position(|row| row.len() != c) {
                    return Err(schema(&format!("{path}[{i}]"), &format!("row has {} entries, expected {c}", rows[i].len())));
                }
                let entries: Vec<C64> = rows.iter().flatten().map(|e| e.value()).collect();
                let m = linalg::from_rows(r, c, &entries)?;
                linalg::check_finite(&m)?;
                Ok(m)
            }
            MatrixSpec::Builder { builder, n } => match builder.as_str() {
                "pdde-a" => Ok(pdde_matrices(*n)?.0),
                "pdde-b" => Ok(pdde_matrices(*n)?.1),
                "identity" => Ok(CMatrix::identity(*n, *n)),
                "zero" => Ok(CMatrix::zeros(*n, *n)),
                other => Err(schema(&format!("{path}.builder"), &format!("unknown builder `{other}`"))),
            },
        }
    }
}

fn vector_spec(v: &CVector) -> Vec<Entry> {
    v.iter().map(|z| Entry::from_value(*z)).collect()
}

fn build_vector(v: &[Entry], path: &str) -> Result<CVector> {
    let out = CVector::from_iterator(v.len(), v.iter().map(|e| e.value()));
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(schema(path, "entries must be finite"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum HistorySpec {
    Zero,
    Constant { data: Vec<Entry> },
    Samples {
        data: Vec<Vec<Entry>>,
        #[serde(default = "default_order")]
        order: Interpolation,
    },
}

fn default_order() -> Interpolation {
    Interpolation::Linear
}

/// A problem as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDef {
    pub name: String,
    pub kind: ProblemKind,
    /// System matrix of an ODE or DDE.
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<MatrixSpec>,
    /// Delayed-term matrix of a DDE.
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<HistorySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<Entry>>,
    /// `A_0, …, A_{N}` of a higher-order or difference equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<MatrixSpec>>,
    /// Initial derivatives or initial samples, one vector per coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<Entry>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// A validated problem ready for computation.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Ode { m: CMatrix, u0: Option<CVector> },
    Hode(HodeProblem),
    Diffeq(HodeProblem),
    Dde(DdeProblem),
}

fn schema(path: &str, message: &str) -> Error {
    Error::Schema { path: path.to_string(), message: message.to_string() }
}

fn required<'a, T>(field: &'a Option<T>, name: &str, kind: &str) -> Result<&'a T> {
    field.as_ref().ok_or_else(|| schema(name, &format!("required for kind {kind}")))
}

impl ProblemDef {
    fn empty(name: &str, kind: ProblemKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            a: None,
            b: None,
            tau: None,
            history: None,
            u0: None,
            coeffs: None,
            initial: None,
            notes: Vec::new(),
        }
    }

    pub fn ode(name: &str, m: &CMatrix) -> Self {
        Self { a: Some(MatrixSpec::from_matrix(m)), ..Self::empty(name, ProblemKind::Ode) }
    }

    pub fn dde(name: &str, p: &DdeProblem) -> Self {
        let history = match &p.history {
            History::Zero => HistorySpec::Zero,
            History::Constant { value } => HistorySpec::Constant { data: vector_spec(value) },
            History::Samples { values, order } => {
                HistorySpec::Samples { data: values.iter().map(vector_spec).collect(), order: *order }
            }
        };
        Self {
            a: Some(MatrixSpec::from_matrix(&p.a)),
            b: Some(MatrixSpec::from_matrix(&p.b)),
            tau: Some(p.tau),
            history: Some(history),
            u0: Some(vector_spec(&p.u0)),
            ..Self::empty(name, ProblemKind::Dde)
        }
    }

    pub fn higher_order(name: &str, h: &HodeProblem) -> Self {
        let kind = match h.recurrence {
            Recurrence::Differential => ProblemKind::Hode,
            Recurrence::Difference => ProblemKind::Diffeq,
        };
        Self {
            coeffs: Some(h.coeffs.iter().map(MatrixSpec::from_matrix).collect()),
            initial: Some(h.initial.iter().map(vector_spec).collect()),
            ..Self::empty(name, kind)
        }
    }

    /// Checks kind-specific fields and builds the matrices.
    pub fn resolve(&self) -> Result<Problem> {
        let kind = match self.kind {
            ProblemKind::Ode => "ode",
            ProblemKind::Hode => "hode",
            ProblemKind::Diffeq => "diffeq",
            ProblemKind::Dde => "dde",
        };
        match self.kind {
            ProblemKind::Ode => {
                let m = required(&self.a, "A", kind)?.build("A")?;
                linalg::ensure_square(&m, "A")?;
                let u0 = self.u0.as_ref().map(|v| build_vector(v, "u0")).transpose()?;
                if u0.as_ref().is_some_and(|v| v.len() != m.nrows()) {
                    return Err(Error::Dimension("u0 length must match A".into()));
                }
                Ok(Problem::Ode { m, u0 })
            }
            ProblemKind::Hode | ProblemKind::Diffeq => {
                let coeffs = required(&self.coeffs, "coeffs", kind)?
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c.build(&format!("coeffs[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let initial = required(&self.initial, "initial", kind)?
                    .iter()
                    .enumerate()
                    .map(|(j, v)| build_vector(v, &format!("initial[{j}]")))
                    .collect::<Result<Vec<_>>>()?;
                let rec = if self.kind == ProblemKind::Hode { Recurrence::Differential } else { Recurrence::Difference };
                let h = HodeProblem::new(coeffs, initial, rec)?;
                Ok(if rec == Recurrence::Differential { Problem::Hode(h) } else { Problem::Diffeq(h) })
            }
            ProblemKind::Dde => {
                let a = required(&self.a, "A", kind)?.build("A")?;
                let b = required(&self.b, "B", kind)?.build("B")?;
                let tau = *required(&self.tau, "tau", kind)?;
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(schema("tau", "delay must be positive and finite"));
                }
                let n = linalg::ensure_square(&a, "A")?;
                let history = match self.history.as_ref().unwrap_or(&HistorySpec::Zero) {
                    HistorySpec::Zero => History::Zero,
                    HistorySpec::Constant { data } => History::Constant { value: build_vector(data, "history.data")? },
                    HistorySpec::Samples { data, order } => History::Samples {
                        values: data
                            .iter()
                            .enumerate()
                            .map(|(k, v)| build_vector(v, &format!("history.data[{k}]")))
                            .collect::<Result<Vec<_>>>()?,
                        order: *order,
                    },
                };
                let u0 = match &self.u0 {
                    Some(v) => build_vector(v, "u0")?,
                    None => match &history {
                        History::Constant { value } => value.clone(),
                        _ => return Err(schema("u0", "required unless the history is constant")),
                    },
                };
                if u0.len() != n {
                    return Err(Error::Dimension(format!("u0 has length {}, expected {n}", u0.len())));
                }
                Ok(Problem::Dde(DdeProblem::new(a, b, tau, history, u0)?))
            }
        }
    }
}

/// Parses a problem from JSON text, reporting the path of any schema error.
pub fn parse_problem(text: &str) -> Result<ProblemDef> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let def: ProblemDef = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path, message: e.into_inner().to_string() }
    })?;
    def.resolve()?;
    Ok(def)
}

pub fn load_problem(path: &Path) -> Result<ProblemDef> {
    parse_problem(&fs::read_to_string(path)?)
}

pub fn save_problem(def: &ProblemDef, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(def).map_err(|e| schema("", &e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Everything needed to rerun a command.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub problem: ProblemDef,
    pub parameters: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, problem: ProblemDef, parameters: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            problem,
            parameters,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| schema("", &e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Equilibrium `(E_x, E_y, N)` of the laser model.
pub const LASER_EQUILIBRIUM: [f64; 3] = [1.845_817_136_865_238_3, -0.241_561_627_723_465_2, 7.643_006_447_913_191_6];

/// Scale of the laser initial perturbation relative to the equilibrium.
pub const LASER_PERTURBATION: f64 = 0.0015;

pub fn laser_matrices() -> (CMatrix, CMatrix) {
    let a = linalg::from_real_rows(
        3,
        3,
        &[-8.4983e-1, 1.4786e-1, 4.4381e1, 3.7540e-3, -2.8049e-1, -2.2922e2, -1.7537e-1, 2.2951e-2, -3.6079e-1],
    )
    .expect("3x3");
    (a, linalg::real_diag(&[2.8e-1, -2.8e-1, 0.0]))
}

pub fn laser_initial() -> CVector {
    CVector::from_iterator(3, LASER_EQUILIBRIUM.iter().map(|&x| c64(LASER_PERTURBATION * x, 0.0)))
}

/// Linearized semiconductor laser with delayed feedback, perturbed by a
/// constant history proportional to the equilibrium.
pub fn laser_problem() -> ProblemDef {
    let (a, b) = laser_matrices();
    let u0 = laser_initial();
    let p = DdeProblem::new(a, b, 1.0, History::Constant { value: u0.clone() }, u0).expect("valid");
    let mut def = ProblemDef::dde("laser", &p);
    def.notes.push("history and u0 are 0.0015 times the equilibrium (Ex, Ey, N)".into());
    def
}

/// Forward-Euler discretization `y_{j+1} = (I + hA)y_j + hB y_{j−N}`,
/// `h = 1/N`, with every initial sample equal to the laser perturbation.
pub fn laser_discretization(n: usize) -> Result<ProblemDef> {
    if n == 0 {
        return Err(Error::Domain("need at least one step per delay".into()));
    }
    let (a, b) = laser_matrices();
    let h = 1.0 / n as f64;
    let mut coeffs = vec![CMatrix::zeros(3, 3); n + 1];
    coeffs[0] = CMatrix::identity(3, 3) + a * c64(h, 0.0);
    coeffs[n] = b * c64(h, 0.0);
    let initial = vec![laser_initial(); n + 1];
    let hp = HodeProblem::new(coeffs, initial, Recurrence::Difference)?;
    Ok(ProblemDef::higher_order(&format!("laser-disc-{n}"), &hp))
}

/// `A = tridiag(1, −2, 1)/h² + I/2`, `B = diag(a₁(jh))` with
/// `a₁(x) = −4.1 + x(1 − e^{x−π})`, `h = π/(n+1)`.
pub fn pdde_matrices(n: usize) -> Result<(CMatrix, CMatrix)> {
    if n < 2 {
        return Err(Error::Domain(format!("the heat-equation discretization needs n ≥ 2, got {n}")));
    }
    let h = std::f64::consts::PI / (n + 1) as f64;
    let inv = 1.0 / (h * h);
    let mut a = CMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = c64(-2.0 * inv + 0.5, 0.0);
        if j + 1 < n {
            a[(j, j + 1)] = c64(inv, 0.0);
            a[(j + 1, j)] = c64(inv, 0.0);
        }
    }
    let diag: Vec<f64> = (1..=n)
        .map(|j| {
            let x = j as f64 * h;
            -4.1 + x * (1.0 - (x - std::f64::consts::PI).exp())
        })
        .collect();
    Ok((a, linalg::real_diag(&diag)))
}

pub const PDDE_DELAY: f64 = 0.2;

/// Discretized partial DDE with a unit constant history.
pub fn pdde_problem(n: usize) -> Result<ProblemDef> {
    let (a, b) = pdde_matrices(n)?;
    let u0 = CVector::from_element(n, c64(1.0, 0.0));
    let mut def = ProblemDef::dde(&format!("pdde-{n}"), &DdeProblem::new(a, b, PDDE_DELAY, History::Zero, u0)?);
    def.a = Some(MatrixSpec::Builder { builder: "pdde-a".into(), n });
    def.b = Some(MatrixSpec::Builder { builder: "pdde-b".into(), n });
    def.history = Some(HistorySpec::Constant { data: vec![Entry::Real(1.0); n] });
    Ok(def)
}

/// `u'(t) = −u(t) − u(t − 1)/2` with `φ ≡ 1`.
pub fn scalar_problem() -> ProblemDef {
    let one = CVector::from_element(1, c64(1.0, 0.0));
    let p = DdeProblem::new(
        linalg::real_diag(&[-1.0]),
        linalg::real_diag(&[-0.5]),
        1.0,
        History::Constant { value: one.clone() },
        one,
    )
    .expect("valid");
    ProblemDef::dde("scalar", &p)
}

/// `y'' = −y − 0.1y'` with `y(0) = 1`, `y'(0) = 0`.
pub fn oscillator_problem() -> ProblemDef {
    let h = HodeProblem::new(
        vec![linalg::real_diag(&[-1.0]), linalg::real_diag(&[-0.1])],
        vec![CVector::from_element(1, c64(1.0, 0.0)), CVector::zeros(1)],
        Recurrence::Differential,
    )
    .expect("valid");
    ProblemDef::higher_order("oscillator", &h)
}

/// `y_{n+1} = y_n / 2` with `y_0 = 1`.
pub fn halving_problem() -> ProblemDef {
    let h = HodeProblem::new(
        vec![linalg::real_diag(&[0.5])],
        vec![CVector::from_element(1, c64(1.0, 0.0))],
        Recurrence::Difference,
    )
    .expect("valid");
    ProblemDef::higher_order("halving", &h)
}

/// `[[−1, 20], [0, −2]]`, a stable matrix with large transient growth.
pub fn nonnormal_problem() -> ProblemDef {
    let m = linalg::from_real_rows(2, 2, &[-1.0, 20.0, 0.0, -2.0]).expect("2x2");
    ProblemDef::ode("nonnormal", &m)
}

pub const PRESETS: [&str; 7] = ["laser", "pdde", "scalar", "oscillator", "halving", "nonnormal", "laser-disc"];

/// Looks up a preset by name; `pdde:<n>` and `laser-disc:<N>` select sizes
/// (defaults 100 and 10).
pub fn preset(name: &str) -> Result<ProblemDef> {
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => {
            let n: usize = a.parse().map_err(|_| Error::UnknownPreset(format!("bad size in `{name}`")))?;
            (b, Some(n))
        }
        None => (name, None),
    };
    match base {
        "laser" => Ok(laser_problem()),
        "pdde" => pdde_problem(arg.unwrap_or(100)),
        "scalar" => Ok(scalar_problem()),
        "oscillator" => Ok(oscillator_problem()),
        "halving" => Ok(halving_problem()),
        "nonnormal" => Ok(nonnormal_problem()),
        "laser-disc" => laser_discretization(arg.unwrap_or(10)),
        _ => Err(Error::UnknownPreset(format!("`{name}`; known: {}", PRESETS.join(", ")))),
    }
}
