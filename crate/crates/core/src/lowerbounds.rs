//! Lower bounds on worst-case transient growth from resolvent norms in the
//! right half-plane.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::matfun::{shift, MatFunction};

/// `max(0, (α_ε − ω)/ε)`, a lower bound for `sup_t ‖Ψ(t)‖ e^{−ωt}`.
pub fn lb_general(alpha_eps: f64, epsilon: f64, omega: f64) -> f64 {
    ((alpha_eps - omega) / epsilon).max(0.0)
}

/// Height above which `‖T(x+iy)^{-1}‖ ≤ ‖T(x)^{-1}‖`.
///
/// For a delay characteristic matrix with Hermitian `A` this is
/// `|x| + ‖B‖e^{−τx} + σ_min(T(x))`, otherwise `‖xI − A‖` replaces `|x|`.
/// For a pencil it is `|x| + ‖M‖ + σ_min(xI − M)`.
pub fn lb_truncation_height(t: &MatFunction, x: f64) -> Result<f64> {
    let z = c64(x, 0.0);
    match t {
        MatFunction::DelayChar { a, b, tau } => {
            let lead = if linalg::is_hermitian(a, 1e-13) { x.abs() } else { linalg::norm2(&shift(a, z)) };
            let tz = shift(a, z) - b * c64((-tau * x).exp(), 0.0);
            Ok(lead + linalg::norm2(b) * (-tau * x).exp() + linalg::sigma_min(&tz)?)
        }
        MatFunction::Pencil { m } => Ok(x.abs() + linalg::norm2(m) + linalg::sigma_min(&shift(m, z))?),
        _ => Err(Error::Unsupported("truncation height is defined for pencils and delay characteristic matrices".into())),
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `x · max ‖T(x+iy)^{-1}‖` over `n_mesh` heights in `[0, y_max]` (or
/// `[−y_max, y_max]` for complex data), refined by golden-section search
/// around the best mesh point. Returns the bound and the maximizing height.
pub fn lb_practical_at(t: &MatFunction, x: f64, y_max: f64, n_mesh: usize) -> (f64, f64) {
    let n_mesh = n_mesh.max(3);
    let lo = if t.is_real_data() { 0.0 } else { -y_max };
    let step = (y_max - lo) / (n_mesh - 1) as f64;
    let g = |y: f64| {
        let r = t.resolvent_norm(c64(x, y));
        if r.is_finite() { r } else { f64::MAX }
    };
    let mut best = (f64::NEG_INFINITY, lo);
    let mut best_k = 0;
    for k in 0..n_mesh {
        let y = lo + step * k as f64;
        let v = g(y);
        if v > best.0 {
            best = (v, y);
            best_k = k;
        }
    }
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_k + 1) as f64).min(y_max);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    for _ in 0..50 {
        if b - a <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = g(d);
        }
        for (v, y) in [(fc, c), (fd, d)] {
            if v > best.0 {
                best = (v, y);
            }
        }
    }
    ((x * best.0).max(0.0), best.1)
}

/// `x · sup_y ‖T(x+iy)^{-1}‖` estimated on a mesh; any mesh value is a valid
/// lower bound for `sup_t ‖Ψ(t)‖`.
pub fn lb_practical(t: &MatFunction, x: f64, y_max: f64, n_mesh: usize) -> Result<f64> {
    if !(x > 0.0) || !(y_max > 0.0) {
        return Err(Error::Domain(format!("need x > 0 and y_max > 0, got {x}, {y_max}")));
    }
    Ok(lb_practical_at(t, x, y_max, n_mesh).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub x: f64,
    pub y_max: f64,
    pub y_star: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundScan {
    pub best: f64,
    pub best_x: f64,
    pub table: Vec<LowerBoundRow>,
}

pub const Y_MESH: usize = 2048;

/// Best `lb_practical` over `n_x` equally spaced `x ∈ [x_lo, x_hi]`, each
/// with its own truncation height.
pub fn lb_scan(t: &MatFunction, x_lo: f64, x_hi: f64, n_x: usize) -> Result<LowerBoundScan> {
    if !(x_lo > 0.0 && x_hi >= x_lo) || n_x == 0 {
        return Err(Error::Domain(format!("need 0 < x_lo ≤ x_hi and n_x ≥ 1, got [{x_lo}, {x_hi}], {n_x}")));
    }
    let xs: Vec<f64> = if n_x == 1 {
        vec![x_lo]
    } else {
        (0..n_x).map(|k| x_lo + (x_hi - x_lo) * k as f64 / (n_x - 1) as f64).collect()
    };
    let table = xs
        .par_iter()
        .map(|&x| {
            let y_max = lb_truncation_height(t, x)?;
            let (value, y_star) = lb_practical_at(t, x, y_max, Y_MESH);
            Ok(LowerBoundRow { x, y_max, y_star, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let top = table.iter().fold(table[0], |acc, r| if r.value > acc.value { *r } else { acc });
    Ok(LowerBoundScan { best: top.value, best_x: top.x, table })
}
