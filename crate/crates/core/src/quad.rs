//! Globally adaptive Gauss–Kronrod (7/15) quadrature for scalar and
//! vector-valued integrands on finite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-10, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: Vec<f64>,
    /// Estimated absolute error in the max norm.
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<f64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F>(f: &F, a: f64, b: f64) -> Piece
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let nodes: Vec<f64> = (0..15)
        .map(|k| match k {
            0..=6 => center - half * XGK[k],
            7 => center,
            _ => center + half * XGK[14 - k],
        })
        .collect();
    let values: Vec<Vec<f64>> = nodes.par_iter().map(|&x| f(x)).collect();
    let dim = values[0].len();
    let mut k15 = vec![0.0; dim];
    let mut g7 = vec![0.0; dim];
    for (idx, v) in values.iter().enumerate() {
        let j = if idx <= 7 { idx } else { 14 - idx };
        for d in 0..dim {
            k15[d] += WGK[j] * v[d];
        }
        if j % 2 == 1 {
            for d in 0..dim {
                g7[d] += WG[j / 2] * v[d];
            }
        }
    }
    let mut error = 0.0_f64;
    for d in 0..dim {
        k15[d] *= half;
        g7[d] *= half;
        error = error.max((k15[d] - g7[d]).abs());
    }
    Piece { a, b, value: k15, error }
}

/// Integrates a vector-valued function over `[a, b]`.
pub fn integrate_vec<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    integrate_vec_split(f, &[a, b], opts)
}

/// Integrates over `[breaks[0], breaks[last]]`, starting from the given
/// subdivision so that known kinks sit on interval boundaries.
pub fn integrate_vec_split<F>(f: F, breaks: &[f64], opts: QuadOptions) -> QuadResult
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod(&f, w[0], w[1]));
        }
    }
    if heap.is_empty() {
        let dim = f(breaks[0]).len();
        return QuadResult { value: vec![0.0; dim], error: 0.0, evaluations: 1, converged: true };
    }
    let mut evaluations = 15 * heap.len();
    loop {
        let dim = heap.peek().map(|p| p.value.len()).unwrap_or(0);
        let mut total = vec![0.0; dim];
        let mut error = 0.0;
        for p in heap.iter() {
            for d in 0..dim {
                total[d] += p.value[d];
            }
            error += p.error;
        }
        let scale = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let target = opts.abs_tol.max(opts.rel_tol * scale);
        if error <= target || heap.len() >= opts.max_intervals {
            return QuadResult { value: total, error, evaluations, converged: error <= target };
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(Piece { error: 0.0, ..worst });
            continue;
        }
        heap.push(kronrod(&f, worst.a, mid));
        heap.push(kronrod(&f, mid, worst.b));
        evaluations += 30;
    }
}

/// Scalar convenience wrapper; returns `(value, error estimate, converged)`.
pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> (f64, f64, bool)
where
    F: Fn(f64) -> f64 + Sync,
{
    let r = integrate_vec(|x| vec![f(x)], a, b, opts);
    (r.value[0], r.error, r.converged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let (v, err, ok) = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, QuadOptions::default());
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-13);
        assert!(ok && err < 1e-12);
    }

    #[test]
    fn peaked_integrand_converges() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, _, ok) = integrate(f, -1.0, 1.0, QuadOptions::default());
        let exact = 2.0 * (1.0 / 1e-2) * (1.0f64 / 1e-2).atan();
        assert!(ok);
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn vector_valued_with_breaks() {
        let r = integrate_vec_split(|x| vec![x.abs(), x.cos()], &[-1.0, 0.0, 1.0], QuadOptions::default());
        assert!((r.value[0] - 1.0).abs() < 1e-14);
        assert!((r.value[1] - 2.0 * 1f64.sin()).abs() < 1e-14);
    }
}
