//! Pseudospectra of matrix-valued functions: sampled `σ_min` fields,
//! marching-squares level sets, pseudospectral abscissa and radius, and the
//! rightmost characteristic root of a delay equation by spectral collocation.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMatrix, C64};
use crate::matfun::MatFunction;

/// A rectangular window of the complex plane sampled on an `nx × ny` lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64, nx: usize, ny: usize) -> Result<Self> {
        let finite = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite());
        if !finite || re_min >= re_max || im_min >= im_max {
            return Err(Error::Domain(format!(
                "grid window [{re_min}, {re_max}] x [{im_min}, {im_max}] is empty or not finite"
            )));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Domain(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        Ok(Self { re_min, re_max, im_min, im_max, nx, ny })
    }

    /// Window with roughly square cells and `n` nodes along the longer side.
    pub fn with_resolution(re_min: f64, re_max: f64, im_min: f64, im_max: f64, n: usize) -> Result<Self> {
        let w = re_max - re_min;
        let h = im_max - im_min;
        let (nx, ny) = if w >= h {
            (n, ((n as f64) * h / w).ceil().max(16.0) as usize)
        } else {
            (((n as f64) * w / h).ceil().max(16.0) as usize, n)
        };
        Self::new(re_min, re_max, im_min, im_max, nx, ny)
    }

    pub fn dx(&self) -> f64 {
        (self.re_max - self.re_min) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.im_max - self.im_min) / (self.ny - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> C64 {
        c64(self.re_min + i as f64 * self.dx(), self.im_min + j as f64 * self.dy())
    }

    fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn overlaps(&self, other: &GridSpec) -> bool {
        self.re_min <= other.re_max
            && other.re_min <= self.re_max
            && self.im_min <= other.im_max
            && other.im_min <= self.im_max
    }
}

/// Samples of `σ(z) = 1/‖T(z)^{-1}‖` on a grid; `values[j * nx + i]` is the
/// value at `grid.node(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl PseudoField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

pub fn compute_field(t: &MatFunction, grid: GridSpec) -> PseudoField {
    sample_field(grid, |z| t.sigma(z))
}

/// Parallel sampling of an arbitrary nonnegative function on the grid.
pub fn sample_field(grid: GridSpec, f: impl Fn(C64) -> f64 + Sync) -> PseudoField {
    let values = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|idx| f(grid.node(idx % grid.nx, idx / grid.nx)))
        .collect();
    PseudoField { grid, values }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<C64>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let mut len: f64 = self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        if self.closed && self.vertices.len() > 1 {
            len += (self.vertices[0] - self.vertices[self.vertices.len() - 1]).norm();
        }
        len
    }

    /// Edges as vertex pairs, including the closing edge of a closed curve.
    pub fn edges(&self) -> Vec<(C64, C64)> {
        let v = &self.vertices;
        let mut out: Vec<(C64, C64)> = v.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed && v.len() > 1 {
            out.push((v[v.len() - 1], v[0]));
        }
        out
    }
}

/// The `ε`-level curves of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub epsilon: f64,
    pub polylines: Vec<Polyline>,
    /// The sublevel set reaches the window edge, so the curves are incomplete.
    pub touches_boundary: bool,
    pub resolution: (usize, usize),
}

impl LevelSet {
    /// Even–odd membership in the region bounded by the closed curves.
    pub fn contains(&self, z: C64) -> bool {
        let mut inside = false;
        for p in self.polylines.iter().filter(|p| p.closed) {
            for (a, b) in p.edges() {
                if (a.im > z.im) != (b.im > z.im) {
                    let x = a.re + (z.im - a.im) / (b.im - a.im) * (b.re - a.re);
                    if x > z.re {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    pub fn vertices(&self) -> impl Iterator<Item = &C64> {
        self.polylines.iter().flat_map(|p| p.vertices.iter())
    }
}

/// Marching squares on `{σ < ε}` with linear interpolation along cell edges;
/// saddle cells are resolved by the average of their four corners.
pub fn extract_boundary(field: &PseudoField, epsilon: f64) -> LevelSet {
    let g = field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let inside = |i: usize, j: usize| field.value(i, j) < epsilon;
    let h_count = (nx - 1) * ny;
    let h_edge = |i: usize, j: usize| j * (nx - 1) + i;
    let v_edge = |i: usize, j: usize| h_count + j * nx + i;
    let edge_total = h_count + nx * (ny - 1);

    let crossing = |edge: usize| -> C64 {
        let ((i0, j0), (i1, j1)) = if edge < h_count {
            let (i, j) = (edge % (nx - 1), edge / (nx - 1));
            ((i, j), (i + 1, j))
        } else {
            let e = edge - h_count;
            let (i, j) = (e % nx, e / nx);
            ((i, j), (i, j + 1))
        };
        let v0 = field.value(i0, j0);
        let v1 = field.value(i1, j1);
        let s = ((epsilon - v0) / (v1 - v0)).clamp(0.0, 1.0);
        g.node(i0, j0) + (g.node(i1, j1) - g.node(i0, j0)) * s
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let edges = [h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)];
            let cut: Vec<usize> = (0..4).filter(|&e| c[e] != c[(e + 1) % 4]).collect();
            match cut.len() {
                2 => segments.push((edges[cut[0]], edges[cut[1]])),
                4 => {
                    let center = 0.25
                        * (field.value(i, j)
                            + field.value(i + 1, j)
                            + field.value(i + 1, j + 1)
                            + field.value(i, j + 1));
                    if (center < epsilon) == c[0] {
                        segments.push((edges[0], edges[1]));
                        segments.push((edges[2], edges[3]));
                    } else {
                        segments.push((edges[3], edges[0]));
                        segments.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let mut incident: Vec<[usize; 2]> = vec![[usize::MAX; 2]; edge_total];
    for (s, &(a, b)) in segments.iter().enumerate() {
        for e in [a, b] {
            let slot = &mut incident[e];
            if slot[0] == usize::MAX {
                slot[0] = s;
            } else {
                slot[1] = s;
            }
        }
    }
    let other_segment = |edge: usize, seg: usize| -> Option<usize> {
        incident[edge].iter().cloned().find(|&s| s != usize::MAX && s != seg)
    };
    let other_edge = |seg: usize, edge: usize| -> usize {
        let (a, b) = segments[seg];
        if a == edge { b } else { a }
    };

    let mut visited = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let (a, b) = segments[start];
        let mut chain = vec![a, b];
        let mut closed = false;
        let (mut edge, mut seg) = (b, start);
        while let Some(next) = other_segment(edge, seg) {
            if next == start {
                closed = true;
                break;
            }
            if visited[next] {
                break;
            }
            visited[next] = true;
            edge = other_edge(next, edge);
            seg = next;
            chain.push(edge);
        }
        if closed {
            chain.pop();
        } else {
            let mut back = Vec::new();
            let (mut edge, mut seg) = (a, start);
            while let Some(next) = other_segment(edge, seg) {
                if visited[next] {
                    break;
                }
                visited[next] = true;
                edge = other_edge(next, edge);
                seg = next;
                back.push(edge);
            }
            back.reverse();
            back.extend(chain);
            chain = back;
        }
        polylines.push(Polyline { vertices: chain.into_iter().map(crossing).collect(), closed });
    }

    let border_inside = (0..nx).any(|i| inside(i, 0) || inside(i, ny - 1))
        || (0..ny).any(|j| inside(0, j) || inside(nx - 1, j));
    let touches_boundary = border_inside || polylines.iter().any(|p| !p.closed);
    LevelSet { epsilon, polylines, touches_boundary, resolution: (nx, ny) }
}

/// Total length of all level curves.
pub fn arc_length(ls: &LevelSet) -> f64 {
    ls.polylines.iter().map(Polyline::length).sum()
}

fn bisect_crossing(f: &dyn Fn(f64) -> f64, epsilon: f64, mut inner: f64, mut outer: f64) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if f(mid) < epsilon {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    inner
}

/// Maximizes `f` on `[lo, hi]` by golden-section search; returns the best value seen.
fn golden_max(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, iterations: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v > best.1 {
                best = (x, v);
            }
        }
    }
    best
}

/// `α_ε(T)`: rightmost point of `{σ < ε}` in the window, refined by bisection
/// in `x` and golden-section search in `y` around the best grid rows.
pub fn pseudo_abscissa(t: &MatFunction, epsilon: f64, grid: GridSpec) -> Result<f64> {
    let field = compute_field(t, grid);
    pseudo_abscissa_from_field(t, epsilon, &field)
}

pub fn pseudo_abscissa_from_field(t: &MatFunction, epsilon: f64, field: &PseudoField) -> Result<f64> {
    pseudo_abscissa_seeded(t, epsilon, field, &[])
}

/// Rightward crossing of `ε` from a point inside a component too small for
/// the grid, maximized over heights within twice the component's reach.
fn seed_crossing(t: &MatFunction, epsilon: f64, seed: C64, re_max: f64) -> Option<f64> {
    if !(t.sigma(seed) < epsilon) {
        return None;
    }
    let march = |y: f64, step: f64| -> f64 {
        let s = |x: f64| t.sigma(c64(x, y));
        if s(seed.re) >= epsilon {
            return f64::NEG_INFINITY;
        }
        let (mut x_in, mut x_out) = (seed.re, seed.re + step);
        let mut step = step;
        while s(x_out) < epsilon {
            if x_out >= re_max {
                return f64::INFINITY;
            }
            x_in = x_out;
            step *= 2.0;
            x_out = (seed.re + step).min(re_max);
        }
        bisect_crossing(&s, epsilon, x_in, x_out)
    };
    let first = march(seed.im, 1e-9 * (1.0 + seed.norm()));
    if !first.is_finite() {
        return Some(first);
    }
    let reach = (first - seed.re).max(1e-12 * (1.0 + seed.norm()));
    let probe = |y: f64| march(y, reach / 8.0);
    let (_, v) = golden_max(&probe, seed.im - 2.0 * reach, seed.im + 2.0 * reach, 48);
    Some(v.max(first))
}

/// As [`pseudo_abscissa_from_field`], with extra starting points (typically
/// eigenvalues or characteristic roots) whose components may fall between
/// grid nodes.
pub fn pseudo_abscissa_seeded(t: &MatFunction, epsilon: f64, field: &PseudoField, seeds: &[C64]) -> Result<f64> {
    let g = field.grid;
    let mut result = f64::NEG_INFINITY;
    for &z in seeds {
        if let Some(v) = seed_crossing(t, epsilon, z, g.re_max) {
            if v.is_infinite() && v > 0.0 {
                return Err(Error::WindowTooSmall(format!(
                    "the {epsilon:e}-pseudospectrum extends past re = {}",
                    g.re_max
                )));
            }
            result = result.max(v);
        }
    }
    let mut rightmost: Vec<Option<usize>> = vec![None; g.ny];
    for (j, slot) in rightmost.iter_mut().enumerate() {
        *slot = (0..g.nx).rev().find(|&i| field.value(i, j) < epsilon);
    }
    let Some(best) = rightmost.iter().flatten().max().copied() else {
        return if result > f64::NEG_INFINITY {
            Ok(result)
        } else {
            Err(Error::NotFound(format!("no grid node or seed has sigma below {epsilon:e}")))
        };
    };
    if best == g.nx - 1 {
        return Err(Error::WindowTooSmall(format!(
            "the {epsilon:e}-pseudospectrum reaches the right edge re = {}",
            g.re_max
        )));
    }
    let dx = g.dx();
    let dy = g.dy();
    for (j, i) in rightmost.iter().enumerate() {
        let Some(i) = *i else { continue };
        if i + 1 < best {
            continue;
        }
        let x_in = g.re_min + i as f64 * dx;
        let crossing = |y: f64| -> f64 {
            let s = |x: f64| t.sigma(c64(x, y));
            if s(x_in) >= epsilon {
                return f64::NEG_INFINITY;
            }
            let mut x_out = x_in + dx;
            while s(x_out) < epsilon {
                x_out += dx;
                if x_out > g.re_max {
                    return f64::INFINITY;
                }
            }
            bisect_crossing(&s, epsilon, x_in, x_out)
        };
        let y0 = g.im_min + j as f64 * dy;
        let (_, v) = golden_max(&crossing, y0 - dy, y0 + dy, 48);
        let v = v.max(crossing(y0));
        if v.is_infinite() && v > 0.0 {
            return Err(Error::WindowTooSmall(format!(
                "the {epsilon:e}-pseudospectrum extends past re = {}",
                g.re_max
            )));
        }
        result = result.max(v);
    }
    Ok(result)
}

/// `ρ_ε(T)`: largest modulus over `{σ < ε}`, refined radially and in angle.
pub fn pseudo_radius(t: &MatFunction, epsilon: f64, grid: GridSpec) -> Result<f64> {
    let field = compute_field(t, grid);
    pseudo_radius_from_field(t, epsilon, &field)
}

pub fn pseudo_radius_from_field(t: &MatFunction, epsilon: f64, field: &PseudoField) -> Result<f64> {
    let g = field.grid;
    let mut nodes: Vec<(f64, C64)> = Vec::new();
    for j in 0..g.ny {
        for i in 0..g.nx {
            if field.value(i, j) < epsilon {
                if i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1 {
                    return Err(Error::WindowTooSmall(format!(
                        "the {epsilon:e}-pseudospectrum reaches the window edge"
                    )));
                }
                let z = g.node(i, j);
                nodes.push((z.norm(), z));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::NotFound(format!("no grid node has sigma below {epsilon:e}")));
    }
    nodes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let diag = g.dx().hypot(g.dy());
    let top = nodes[0].0;
    let reach = (top.abs() + 4.0 * diag).max(g.re_max.abs().max(g.re_min.abs()).hypot(g.im_max.abs().max(g.im_min.abs())));
    // One candidate per angular sector of the band within a cell of the top:
    // on flat stretches of the boundary the largest nodes bunch to one side
    // of the true maximum.
    let sector = (diag / top.max(diag)).max(1e-12);
    let mut candidates: Vec<(f64, C64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &(r, z) in nodes.iter().take_while(|(r, _)| *r >= top - diag) {
        if seen.insert((z.arg() / sector).floor() as i64) {
            candidates.push((r, z));
        }
    }
    let mut result = f64::NEG_INFINITY;
    for &(r_node, z_node) in &candidates {
        let crossing = |theta: f64| -> f64 {
            let dir = c64(theta.cos(), theta.sin());
            let s = |r: f64| t.sigma(dir * r);
            if s(r_node) >= epsilon {
                return f64::NEG_INFINITY;
            }
            let mut r_out = r_node + diag;
            while s(r_out) < epsilon {
                r_out += diag;
                if r_out > 2.0 * reach {
                    return f64::INFINITY;
                }
            }
            bisect_crossing(&s, epsilon, r_node, r_out)
        };
        let theta0 = if r_node > 0.0 { z_node.arg() } else { 0.0 };
        let half = if r_node > diag { (diag / r_node).min(PI) } else { PI };
        let (_, v) = golden_max(&crossing, theta0 - half, theta0 + half, 48);
        let v = v.max(crossing(theta0));
        if v.is_infinite() && v > 0.0 {
            return Err(Error::WindowTooSmall(format!("the {epsilon:e}-pseudospectrum is unbounded in the search")));
        }
        result = result.max(v);
    }
    Ok(result)
}

/// Estimate of the rightmost real part of the characteristic roots of
/// `u' = Au + Bu(t−τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbscissaEstimate {
    /// Abscissa of the `n_nodes`-point discretization.
    pub value: f64,
    /// Abscissa of the `2·n_nodes`-point discretization.
    pub refined: f64,
    pub n_nodes: usize,
    pub converged: bool,
    pub warning: Option<String>,
}

impl AbscissaEstimate {
    /// The larger of the two discretizations, for use in constraints that
    /// must stay to the right of every root.
    pub fn conservative(&self) -> f64 {
        self.value.max(self.refined)
    }
}

/// Chebyshev differentiation matrix on `cos(kπ/N)`, `k = 0..N`.
pub fn cheb_diff(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n).map(|k| (k as f64 * PI / n as f64).cos()).collect();
    let weight = |k: usize| (if k == 0 || k == n { 2.0 } else { 1.0 }) * if k % 2 == 0 { 1.0 } else { -1.0 };
    let mut d = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = weight(i) / weight(j) / (x[i] - x[j]);
            }
        }
        let row_sum: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -row_sum;
    }
    (x, d)
}

/// Collocation matrix of the solution operator's generator on `[−τ, 0]`
/// with `n_nodes` Chebyshev points; node 0 is `θ = 0`, the last is `θ = −τ`.
pub fn generator_matrix(a: &CMatrix, b: &CMatrix, tau: f64, n_nodes: usize) -> CMatrix {
    let n = a.nrows();
    let big_n = n_nodes - 1;
    let (_, d) = cheb_diff(big_n);
    let size = n_nodes * n;
    let mut g = CMatrix::zeros(size, size);
    g.view_mut((0, 0), (n, n)).copy_from(a);
    g.view_mut((0, big_n * n), (n, n)).copy_from(b);
    let scale = 2.0 / tau;
    for k in 1..=big_n {
        for j in 0..=big_n {
            let v = c64(scale * d[(k, j)], 0.0);
            if v == C64::default() {
                continue;
            }
            for r in 0..n {
                g[(k * n + r, j * n + r)] = v;
            }
        }
    }
    g
}

fn collocation_abscissa(a: &CMatrix, b: &CMatrix, tau: f64, n_nodes: usize) -> Result<f64> {
    let g = generator_matrix(a, b, tau, n_nodes);
    let eigs = if linalg::is_real(&g) {
        linalg::real_eigenvalues(g.map(|z| z.re))?
    } else {
        linalg::eig(&g)?
    };
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Characteristic roots with real part at least `re_min`: collocation
/// eigenvalues polished by Newton's method on `det T(z)`, using
/// `(det T)'/det T = tr(T(z)^{-1} T'(z))`. A root whose Newton iteration
/// wanders off keeps its collocation value.
pub fn dde_roots(a: &CMatrix, b: &CMatrix, tau: f64, n_nodes: usize, re_min: f64) -> Result<Vec<C64>> {
    let t = MatFunction::delay(a.clone(), b.clone(), tau)?;
    let g = generator_matrix(a, b, tau, n_nodes);
    let eigs = if linalg::is_real(&g) { linalg::real_eigenvalues(g.map(|z| z.re))? } else { linalg::eig(&g)? };
    let n = a.nrows();
    let polish = |z0: C64| -> C64 {
        let mut z = z0;
        for _ in 0..30 {
            let Ok(tz) = t.eval(z) else { return z0 };
            let mut dt = b.map(|x| x * tau * (-z * tau).exp());
            for i in 0..n {
                dt[(i, i)] += c64(1.0, 0.0);
            }
            let Ok(x) = linalg::solve(&tz, &dt) else { return z };
            let step = c64(1.0, 0.0) / x.trace();
            z -= step;
            if !(z.re.is_finite() && z.im.is_finite()) || (z - z0).norm() > 0.1 * (1.0 + z0.norm()) {
                return z0;
            }
            if step.norm() <= 1e-14 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    };
    Ok(eigs.into_iter().filter(|z| z.re >= re_min).map(polish).collect())
}

/// Spectral abscissa of the delay characteristic function by collocation at
/// `n_nodes` and `2·n_nodes` points.
pub fn dde_spectral_abscissa(a: &CMatrix, b: &CMatrix, tau: f64, n_nodes: usize) -> Result<AbscissaEstimate> {
    let n = linalg::ensure_square(a, "A")?;
    if b.shape() != (n, n) {
        return Err(Error::Dimension("A and B must have the same order".into()));
    }
    if n_nodes < 8 {
        return Err(Error::Precondition(format!("collocation needs at least 8 nodes, got {n_nodes}")));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("delay must be positive, got {tau}")));
    }
    if b.iter().all(|z| *z == C64::default()) {
        let alpha = linalg::spectral_abscissa(a)?;
        return Ok(AbscissaEstimate { value: alpha, refined: alpha, n_nodes, converged: true, warning: None });
    }
    let value = collocation_abscissa(a, b, tau, n_nodes)?;
    let refined = collocation_abscissa(a, b, tau, 2 * n_nodes)?;
    let gap = (value - refined).abs();
    let converged = gap <= 1e-4 * refined.abs().max(1.0);
    let warning = (!converged).then(|| {
        format!("collocation estimates at {n_nodes} and {} nodes differ by {gap:.3e}", 2 * n_nodes)
    });
    Ok(AbscissaEstimate { value, refined, n_nodes, converged, warning })
}

/// How the boundary of an `ε`-pseudospectrum entered a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryMethod {
    /// Exact union of `ε`-disks around the eigenvalues of a normal matrix.
    NormalDisks,
    /// Marching-squares polygon used directly as the integration contour.
    GridPolygon,
    /// Convex hull of the polygon vertices.
    ConvexHull,
}

/// Contour data entering `L·e^{t x}/(2π ε_eff)` or `L·r^n/(2π ε_eff)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGeometry {
    pub epsilon: f64,
    pub method: GeometryMethod,
    /// Contour length.
    pub length: f64,
    /// Largest real part on the contour.
    pub max_re: f64,
    /// Largest modulus on the contour.
    pub max_abs: f64,
    /// Smallest `σ` sampled on the contour (equals `ε` for exact disks).
    pub eps_eff: f64,
    /// Nodes along the longer side of each window.
    pub resolution: usize,
    pub windows: usize,
    pub certified: bool,
    /// Length at half resolution, when certification ran.
    pub coarse_length: Option<f64>,
}

impl LevelGeometry {
    pub fn exp_bound(&self, t: f64) -> f64 {
        self.length * (t * self.max_re).exp() / (2.0 * PI * self.eps_eff)
    }

    pub fn power_bound(&self, n: u32) -> f64 {
        self.length * self.max_abs.powi(n as i32) / (2.0 * PI * self.eps_eff)
    }
}

/// Exact boundary of the union of `ε`-disks centred at `points`.
pub fn normal_disk_geometry(points: &[C64], epsilon: f64) -> LevelGeometry {
    let scale = points.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let mut centers: Vec<C64> = Vec::new();
    for &p in points {
        if !centers.iter().any(|c| (c - p).norm() <= 1e-13 * scale) {
            centers.push(p);
        }
    }
    let mut length = 0.0;
    for (i, &c) in centers.iter().enumerate() {
        let mut arcs: Vec<(f64, f64)> = Vec::new();
        for (j, &o) in centers.iter().enumerate() {
            let d = (o - c).norm();
            if i == j || d >= 2.0 * epsilon {
                continue;
            }
            let mid = (o - c).arg().rem_euclid(2.0 * PI);
            let half = (d / (2.0 * epsilon)).acos();
            let (lo, hi) = (mid - half, mid + half);
            if lo < 0.0 {
                arcs.push((lo + 2.0 * PI, 2.0 * PI));
                arcs.push((0.0, hi));
            } else if hi > 2.0 * PI {
                arcs.push((lo, 2.0 * PI));
                arcs.push((0.0, hi - 2.0 * PI));
            } else {
                arcs.push((lo, hi));
            }
        }
        arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut covered = 0.0;
        let mut current: Option<(f64, f64)> = None;
        for (lo, hi) in arcs {
            match current {
                Some((cl, ch)) if lo <= ch => current = Some((cl, ch.max(hi))),
                Some((cl, ch)) => {
                    covered += ch - cl;
                    current = Some((lo, hi));
                }
                None => current = Some((lo, hi)),
            }
        }
        if let Some((cl, ch)) = current {
            covered += ch - cl;
        }
        length += epsilon * (2.0 * PI - covered).max(0.0);
    }
    let max_re = points.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max) + epsilon;
    let max_abs = points.iter().map(|z| z.norm()).fold(0.0, f64::max) + epsilon;
    LevelGeometry {
        epsilon,
        method: GeometryMethod::NormalDisks,
        length,
        max_re,
        max_abs,
        eps_eff: epsilon,
        resolution: 0,
        windows: 0,
        certified: true,
        coarse_length: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Nodes along the longer side of each window.
    pub grid: usize,
    /// Cap on per-window resolution while trying to enclose every pole.
    pub max_grid: usize,
    /// Recompute at double resolution and require the length to agree to 1%.
    pub certify: bool,
    /// Also evaluate the convex hull of the level curves and keep the
    /// variant with the smaller bound at the reference time.
    pub hull: bool,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self { grid: 200, max_grid: 1600, certify: false, hull: true }
    }
}

struct WindowResult {
    grid: GridSpec,
    level: LevelSet,
}

fn cluster_windows(poles: &[C64], radius: f64) -> Vec<GridSpec> {
    let mut boxes: Vec<(f64, f64, f64, f64)> =
        poles.iter().map(|p| (p.re - radius, p.re + radius, p.im - radius, p.im + radius)).collect();
    merge_boxes(&mut boxes);
    boxes
        .into_iter()
        .map(|(a, b, c, d)| GridSpec { re_min: a, re_max: b, im_min: c, im_max: d, nx: 2, ny: 2 })
        .collect()
}

fn merge_boxes(boxes: &mut Vec<(f64, f64, f64, f64)>) {
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let (a, b) = (boxes[i], boxes[j]);
                if a.0 <= b.1 && b.0 <= a.1 && a.2 <= b.3 && b.2 <= a.3 {
                    boxes[i] = (a.0.min(b.0), a.1.max(b.1), a.2.min(b.2), a.3.max(b.3));
                    boxes.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }
}

fn sample_contour_sigma(sigma: &(dyn Fn(C64) -> f64 + Sync), edges: &[(C64, C64)], spacing: f64) -> f64 {
    edges
        .par_iter()
        .map(|&(a, b)| {
            let pieces = ((b - a).norm() / spacing).ceil().clamp(1.0, 64.0) as usize;
            (0..=pieces)
                .map(|k| sigma(a + (b - a) * (k as f64 / pieces as f64)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut pts: Vec<C64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
    let mut hull: Vec<C64> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

const RING_RAYS: usize = 16;
const RING_VERTICES: usize = 48;
const RING_REACH: f64 = 8.0;

/// A small polygon around an isolated pole whose sublevel component is too
/// thin for the grid. Its radius is 1.5 times the largest crossing of `ε`
/// along a fan of rays. Traced curves lying wholly inside the ring are
/// dropped; the rest must stay clear of it.
fn pole_ring(
    sigma: &(dyn Fn(C64) -> f64 + Sync),
    epsilon: f64,
    pole: C64,
    spacing: f64,
    level: &mut LevelSet,
) -> bool {
    let mut reach: f64 = 0.0;
    for k in 0..RING_RAYS {
        let dir = C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / RING_RAYS as f64);
        let mut r = spacing * 1e-8;
        while sigma(pole + dir * r) < epsilon {
            r *= 2.0;
            if r > RING_REACH * spacing {
                return false;
            }
        }
        reach = reach.max(bisect_crossing(&|s| sigma(pole + dir * s), epsilon, 0.5 * r, r));
    }
    let radius = 1.5 * reach;
    let inside = |z: &C64| (z - pole).norm() < radius;
    let kept: Vec<Polyline> =
        level.polylines.iter().filter(|pl| !(pl.closed && pl.vertices.iter().all(inside))).cloned().collect();
    let clear = kept.iter().flat_map(Polyline::edges).all(|(a, b)| {
        let ab = b - a;
        let s = if ab.norm_sqr() > 0.0 { ((pole - a) * ab.conj()).re / ab.norm_sqr() } else { 0.0 };
        (pole - (a + ab * s.clamp(0.0, 1.0))).norm() > 1.01 * radius
    });
    if !clear {
        return false;
    }
    level.polylines = kept;
    if level.contains(pole) {
        return true;
    }
    let vertices = (0..RING_VERTICES)
        .map(|k| pole + C64::from_polar(radius, 2.0 * PI * k as f64 / RING_VERTICES as f64))
        .collect();
    level.polylines.push(Polyline { vertices, closed: true });
    true
}

fn trace_windows(
    sigma: &(dyn Fn(C64) -> f64 + Sync),
    epsilon: f64,
    required: &[C64],
    initial: Vec<GridSpec>,
    grid: usize,
    max_grid: usize,
) -> Result<Vec<WindowResult>> {
    let mut windows = initial;
    let mut resolution: Vec<usize> = vec![grid; windows.len()];
    let mut done: Vec<Option<LevelSet>> = vec![None; windows.len()];
    let mut growth = 0;
    loop {
        let mut changed = false;
        for w in 0..windows.len() {
            if done[w].is_some() {
                continue;
            }
            let spec = windows[w];
            let g = GridSpec::with_resolution(spec.re_min, spec.re_max, spec.im_min, spec.im_max, resolution[w])?;
            let field = sample_field(g, sigma);
            let level = extract_boundary(&field, epsilon);
            if level.touches_boundary {
                growth += 1;
                if growth > 200 {
                    return Err(Error::WindowTooSmall(format!(
                        "the {epsilon:e}-level set keeps reaching the window edge"
                    )));
                }
                let (cx, cy) = (0.5 * (spec.re_min + spec.re_max), 0.5 * (spec.im_min + spec.im_max));
                let (hw, hh) = (spec.re_max - spec.re_min, spec.im_max - spec.im_min);
                windows[w] = GridSpec { re_min: cx - hw, re_max: cx + hw, im_min: cy - hh, im_max: cy + hh, ..spec };
                changed = true;
                break;
            }
            let mut level = level;
            let missing: Vec<C64> = required.iter().cloned().filter(|&p| spec.contains(p) && !level.contains(p)).collect();
            if !missing.is_empty() {
                let spacing = g.dx().min(g.dy());
                let mut ringed = level.clone();
                let closed = missing.iter().all(|&p| ringed.contains(p) || pole_ring(sigma, epsilon, p, spacing, &mut ringed));
                if closed {
                    level = ringed;
                } else if resolution[w] * 2 <= max_grid {
                    resolution[w] *= 2;
                    continue;
                } else {
                    return Err(Error::NotFound(format!(
                        "the {epsilon:e}-level curves do not enclose every pole at resolution {}",
                        resolution[w]
                    )));
                }
            }
            done[w] = Some(level);
        }
        if changed {
            let mut boxes: Vec<(f64, f64, f64, f64)> =
                windows.iter().map(|g| (g.re_min, g.re_max, g.im_min, g.im_max)).collect();
            let before = boxes.len();
            merge_boxes(&mut boxes);
            if boxes.len() != before {
                let max_res = resolution.iter().cloned().max().unwrap_or(grid);
                windows = boxes
                    .into_iter()
                    .map(|(a, b, c, d)| GridSpec { re_min: a, re_max: b, im_min: c, im_max: d, nx: 2, ny: 2 })
                    .collect();
                resolution = vec![max_res; windows.len()];
                done = vec![None; windows.len()];
            } else {
                for (w, d) in done.iter_mut().enumerate() {
                    if windows.iter().enumerate().any(|(o, g)| o != w && g.overlaps(&windows[w])) {
                        *d = None;
                    }
                }
            }
            continue;
        }
        if done.iter().all(Option::is_some) {
            break;
        }
    }
    for p in required {
        if !windows.iter().any(|g| g.contains(*p)) {
            return Err(Error::NotFound(format!("pole {p} lies outside every window")));
        }
    }
    Ok(windows
        .into_iter()
        .zip(resolution)
        .zip(done)
        .map(|((spec, res), level)| WindowResult {
            grid: GridSpec::with_resolution(spec.re_min, spec.re_max, spec.im_min, spec.im_max, res)
                .expect("validated window"),
            level: level.expect("every window traced"),
        })
        .collect())
}

fn summarize(
    sigma: &(dyn Fn(C64) -> f64 + Sync),
    epsilon: f64,
    traced: &[WindowResult],
) -> (LevelGeometry, Vec<C64>, f64) {
    let spacing = traced.iter().map(|w| w.grid.dx().min(w.grid.dy())).fold(f64::INFINITY, f64::min);
    let edges: Vec<(C64, C64)> =
        traced.iter().flat_map(|w| w.level.polylines.iter().flat_map(Polyline::edges)).collect();
    let vertices: Vec<C64> = traced.iter().flat_map(|w| w.level.vertices().cloned()).collect();
    let length = traced.iter().map(|w| arc_length(&w.level)).sum();
    let max_re = vertices.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let max_abs = vertices.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let eps_eff = sample_contour_sigma(sigma, &edges, spacing / 2.0).min(epsilon);
    let resolution = traced.iter().map(|w| w.grid.nx.max(w.grid.ny)).max().unwrap_or(0);
    (
        LevelGeometry {
            epsilon,
            method: GeometryMethod::GridPolygon,
            length,
            max_re,
            max_abs,
            eps_eff,
            resolution,
            windows: traced.len(),
            certified: false,
            coarse_length: None,
        },
        vertices,
        spacing,
    )
}

/// Hull and polygon share their extreme points, so only `L/ε_eff` decides.
fn score(g: &LevelGeometry) -> f64 {
    g.length / g.eps_eff
}

/// Certified contour data for `{‖T(z)^{-1}‖ > 1/ε}` traced on grids.
///
/// `poles` are the candidate singularities of `T^{-1}`; each one where the
/// resolvent norm exceeds `1/ε` must end up inside the traced region.
/// `radius` bounds the initial window around each cluster of poles; windows
/// start no wider than a quarter of the largest pole modulus and grow until no
/// level curve touches their edge and are refined until every required pole
/// is enclosed, so the polygon is a valid integration contour.
pub fn level_geometry(
    t: &MatFunction,
    epsilon: f64,
    poles: &[C64],
    radius: f64,
    opts: GeometryOptions,
) -> Result<LevelGeometry> {
    let sigma = |z: C64| t.sigma(z);
    level_geometry_with(&sigma, epsilon, poles, radius, opts)
}

pub fn level_geometry_with(
    sigma: &(dyn Fn(C64) -> f64 + Sync),
    epsilon: f64,
    poles: &[C64],
    radius: f64,
    opts: GeometryOptions,
) -> Result<LevelGeometry> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    let scale = poles.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let probe = c64(1.0, 0.4) * (1e-9 * scale);
    let required: Vec<C64> = poles.iter().cloned().filter(|&p| sigma(p + probe) < epsilon).collect();
    let radius = if radius.is_finite() && radius > 0.0 { radius } else { epsilon * scale };
    let seeds = poles;
    if seeds.is_empty() {
        return Err(Error::NotFound("no poles supplied to seed the level-set search".into()));
    }
    let reach = seeds.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let seed_radius = radius.min(0.25 * reach.max(4.0 * epsilon)).max(2.0 * epsilon);
    let initial = cluster_windows(seeds, seed_radius);
    let traced = trace_windows(sigma, epsilon, &required, initial, opts.grid, opts.max_grid)?;
    let (mut geometry, vertices, spacing) = summarize(sigma, epsilon, &traced);

    if opts.certify {
        let finer_grid = (2 * opts.grid).max(geometry.resolution * 2);
        let windows: Vec<GridSpec> = traced.iter().map(|w| w.grid).collect();
        let fine = trace_windows(sigma, epsilon, &required, windows, finer_grid, 2 * opts.max_grid.max(finer_grid))?;
        let (fine_geometry, _, _) = summarize(sigma, epsilon, &fine);
        let agree = (fine_geometry.length - geometry.length).abs() <= 0.01 * fine_geometry.length;
        let coarse = geometry.length;
        geometry = LevelGeometry { certified: agree, coarse_length: Some(coarse), ..fine_geometry };
    }

    if opts.hull && vertices.len() >= 3 {
        let hull = convex_hull(&vertices);
        if hull.len() >= 3 {
            let edges: Vec<(C64, C64)> =
                hull.iter().zip(hull.iter().cycle().skip(1)).map(|(&a, &b)| (a, b)).collect();
            let length: f64 = edges.iter().map(|(a, b)| (b - a).norm()).sum();
            let eps_eff = sample_contour_sigma(sigma, &edges, spacing / 2.0);
            if eps_eff > 0.0 {
                let candidate = LevelGeometry {
                    method: GeometryMethod::ConvexHull,
                    length,
                    max_re: hull.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
                    max_abs: hull.iter().map(|z| z.norm()).fold(0.0, f64::max),
                    eps_eff,
                    ..geometry.clone()
                };
                if score(&candidate) < score(&geometry) {
                    geometry = candidate;
                }
            }
        }
    }
    Ok(geometry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, real_diag};
    use approx::assert_abs_diff_eq;

    fn scalar_pencil(a: f64) -> MatFunction {
        MatFunction::pencil(real_diag(&[a])).unwrap()
    }

    #[test]
    fn field_examples() {
        let g = GridSpec::new(-2.0, 0.0, -1.0, 1.0, 3, 3).unwrap();
        let f = compute_field(&scalar_pencil(-1.0), g);
        assert_abs_diff_eq!(f.value(1, 1), 0.0, epsilon = 1e-15);
        let t = scalar_pencil(-1.0);
        assert_abs_diff_eq!(t.sigma(c64(-1.0, 0.3)), 0.3, epsilon = 1e-15);
        let d = MatFunction::delay(real_diag(&[-1.0]), real_diag(&[-0.5]), 1.0).unwrap();
        assert_abs_diff_eq!(d.sigma(C64::default()), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(1.0, 0.0, 0.0, 1.0, 10, 10).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 1, 10).is_err());
    }

    #[test]
    fn scalar_disk_level_set() {
        let g = GridSpec::new(-2.0, 0.0, -1.0, 1.0, 400, 400).unwrap();
        let f = compute_field(&scalar_pencil(-1.0), g);
        let ls = extract_boundary(&f, 0.25);
        assert_eq!(ls.polylines.len(), 1);
        assert!(ls.polylines[0].closed);
        assert!(!ls.touches_boundary);
        let len = arc_length(&ls);
        assert!((len - 2.0 * PI * 0.25).abs() < 0.02 * 2.0 * PI * 0.25);
        for v in ls.vertices() {
            assert!(((v + 1.0).norm() - 0.25).abs() < 1e-3);
        }
        assert!(ls.contains(c64(-1.0, 0.0)));
        assert!(!ls.contains(c64(-0.5, 0.0)));
    }

    #[test]
    fn empty_level_set_above_field() {
        let g = GridSpec::new(-2.0, 0.0, -1.0, 1.0, 50, 50).unwrap();
        let f = compute_field(&scalar_pencil(-1.0), g);
        let ls = extract_boundary(&f, 10.0);
        assert!(ls.polylines.is_empty());
        assert_eq!(arc_length(&ls), 0.0);
        let ls = extract_boundary(&f, -1.0);
        assert_eq!(arc_length(&ls), 0.0);
    }

    #[test]
    fn saddle_cells_do_not_cross() {
        // Two disks whose level set nearly touches produce saddle cells.
        let m = real_diag(&[-1.0, 1.0]);
        let t = MatFunction::pencil(m).unwrap();
        let g = GridSpec::new(-2.5, 2.5, -1.5, 1.5, 101, 61).unwrap();
        let f = compute_field(&t, g);
        let ls = extract_boundary(&f, 1.0);
        assert!(ls.polylines.iter().all(|p| p.closed));
        assert!(ls.contains(c64(-1.0, 0.0)) && ls.contains(c64(1.0, 0.0)));
    }

    #[test]
    fn abscissa_and_radius_of_disks() {
        let g = GridSpec::new(-2.0, 0.0, -1.0, 1.0, 200, 200).unwrap();
        let a = pseudo_abscissa(&scalar_pencil(-1.0), 0.25, g).unwrap();
        assert_abs_diff_eq!(a, -0.75, epsilon = 1e-6);
        let g = GridSpec::new(-1.0, 1.0, -1.0, 1.0, 101, 101).unwrap();
        let r = pseudo_radius(&scalar_pencil(0.5), 0.1, g).unwrap();
        assert_abs_diff_eq!(r, 0.6, epsilon = 1e-6);
        let zero = MatFunction::pencil(CMatrix::zeros(2, 2)).unwrap();
        let g = GridSpec::new(-0.3, 0.3, -0.3, 0.3, 61, 61).unwrap();
        assert_abs_diff_eq!(pseudo_radius(&zero, 0.1, g).unwrap(), 0.1, epsilon = 1e-6);
    }

    #[test]
    fn abscissa_errors() {
        let g = GridSpec::new(-2.0, 0.0, -1.0, 1.0, 50, 50).unwrap();
        assert!(matches!(pseudo_abscissa(&scalar_pencil(-1.0), 1e-9, g), Err(Error::NotFound(_))));
        let g = GridSpec::new(-2.0, -0.9, -1.0, 1.0, 50, 50).unwrap();
        assert!(matches!(pseudo_abscissa(&scalar_pencil(-1.0), 0.25, g), Err(Error::WindowTooSmall(_))));
    }

    #[test]
    fn disk_union_length() {
        let eps = 0.5;
        let single = normal_disk_geometry(&[c64(-1.0, 0.0)], eps);
        assert_abs_diff_eq!(single.length, 2.0 * PI * eps, epsilon = 1e-14);
        // Two disks at distance eps: each loses a 2π/3 arc.
        let pair = normal_disk_geometry(&[c64(0.0, 0.0), c64(eps, 0.0)], eps);
        assert_abs_diff_eq!(pair.length, 2.0 * eps * (2.0 * PI - 2.0 * PI / 3.0), epsilon = 1e-12);
        let dup = normal_disk_geometry(&[c64(1.0, 0.0), c64(1.0, 0.0)], eps);
        assert_abs_diff_eq!(dup.length, 2.0 * PI * eps, epsilon = 1e-14);
        assert_abs_diff_eq!(dup.max_re, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn chebyshev_matrix_differentiates_polynomials() {
        let (x, d) = cheb_diff(10);
        let f: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        for i in 0..=10 {
            let df: f64 = (0..=10).map(|j| d[(i, j)] * f[j]).sum();
            assert_abs_diff_eq!(df, 3.0 * x[i] * x[i], epsilon = 1e-11);
        }
    }

    #[test]
    fn collocation_without_delay_term() {
        let a = from_real_rows(2, 2, &[-1.0, 3.0, 0.0, -2.0]).unwrap();
        let est = dde_spectral_abscissa(&a, &CMatrix::zeros(2, 2), 1.0, 8).unwrap();
        assert_eq!(est.value, -1.0);
        assert!(dde_spectral_abscissa(&a, &CMatrix::zeros(2, 2), 1.0, 4).is_err());
    }

    #[test]
    fn geometry_of_jordan_block_encloses_spectrum() {
        let m = from_real_rows(2, 2, &[-1.0, 20.0, 0.0, -2.0]).unwrap();
        let t = MatFunction::pencil(m).unwrap();
        let poles = [c64(-1.0, 0.0), c64(-2.0, 0.0)];
        let geo = level_geometry(&t, 1e-2, &poles, 0.05, GeometryOptions::default()).unwrap();
        assert!(geo.length > 0.0 && geo.eps_eff > 0.0 && geo.eps_eff <= 1e-2);
        assert!(geo.max_re > -1.0);
    }
}
