use std::path::Path;

use pseudobound::ddebounds::{
    fundamental_bounds, history_bound, history_weight, DelayOptions, DelaySystem, ExpmSup, RadicalExponent, TailForm,
    Variant,
};
use pseudobound::linalg::{self, C64};
use pseudobound::lowerbounds::lb_scan;
use pseudobound::matfun::{self, HodeProblem, MatFunction, Recurrence};
use pseudobound::odebounds::{self, BoundCurve, Provenance};
use pseudobound::problems::{self, Problem, ProblemDef};
use pseudobound::pseudo::{self, GeometryOptions, GridSpec};
use pseudobound::simulate::{self, DdeProblem, Trajectory};
use pseudobound::Error;
use serde_json::json;

use crate::output::{header, num, CliError, CliResult, Run};
use crate::{
    BoundKind, CompareArgs, DdeArgs, DiffeqForm, EpsArgs, ExponentArg, LowerArgs, PseudoArgs, SimulateArgs, TailArg,
    VariantArg,
};

struct Loaded {
    def: ProblemDef,
    problem: Problem,
}

fn load(spec: &str) -> CliResult<Loaded> {
    let looks_like_path = spec.ends_with(".json") || spec.contains('/') || Path::new(spec).is_file();
    let def = if looks_like_path { problems::load_problem(Path::new(spec)) } else { problems::preset(spec) }
        .map_err(|e| match e {
            Error::Io(io) => CliError::Input(format!("{spec}: {io}")),
            other => CliError::Input(other.to_string()),
        })?;
    let problem = def.resolve().map_err(|e| CliError::Input(format!("{spec}: {e}")))?;
    Ok(Loaded { def, problem })
}

fn precondition(message: String) -> CliError {
    CliError::Compute(Error::Precondition(message))
}

fn kind_name(p: &Problem) -> &'static str {
    match p {
        Problem::Ode { .. } => "ode",
        Problem::Hode(_) => "hode",
        Problem::Diffeq(_) => "diffeq",
        Problem::Dde(_) => "dde",
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn pair<T: Copy>(values: &[T], flag: &str) -> CliResult<(T, T)> {
    match values {
        [a, b] => Ok((*a, *b)),
        _ => Err(CliError::Input(format!("--{flag} takes exactly two comma-separated values"))),
    }
}

fn mat_function(problem: &Problem) -> CliResult<MatFunction> {
    Ok(match problem {
        Problem::Ode { m, .. } => MatFunction::pencil(m.clone())?,
        Problem::Hode(h) | Problem::Diffeq(h) => MatFunction::pencil(matfun::companion(h))?,
        Problem::Dde(p) => MatFunction::delay(p.a.clone(), p.b.clone(), p.tau)?,
    })
}

fn default_nodes(dim: usize) -> usize {
    if dim > 50 { 8 } else { 24 }
}

fn default_window(t: &MatFunction, eps_max: f64, nx: usize, ny: usize) -> CliResult<GridSpec> {
    let g = match t {
        MatFunction::Pencil { m } => {
            let w = odebounds::pencil_window(m, eps_max, nx.max(ny))?;
            GridSpec::new(w.re_min, w.re_max, w.im_min, w.im_max, nx, ny)?
        }
        MatFunction::DelayChar { a, b, tau } => {
            let alpha = pseudo::dde_spectral_abscissa(a, b, *tau, default_nodes(a.nrows()))?.conservative();
            GridSpec::new(alpha - 2.0, alpha + 1.0 + 60.0 * eps_max, -10.0, 10.0, nx, ny)?
        }
        _ => return Err(precondition("no default window for this form".into())),
    };
    Ok(g)
}

pub fn pseudospectrum(out: &Path, args: &PseudoArgs) -> CliResult<()> {
    let loaded = load(&args.problem)?;
    if args.eps.is_empty() || args.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(CliError::Input("--eps values must be positive".into()));
    }
    let (nx, ny) = pair(&args.grid, "grid")?;
    let t = mat_function(&loaded.problem)?;
    let eps_max = args.eps.iter().cloned().fold(0.0, f64::max);
    let grid = match &args.window {
        Some(w) if w.len() == 4 => GridSpec::new(w[0], w[1], w[2], w[3], nx, ny)?,
        Some(_) => return Err(CliError::Input("--window takes re_min,re_max,im_min,im_max".into())),
        None => default_window(&t, eps_max, nx, ny)?,
    };
    let field = pseudo::compute_field(&t, grid);
    let seeds: Vec<C64> = match &t {
        MatFunction::Pencil { m } => linalg::eig(m)?,
        MatFunction::DelayChar { a, b, tau } => pseudo::dde_roots(a, b, *tau, default_nodes(a.nrows()), grid.re_min)?,
        _ => Vec::new(),
    };
    let seeds: Vec<C64> = seeds.into_iter().filter(|z| grid.im_min <= z.im && z.im <= grid.im_max).collect();

    let mut run = Run::new(out, &loaded.def, json!({ "eps": args.eps, "grid": grid }))?;
    let mut rows = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let z = grid.node(i, j);
            rows.push(vec![num(z.re), num(z.im), num(field.value(i, j))]);
        }
    }
    run.csv("field.csv", &header(&["re", "im", "sigma_min"]), &rows)?;

    let mut level_rows = Vec::new();
    let mut summary = Vec::new();
    for &eps in &args.eps {
        let level = pseudo::extract_boundary(&field, eps);
        for (id, line) in level.polylines.iter().enumerate() {
            for z in &line.vertices {
                level_rows.push(vec![num(eps), id.to_string(), line.closed.to_string(), num(z.re), num(z.im)]);
            }
        }
        let alpha = match pseudo::pseudo_abscissa_seeded(&t, eps, &field, &seeds) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("warning: eps {eps:e}: {e}");
                f64::NAN
            }
        };
        if level.touches_boundary {
            eprintln!("warning: eps {eps:e}: the level set reaches the window edge; its length is truncated");
        }
        summary.push(vec![
            num(eps),
            num(pseudo::arc_length(&level)),
            num(alpha),
            (!level.touches_boundary).to_string(),
        ]);
        println!("eps {eps:.3e}: length {:.6}, abscissa {alpha:.6}", pseudo::arc_length(&level));
    }
    run.csv("levels.csv", &header(&["eps", "polyline", "closed", "re", "im"]), &level_rows)?;
    run.csv("summary.csv", &header(&["eps", "length", "alpha_eps", "enclosed"]), &summary)?;
    run.finish()
}

fn eps_values(explicit: &Option<Vec<f64>>, mesh: &[u32]) -> CliResult<Vec<f64>> {
    let eps = match explicit {
        Some(e) => e.clone(),
        None => {
            let (lo, hi) = pair(mesh, "eps-mesh")?;
            odebounds::epsilon_mesh(lo, hi)
        }
    };
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(CliError::Input("ε values must be positive".into()));
    }
    Ok(eps)
}

fn use_majorant(h: &HodeProblem, form: DiffeqForm) -> bool {
    match form {
        DiffeqForm::Auto => h.endpoint_structure(),
        DiffeqForm::Majorant => true,
        DiffeqForm::Blocks => false,
    }
}

/// One curve per ε that succeeds; failures are reported and skipped.
fn eps_curves(problem: &Problem, eps: &[f64], times: &[f64], form: DiffeqForm) -> CliResult<Vec<(f64, BoundCurve)>> {
    let opts = GeometryOptions::default();
    let mut curves = Vec::new();
    let mut last_error = None;
    for &e in eps {
        let curve = match problem {
            Problem::Ode { m, .. } => odebounds::ode_upper_bound(m, e, times, opts),
            Problem::Hode(h) => odebounds::hode_upper_bound(h, e, times, opts),
            Problem::Diffeq(h) => {
                let steps: Vec<u32> = times.iter().map(|t| *t as u32).collect();
                odebounds::diffeq_upper_bound(h, e, &steps, use_majorant(h, form), opts)
            }
            Problem::Dde(_) => return Err(precondition("delay problems use `bound dde`".into())),
        };
        match curve {
            Ok(c) => curves.push((e, c)),
            Err(err) => {
                eprintln!("warning: eps {e:e}: {err}");
                last_error = Some(err);
            }
        }
    }
    match (curves.is_empty(), last_error) {
        (true, Some(err)) => Err(err.into()),
        _ => Ok(curves),
    }
}

fn sample_times(problem: &Problem, t_end: f64, samples: usize) -> CliResult<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CliError::Input(format!("--t-end must be positive, got {t_end}")));
    }
    Ok(match problem {
        Problem::Diffeq(_) => (0..=t_end.floor() as u32).map(f64::from).collect(),
        _ => linspace(0.0, t_end, samples.max(2)),
    })
}

fn curve_summary(curves: &[(f64, BoundCurve)]) -> serde_json::Value {
    json!(curves
        .iter()
        .map(|(e, c)| json!({ "eps": e, "certified": c.certified, "provenance": c.provenance }))
        .collect::<Vec<_>>())
}

fn eps_bound(out: &Path, args: &EpsArgs, want: &str, form: DiffeqForm) -> CliResult<()> {
    let loaded = load(&args.problem)?;
    if kind_name(&loaded.problem) != want {
        return Err(precondition(format!(
            "`bound {want}` needs a problem of kind {want}; `{}` has kind {}",
            args.problem,
            kind_name(&loaded.problem)
        )));
    }
    let eps = eps_values(&args.eps, &args.eps_mesh)?;
    let times = sample_times(&loaded.problem, args.t_end, args.samples)?;
    let curves = eps_curves(&loaded.problem, &eps, &times, form)?;
    let just: Vec<BoundCurve> = curves.iter().map(|(_, c)| c.clone()).collect();
    let env = odebounds::envelope(&just)?;

    let time_col = if want == "diffeq" { "n" } else { "t" };
    let mut head = header(&[time_col, "bound", "eps_used"]);
    head.extend(curves.iter().map(|(e, _)| format!("eps={e:e}")));
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![num(*t), num(env[i].0), num(curves[env[i].1].0)];
            row.extend(curves.iter().map(|(_, c)| num(c.values[i])));
            row
        })
        .collect();
    let mut run = Run::new(
        out,
        &loaded.def,
        json!({ "kind": want, "eps": eps, "t_end": args.t_end, "samples": times.len(), "geometry": GeometryOptions::default() }),
    )?;
    run.set("curves", curve_summary(&curves));
    run.csv("bound.csv", &head, &rows)?;
    let peak = env.iter().map(|(v, _)| *v).fold(0.0, f64::max);
    println!("{} ε values succeeded; largest envelope value {peak:.6e}", curves.len());
    run.finish()
}

pub fn bound(out: &Path, kind: &BoundKind) -> CliResult<()> {
    match kind {
        BoundKind::Ode(args) => eps_bound(out, args, "ode", DiffeqForm::Auto),
        BoundKind::Hode(args) => eps_bound(out, args, "hode", DiffeqForm::Auto),
        BoundKind::Diffeq { eps, form } => eps_bound(out, eps, "diffeq", *form),
        BoundKind::Dde(args) => dde_bound(out, args),
    }
}

fn variants(v: VariantArg) -> Vec<Variant> {
    match v {
        VariantArg::Split => vec![Variant::Split],
        VariantArg::Vertical => vec![Variant::Vertical],
        VariantArg::Nonsplit => vec![Variant::Nonsplit],
        VariantArg::NonsplitShifted => vec![Variant::NonsplitShifted],
        VariantArg::All => Variant::ALL.to_vec(),
    }
}

fn delay_options(args: &DdeArgs) -> CliResult<DelayOptions> {
    let y0 = match args.y0.as_str() {
        "auto" => None,
        v => Some(v.parse::<f64>().map_err(|_| CliError::Input(format!("--y0 expects a number or `auto`, got `{v}`")))?),
    };
    Ok(DelayOptions {
        tail: match args.tail {
            TailArg::Statement => TailForm::Statement,
            TailArg::Proof => TailForm::Proof,
        },
        exponent: match args.exponent {
            ExponentArg::Squared => RadicalExponent::Squared,
            ExponentArg::Printed => RadicalExponent::Printed,
        },
        y0,
        t_ref: args.t_ref,
        ..DelayOptions::default()
    })
}

fn dde_of(loaded: &Loaded, name: &str) -> CliResult<DdeProblem> {
    match &loaded.problem {
        Problem::Dde(p) => Ok(p.clone()),
        other => Err(precondition(format!("`{name}` is {}, not a delay problem", kind_name(other)))),
    }
}

struct DelayCurves {
    names: Vec<&'static str>,
    curves: Vec<BoundCurve>,
}

/// Fundamental-solution bounds per variant, or solution bounds when
/// `solution` is set; failed variants are reported and skipped.
fn delay_curves(
    sys: &DelaySystem,
    p: &DdeProblem,
    variants: &[Variant],
    times: &[f64],
    opts: &DelayOptions,
    solution: bool,
) -> CliResult<DelayCurves> {
    let mut out = DelayCurves { names: Vec::new(), curves: Vec::new() };
    let mut last_error = None;
    let phi_weight = history_weight(&p.b, &p.history, p.tau);
    let u0_norm = p.u0.norm();
    for (v, curve) in variants.iter().zip(fundamental_bounds(sys, variants, times, opts)) {
        let curve = curve.and_then(|c| {
            if !solution {
                return Ok(c);
            }
            match &c.provenance {
                Provenance::DelayContour(prov) => history_bound(sys, &prov.terms, u0_norm, phi_weight, times, opts),
                _ => Ok(BoundCurve { values: c.values.iter().map(|v| v * u0_norm).collect(), ..c }),
            }
        });
        match curve {
            Ok(c) => {
                out.names.push(v.name());
                out.curves.push(c);
            }
            Err(e) => {
                eprintln!("warning: {}: {e}", v.name());
                last_error = Some(e);
            }
        }
    }
    match (out.curves.is_empty(), last_error) {
        (true, Some(e)) => Err(e.into()),
        _ => Ok(out),
    }
}

fn contour_records(dc: &DelayCurves) -> serde_json::Value {
    json!(dc
        .names
        .iter()
        .zip(&dc.curves)
        .map(|(name, c)| match &c.provenance {
            Provenance::DelayContour(p) => {
                let t = &p.terms;
                println!(
                    "{name:>16}: y0 {:.6e} eta {:.6e} x0 {:.6e} beta {:.4e} I0 {:.6e} C {:.6e}",
                    t.params.y0, t.params.eta, t.params.x0, t.params.beta, t.i0, t.c
                );
                json!({
                    "variant": name, "y0": t.params.y0, "eta": t.params.eta, "x0": t.params.x0,
                    "beta": t.params.beta, "I0": t.i0, "I0_error": t.i0_error, "C": t.c,
                    "certified": c.certified, "provenance": p,
                })
            }
            other => json!({ "variant": name, "certified": c.certified, "provenance": other }),
        })
        .collect::<Vec<_>>())
}

fn delay_system(p: &DdeProblem, nodes: Option<usize>) -> CliResult<DelaySystem> {
    let nodes = nodes.unwrap_or_else(|| default_nodes(p.dim()));
    Ok(DelaySystem::new(p.a.clone(), p.b.clone(), p.tau, nodes)?)
}

fn dde_bound(out: &Path, args: &DdeArgs) -> CliResult<()> {
    let loaded = load(&args.problem)?;
    let p = dde_of(&loaded, &args.problem)?;
    let opts = delay_options(args)?;
    let t_end = args.t_end.unwrap_or(20.0 * p.tau);
    if !(t_end > p.tau) {
        return Err(CliError::Input(format!("--t-end must exceed the delay {}", p.tau)));
    }
    let times = linspace(p.tau, t_end, args.samples.max(2));
    let sys = delay_system(&p, args.nodes)?;
    let dc = delay_curves(&sys, &p, &variants(args.variant), &times, &opts, args.solution)?;

    let mut head = header(&["t", "best"]);
    head.extend(dc.names.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let best = dc.curves.iter().map(|c| c.values[i]).fold(f64::INFINITY, f64::min);
            let mut row = vec![num(*t), num(best)];
            row.extend(dc.curves.iter().map(|c| num(c.values[i])));
            row
        })
        .collect();
    let mut run = Run::new(
        out,
        &loaded.def,
        json!({
            "t_end": t_end, "samples": times.len(), "options": opts, "solution": args.solution,
            "alpha_t": sys.alpha_t, "alpha_a": sys.alpha_a, "mode": sys.mode,
        }),
    )?;
    run.set("contours", contour_records(&dc));
    run.csv("bound.csv", &head, &rows)?;
    run.finish()
}

fn initial_norm(problem: &Problem) -> Option<f64> {
    match problem {
        Problem::Ode { u0, .. } => u0.as_ref().map(|v| v.norm()),
        Problem::Hode(h) | Problem::Diffeq(h) => Some(h.initial_state().norm()),
        Problem::Dde(p) => Some(p.u0.norm()),
    }
}

pub fn lower_bound(out: &Path, args: &LowerArgs) -> CliResult<()> {
    let loaded = load(&args.problem)?;
    let (lo, hi) = pair(&args.x_range, "x-range")?;
    let t = mat_function(&loaded.problem)?;
    let scan = lb_scan(&t, lo, hi, args.nx)?;
    println!("lower bound {:.6} at x = {:.6}", scan.best, scan.best_x);
    let scaled = initial_norm(&loaded.problem).filter(|n| *n > 0.0).map(|n| (n, n * scan.best));
    if let Some((n, s)) = scaled {
        println!("scaled by the initial norm {n:.6e}: {s:.6}");
    }
    let mut run = Run::new(
        out,
        &loaded.def,
        json!({ "x_range": [lo, hi], "nx": args.nx, "best": scan.best, "best_x": scan.best_x,
                "scaled": scaled.map(|(n, s)| json!({ "initial_norm": n, "value": s })) }),
    )?;
    if args.bracket {
        let p = dde_of(&loaded, &args.problem)?;
        let t_end = args.t_end.unwrap_or(20.0 * p.tau);
        let sys = delay_system(&p, None)?;
        let times = linspace(p.tau, t_end, 400);
        let dc = delay_curves(&sys, &p, &Variant::ALL, &times, &DelayOptions::default(), false)?;
        let tail = dc.curves.iter().map(BoundCurve::sup).fold(f64::INFINITY, f64::min);
        let head = ExpmSup::new(&sys, p.tau)?.sup(0.0, p.tau);
        let upper = tail.max(head);
        println!("bracket on sup ‖Ψ(t)‖ over [0, {t_end}]: [{:.6}, {upper:.6}]", scan.best);
        run.set("bracket", json!({ "lower": scan.best, "upper": upper, "t_end": t_end }));
    }
    let rows: Vec<Vec<String>> =
        scan.table.iter().map(|r| vec![num(r.x), num(r.y_max), num(r.y_star), num(r.value)]).collect();
    run.csv("lower_bound.csv", &header(&["x", "y_max", "y_star", "value"]), &rows)?;
    run.finish()
}

/// Trajectory of the problem's own initial data; an ODE without `u0`
/// reports `‖e^{tM}‖`.
fn trajectory(problem: &Problem, h: Option<f64>, t_end: f64, stride: usize) -> CliResult<Trajectory> {
    let stride = stride.max(1);
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(CliError::Input(format!("--t-end must be positive, got {t_end}")));
    }
    let uniform = |h: f64| -> Vec<f64> {
        let n = (t_end / h).round() as usize;
        (0..=n).step_by(stride).map(|k| k as f64 * h).collect()
    };
    Ok(match problem {
        Problem::Dde(p) => {
            let h = h.unwrap_or_else(|| simulate::default_step(&p.a, p.tau));
            simulate::integrate_dde_every(p, h, t_end, stride)?
        }
        Problem::Ode { m, u0: Some(u0) } => {
            let first = HodeProblem::new(vec![m.clone()], vec![u0.clone()], Recurrence::Differential)?;
            simulate::hode_solution(&first, &uniform(h.unwrap_or(t_end / 1000.0)))?
        }
        Problem::Ode { m, u0: None } => {
            let times = uniform(h.unwrap_or(t_end / 1000.0));
            let norms = simulate::expm_norms(m, &times)?;
            let h = h.unwrap_or(t_end / 1000.0);
            Trajectory { times, states: Vec::new(), norms, h, method: simulate::Method::MatrixExponential }
        }
        Problem::Hode(hp) => simulate::hode_solution(hp, &uniform(h.unwrap_or(t_end / 1000.0)))?,
        Problem::Diffeq(hp) => {
            let full = simulate::iterate_difference(hp, t_end.floor() as usize)?;
            let keep: Vec<usize> = (0..full.times.len()).step_by(stride).collect();
            let pick = |v: &Vec<f64>| keep.iter().map(|&k| v[k]).collect::<Vec<_>>();
            Trajectory {
                times: pick(&full.times),
                states: keep.iter().map(|&k| full.states[k].clone()).collect(),
                norms: pick(&full.norms),
                h: 1.0,
                method: full.method,
            }
        }
    })
}

pub fn simulate(out: &Path, args: &SimulateArgs) -> CliResult<()> {
    let loaded = load(&args.problem)?;
    if args.h.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
        return Err(CliError::Input("--h must be positive".into()));
    }
    let traj = trajectory(&loaded.problem, args.h, args.t_end, args.stride)?;
    let dim = traj.states.first().map_or(0, |s| s.len());
    let mut head = header(&["t", "norm"]);
    if args.components {
        for k in 0..dim {
            head.push(format!("re{k}"));
            head.push(format!("im{k}"));
        }
    }
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut row = vec![num(*t), num(traj.norms[i])];
            if args.components {
                for z in traj.states[i].iter() {
                    row.push(num(z.re));
                    row.push(num(z.im));
                }
            }
            row
        })
        .collect();
    let (peak_at, peak) =
        traj.times.iter().zip(&traj.norms).fold((0.0, f64::NEG_INFINITY), |acc, (t, n)| if *n > acc.1 { (*t, *n) } else { acc });
    println!(
        "initial norm {:.6e}, peak {peak:.6e} at t = {peak_at:.6}, final {:.6e}",
        traj.norms[0],
        traj.norms[traj.norms.len() - 1]
    );
    let mut run = Run::new(
        out,
        &loaded.def,
        json!({ "h": traj.h, "t_end": args.t_end, "stride": args.stride, "method": traj.method }),
    )?;
    run.csv("trajectory.csv", &head, &rows)?;
    run.finish()
}

/// `(bound − norm)/norm ≥ −1e-8`, the tolerance for rounding in both.
fn dominates(bound: f64, norm: f64) -> bool {
    bound - norm >= -1e-8 * norm.abs().max(f64::MIN_POSITIVE)
}

pub fn compare(out: &Path, args: &CompareArgs) -> CliResult<()> {
    let loaded = load(&args.dde.problem)?;
    let (times, norms, names, curves, params) = match &loaded.problem {
        Problem::Dde(p) => {
            let opts = delay_options(&args.dde)?;
            let t_end = args.dde.t_end.unwrap_or(20.0 * p.tau);
            let h = args.h.unwrap_or_else(|| simulate::default_step(&p.a, p.tau));
            let stride = ((t_end / h) / args.dde.samples.max(1) as f64).floor().max(1.0) as usize;
            let (all_t, all_n) = if args.dde.solution {
                let tr = simulate::integrate_dde_every(p, h, t_end, stride)?;
                (tr.times, tr.norms)
            } else {
                let s = simulate::fundamental_norms(&p.a, &p.b, p.tau, h, t_end, stride)?;
                (s.times, s.norms)
            };
            let (times, norms): (Vec<f64>, Vec<f64>) =
                all_t.into_iter().zip(all_n).filter(|(t, _)| *t >= p.tau * (1.0 - 1e-12)).unzip();
            let sys = delay_system(p, args.dde.nodes)?;
            let dc = delay_curves(&sys, p, &variants(args.dde.variant), &times, &opts, args.dde.solution)?;
            let params = json!({ "h": h, "t_end": t_end, "options": opts, "solution": args.dde.solution,
                                 "contours": contour_records(&dc) });
            let names: Vec<String> = dc.names.iter().map(|s| s.to_string()).collect();
            (times, norms, names, dc.curves, params)
        }
        problem => {
            let eps = eps_values(&args.eps, &args.eps_mesh)?;
            let t_end = args.dde.t_end.unwrap_or(10.0);
            let times = sample_times(problem, t_end, args.dde.samples)?;
            let norms = match problem {
                Problem::Ode { m, u0: None } => simulate::expm_norms(m, &times)?,
                Problem::Ode { m, u0: Some(u0) } => {
                    let first = HodeProblem::new(vec![m.clone()], vec![u0.clone()], Recurrence::Differential)?;
                    simulate::hode_solution(&first, &times)?.norms
                }
                Problem::Hode(h) => simulate::hode_solution(h, &times)?.norms,
                Problem::Diffeq(h) => simulate::iterate_difference(h, t_end.floor() as usize)?.norms,
                Problem::Dde(_) => unreachable!(),
            };
            let scale = match problem {
                Problem::Ode { u0: Some(u0), .. } => u0.norm(),
                _ => 1.0,
            };
            let eps_curves = eps_curves(problem, &eps, &times, args.form)?;
            let names = eps_curves.iter().map(|(e, _)| format!("eps={e:e}")).collect();
            let params = json!({ "eps": eps, "t_end": t_end, "curves": curve_summary(&eps_curves) });
            let curves = eps_curves
                .into_iter()
                .map(|(_, c)| BoundCurve { values: c.values.iter().map(|v| v * scale).collect(), ..c })
                .collect();
            (times, norms, names, curves, params)
        }
    };

    let mut head = header(&["t", "norm"]);
    head.extend(names.iter().cloned());
    head.extend(header(&["best", "sound"]));
    let mut violations = Vec::new();
    let rows: Vec<Vec<String>> = times
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let best = curves.iter().map(|c| c.values[i]).fold(f64::INFINITY, f64::min);
            let sound = curves.iter().all(|c| dominates(c.values[i], norms[i]));
            if !sound {
                violations.push(*t);
            }
            let mut row = vec![num(*t), num(norms[i])];
            row.extend(curves.iter().map(|c| num(c.values[i])));
            row.push(num(best));
            row.push(sound.to_string());
            row
        })
        .collect();
    let mut run = Run::new(out, &loaded.def, params)?;
    run.set("sound", json!(violations.is_empty()));
    run.csv("compare.csv", &head, &rows)?;
    let slack = times
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let best = curves.iter().map(|c| c.values[i]).fold(f64::INFINITY, f64::min);
            (best - norms[i]) / norms[i].max(f64::MIN_POSITIVE)
        })
        .fold(f64::INFINITY, f64::min);
    println!("{} rows, {} bounds, min relative slack of the best bound {slack:.4}", times.len(), curves.len());
    run.finish()?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Unsound(format!("{} rows below the simulated norm, first at t = {}", violations.len(), violations[0])))
    }
}

pub fn presets() -> CliResult<()> {
    for name in problems::PRESETS {
        let def = problems::preset(name).map_err(|e| CliError::Input(e.to_string()))?;
        let kind = def.resolve().map(|p| kind_name(&p)).unwrap_or("?");
        println!("{name:<12} {kind:<7} {}", def.name);
    }
    println!("sizes: pdde:<n> (default 100), laser-disc:<N> (default 10)");
    Ok(())
}

pub fn export(problem: &str, path: &Path) -> CliResult<()> {
    let loaded = load(problem)?;
    problems::save_problem(&loaded.def, path).map_err(|e| CliError::Input(e.to_string()))?;
    println!("wrote {}", path.display());
    Ok(())
}
