use std::f64::consts::PI;

use approx::assert_relative_eq;
use pseudobound::linalg::{c64, CMatrix};
use pseudobound::problems::{self, parse_problem, Problem, ProblemDef, PRESETS};
use pseudobound::simulate::{DdeProblem, History};
use pseudobound::Error;

fn bits(m: &CMatrix) -> Vec<(u64, u64)> {
    m.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

#[test]
fn presets_round_trip_through_json_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    for name in PRESETS.iter().chain(&["pdde:7", "laser-disc:4"]) {
        let def = problems::preset(name).unwrap();
        let path = dir.path().join(format!("{}.json", name.replace(':', "-")));
        problems::save_problem(&def, &path).unwrap();
        let back = problems::load_problem(&path).unwrap();
        assert_eq!(back, def, "{name}");
        match (def.resolve().unwrap(), back.resolve().unwrap()) {
            (Problem::Dde(p), Problem::Dde(q)) => {
                assert_eq!(bits(&p.a), bits(&q.a));
                assert_eq!(bits(&p.b), bits(&q.b));
                assert_eq!(p.tau.to_bits(), q.tau.to_bits());
            }
            (Problem::Ode { m, .. }, Problem::Ode { m: n, .. }) => assert_eq!(bits(&m), bits(&n)),
            (Problem::Hode(h), Problem::Hode(k)) | (Problem::Diffeq(h), Problem::Diffeq(k)) => {
                for (a, b) in h.coeffs.iter().zip(&k.coeffs) {
                    assert_eq!(bits(a), bits(b));
                }
            }
            (p, q) => panic!("{name}: kinds differ: {p:?} vs {q:?}"),
        }
    }
}

#[test]
fn awkward_values_survive_serialization() {
    let a = CMatrix::from_fn(2, 2, |i, j| c64(0.1 * (i + 1) as f64 / 3.0, if i == j { 0.0 } else { 1e-300 * j as f64 }));
    let b = CMatrix::from_fn(2, 2, |i, j| c64(-(PI.powi((i + j) as i32)) / 7.0, 0.0));
    let p = DdeProblem::new(a, b, 0.1 + 0.2, History::Zero, CMatrix::identity(2, 2).column(0).into_owned()).unwrap();
    let def = ProblemDef::dde("awkward", &p);
    let text = serde_json::to_string(&def).unwrap();
    let back = parse_problem(&text).unwrap();
    let Problem::Dde(q) = back.resolve().unwrap() else { panic!("not a delay problem") };
    assert_eq!(bits(&p.a), bits(&q.a));
    assert_eq!(bits(&p.b), bits(&q.b));
    assert_eq!(p.tau.to_bits(), q.tau.to_bits());
}

#[test]
fn missing_delay_is_reported_by_name() {
    let text = r#"{"name": "x", "kind": "dde", "A": [[-1.0]], "B": [[0.5]], "u0": [1.0]}"#;
    match parse_problem(text) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "tau"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn schema_errors_carry_the_json_path() {
    let text = r#"{"name": "x", "kind": "ode", "A": [[1.0, 2.0], [3.0, "four"]]}"#;
    match parse_problem(text) {
        Err(Error::Schema { path, .. }) => assert!(path.starts_with('A'), "path {path}"),
        other => panic!("expected a schema error, got {other:?}"),
    }
    let ragged = r#"{"name": "x", "kind": "ode", "A": [[1.0, 2.0], [3.0]]}"#;
    match parse_problem(ragged) {
        Err(Error::Schema { path, .. }) => assert_eq!(path, "A[1]"),
        other => panic!("expected a schema error, got {other:?}"),
    }
    let unknown = r#"{"name": "x", "kind": "ode", "A": [[1.0]], "extra": 1}"#;
    assert!(matches!(parse_problem(unknown), Err(Error::Schema { .. })));
}

#[test]
fn complex_entries_are_pairs() {
    let text = r#"{"name": "z", "kind": "ode", "A": [[[0.0, 1.0], 2.0], [0.0, [-1.0, -0.5]]]}"#;
    let Problem::Ode { m, .. } = parse_problem(text).unwrap().resolve().unwrap() else { panic!("not an ode") };
    assert_eq!(m[(0, 0)], c64(0.0, 1.0));
    assert_eq!(m[(0, 1)], c64(2.0, 0.0));
    assert_eq!(m[(1, 1)], c64(-1.0, -0.5));
}

#[test]
fn heat_equation_entries() {
    let n = 9;
    let (a, b) = problems::pdde_matrices(n).unwrap();
    let h = PI / 10.0;
    for j in 0..n {
        assert_relative_eq!(a[(j, j)].re, -2.0 / (h * h) + 0.5, max_relative = 1e-14);
        if j + 1 < n {
            assert_relative_eq!(a[(j, j + 1)].re, 1.0 / (h * h), max_relative = 1e-14);
            assert_relative_eq!(a[(j + 1, j)].re, 1.0 / (h * h), max_relative = 1e-14);
        }
        let x = (j + 1) as f64 * h;
        assert_relative_eq!(b[(j, j)].re, -4.1 + x * (1.0 - (x - PI).exp()), max_relative = 1e-14);
    }
    assert_eq!(a[(0, 2)], c64(0.0, 0.0));
    assert!(b.iter().all(|z| z.im == 0.0));
}

#[test]
fn constant_history_supplies_the_initial_value() {
    let Problem::Dde(p) = problems::preset("pdde:5").unwrap().resolve().unwrap() else { panic!("not a delay problem") };
    assert_eq!(p.tau, 0.2);
    assert!(p.u0.iter().all(|z| *z == c64(1.0, 0.0)));
    assert!(matches!(p.history, History::Constant { .. }));
}

#[test]
fn discretized_laser_has_euler_coefficients() {
    let Problem::Diffeq(h) = problems::preset("laser-disc:5").unwrap().resolve().unwrap() else {
        panic!("not a difference equation")
    };
    let (a, b) = problems::laser_matrices();
    assert_eq!(h.coeffs.len(), 6);
    assert_eq!(h.coeffs[0], CMatrix::identity(3, 3) + a * c64(0.2, 0.0));
    assert_eq!(h.coeffs[5], b * c64(0.2, 0.0));
    assert!(h.coeffs[1..5].iter().all(|c| c.iter().all(|z| *z == c64(0.0, 0.0))));
    assert!(h.endpoint_structure());
}

#[test]
fn unknown_presets_are_rejected() {
    assert!(matches!(problems::preset("nosuch"), Err(Error::UnknownPreset(_))));
    assert!(matches!(problems::preset("pdde:x"), Err(Error::UnknownPreset(_))));
    assert!(problems::preset("pdde:1").is_err());
}
