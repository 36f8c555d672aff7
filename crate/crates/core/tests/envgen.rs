use std::io::Write;

use flhsions::envgen::{
    gen_piecewise_linear, ingest_csv, write_environment_csv, Normalization, PiecewiseLinearSpec,
};
use flhsions::oracle::{second_differences, tv_variation};
use flhsions::Error;

fn csv_file(body: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    f.write_all(body.as_bytes()).unwrap();
    f
}

fn names(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

#[test]
fn every_spec_hits_its_budget() {
    for seed in 0..40u64 {
        let n = [16, 64, 257, 1000][seed as usize % 4];
        let mut spec = PiecewiseLinearSpec::new(n, 1 + seed as usize % 6, 0.5 + seed as f64 / 8.0, seed);
        spec.d = 1 + seed as usize % 3;
        spec.noise = 0.1;
        let env = gen_piecewise_linear(&spec).unwrap();
        let tv = tv_variation(&env.comparator, 1).unwrap();
        assert!((tv - spec.budget).abs() <= 1e-9 * spec.budget.max(1.0), "seed {seed}: {tv}");
        assert!(env.comparator.iter().flatten().all(|v| v.abs() <= 1.0));
        assert!(env.targets.iter().flatten().all(|v| v.abs() <= 1.0));
        for (w, y) in env.comparator.iter().flatten().zip(env.targets.iter().flatten()) {
            assert!((w - y).abs() <= spec.noise + 1e-15);
        }
        assert_eq!(env.losses.len(), n);
        assert_eq!(env.losses[0].target(), env.targets[0].as_slice());
    }
}

#[test]
fn no_kinks_gives_a_line() {
    let env = gen_piecewise_linear(&PiecewiseLinearSpec::new(80, 0, 0.0, 1)).unwrap();
    assert!(tv_variation(&env.comparator, 1).unwrap() < 1e-12);
}

#[test]
fn one_kink_has_magnitude_budget_over_n() {
    let n = 400;
    let env = gen_piecewise_linear(&PiecewiseLinearSpec::new(n, 1, 3.0, 5)).unwrap();
    let col: Vec<f64> = env.comparator.iter().map(|r| r[0]).collect();
    let big: Vec<f64> = second_differences(&col).into_iter().filter(|v| v.abs() > 1e-12).collect();
    assert_eq!(big.len(), 1);
    assert!((big[0].abs() - 3.0 / n as f64).abs() < 1e-12);
}

#[test]
fn same_seed_same_environment() {
    let spec = PiecewiseLinearSpec::new(120, 3, 4.0, 77);
    let a = gen_piecewise_linear(&spec).unwrap();
    let b = gen_piecewise_linear(&spec).unwrap();
    assert_eq!(a.comparator, b.comparator);
    assert_eq!(a.targets, b.targets);
    let c = gen_piecewise_linear(&PiecewiseLinearSpec { seed: 78, ..spec }).unwrap();
    assert_ne!(a.comparator, c.comparator);
}

#[test]
fn infeasible_budgets_are_rejected() {
    let err = gen_piecewise_linear(&PiecewiseLinearSpec::new(50, 2, 500.0, 1)).unwrap_err();
    assert!(matches!(err, Error::Domain(_)), "{err}");
    assert!(gen_piecewise_linear(&PiecewiseLinearSpec::new(50, 0, 1.0, 1)).is_err());
    assert!(gen_piecewise_linear(&PiecewiseLinearSpec::new(50, 2, -1.0, 1)).is_err());
}

#[test]
fn environment_csv_columns() {
    let mut spec = PiecewiseLinearSpec::new(10, 1, 1.0, 2);
    spec.d = 2;
    let env = gen_piecewise_linear(&spec).unwrap();
    let mut buf = Vec::new();
    write_environment_csv(&env, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some("t,w1,w2,y1,y2"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn min_max_maps_extremes_to_unit_faces() {
    let f = csv_file("day,price\nmon,0\ntue,10\n");
    let s = ingest_csv(f.path(), &names(&["price"]), Some("day"), Normalization::MinMax).unwrap();
    assert_eq!(s.column(0), vec![-1.0, 1.0]);
    assert_eq!(s.timestamps, Some(vec!["mon".to_string(), "tue".to_string()]));
    assert_eq!(s.columns, names(&["price"]));
}

#[test]
fn nan_cell_names_row_and_column() {
    let f = csv_file("a,b\n1,2\n3,NaN\n");
    match ingest_csv(f.path(), &names(&["a", "b"]), None, Normalization::MinMax) {
        Err(Error::NonNumeric { row, column, value }) => {
            assert_eq!((row, column.as_str(), value.as_str()), (2, "b", "NaN"));
        }
        other => panic!("expected a non-numeric error, got {other:?}"),
    }
    let g = csv_file("a\n1\nabc\n");
    assert!(matches!(
        ingest_csv(g.path(), &names(&["a"]), None, Normalization::None),
        Err(Error::NonNumeric { row: 2, .. })
    ));
}

#[test]
fn normalization_round_trips() {
    let raw = [3.25, -7.5, 100.125, 42.0, 0.001];
    let body: String = std::iter::once("x".to_string())
        .chain(raw.iter().map(|v| v.to_string()))
        .collect::<Vec<_>>()
        .join("\n");
    let f = csv_file(&body);
    let s = ingest_csv(f.path(), &names(&["x"]), None, Normalization::MinMax).unwrap();
    assert!(s.column(0).iter().all(|v| v.abs() <= 1.0));
    for (a, b) in s.denormalize(0, &s.column(0)).iter().zip(raw) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
    let c = csv_file("k\n5\n5\n5\n");
    let s = ingest_csv(c.path(), &names(&["k"]), None, Normalization::MinMax).unwrap();
    assert_eq!(s.column(0), vec![0.0; 3]);
    assert_eq!(s.denormalize(0, &s.column(0)), vec![5.0; 3]);
}

#[test]
fn distinct_errors_for_missing_file_and_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert!(matches!(
        ingest_csv(&missing, &names(&["a"]), None, Normalization::MinMax),
        Err(Error::MissingFile { .. })
    ));
    let f = csv_file("a,b\n1,2\n");
    assert!(matches!(
        ingest_csv(f.path(), &[], None, Normalization::MinMax),
        Err(Error::EmptySelection(_))
    ));
    assert!(matches!(
        ingest_csv(f.path(), &names(&["zz"]), None, Normalization::MinMax),
        Err(Error::EmptySelection(_))
    ));
    let header_only = csv_file("a,b\n");
    assert!(matches!(
        ingest_csv(header_only.path(), &names(&["a"]), None, Normalization::MinMax),
        Err(Error::EmptySelection(_))
    ));
}
