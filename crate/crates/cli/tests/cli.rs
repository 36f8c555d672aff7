use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn flhsions(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flhsions"))
        .args(args)
        .env("FLH_WORKERS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const GRID: &str = r#"
n = [32, 48, 64, 96]
seeds = 1

[environment]
budget = 2.0
kinks = 2

[[algorithms]]
name = "flh-sions"

[[algorithms]]
name = "ogd"
scales = [0.5]
exponents = [0.5]
"#;

fn write(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn run_writes_records() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "grid.toml", GRID);
    let out = dir.path().join("out");
    let o = flhsions(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1 + 8);
    assert!(rows[1].contains("n32-s0-flh-sions"));
    assert!(!out.join("fits.csv").exists());
}

#[test]
fn scaling_writes_fits_and_plot() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "grid.toml", GRID);
    let out = dir.path().join("out");
    let o = flhsions(&["scaling", "--config", path(&cfg), "--fit", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fits = fs::read_to_string(out.join("fits.csv")).unwrap();
    assert!(fits.contains("flh-sions") && fits.contains("ogd"));
    let svg = fs::read_to_string(out.join("regret_scaling.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("data-algorithm=\"ogd\""));
}

#[test]
fn config_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("missing.toml");
    assert_eq!(code(&flhsions(&["run", "--config", path(&missing), "--out", path(&out)])), 1);
    let bad = write(&dir, "bad.toml", &GRID.replace("flh-sions", "sgd"));
    assert_eq!(code(&flhsions(&["run", "--config", path(&bad), "--out", path(&out)])), 1);
    let few = write(&dir, "few.toml", &GRID.replace("[32, 48, 64, 96]", "[32, 64]"));
    assert_eq!(code(&flhsions(&["scaling", "--config", path(&few), "--fit", "--out", path(&out)])), 1);
    assert_eq!(code(&flhsions(&["run", "--config"])), 1);
    assert_eq!(code(&flhsions(&["frobnicate"])), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_flhsions"))
        .args(["run", "--config", path(&write(&dir, "g.toml", GRID)), "--out", path(&out)])
        .env("FLH_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn failed_cells_exit_two_and_keep_the_rest() {
    let dir = TempDir::new().unwrap();
    // A budget of 60 is reachable with two kinks at n = 96 but not at n = 32.
    let cfg = write(&dir, "grid.toml", &GRID.replace("budget = 2.0", "budget = 60.0"));
    let out = dir.path().join("out");
    let o = flhsions(&["run", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().any(|r| r.contains("environment")));
    assert!(rows.iter().any(|r| !r.contains("environment")));
}

#[test]
fn oracle_solves_a_csv() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("t,y1\n");
    for t in 1..=40 {
        let y = if t <= 20 { t as f64 / 20.0 } else { (40 - t) as f64 / 20.0 };
        text.push_str(&format!("{t},{}\n", y - 0.5));
    }
    let input = write(&dir, "y.csv", &text);
    let out = dir.path().join("sol").join("u.csv");
    let o = flhsions(&["oracle", "--input", path(&input), "--budget", "1.0", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sol = fs::read_to_string(&out).unwrap();
    assert_eq!(sol.lines().filter(|l| !l.starts_with('#')).count(), 41);

    assert_eq!(code(&flhsions(&["oracle", "--input", path(&input), "--budget", "-1", "--out", path(&out)])), 1);
    let nan = write(&dir, "nan.csv", "t,y1\n1,0.1\n2,abc\n3,0.2\n");
    assert_eq!(code(&flhsions(&["oracle", "--input", path(&nan), "--budget", "1", "--out", path(&out)])), 1);
    let gone = dir.path().join("gone.csv");
    assert_eq!(code(&flhsions(&["oracle", "--input", path(&gone), "--budget", "1", "--out", path(&out)])), 1);
}

#[test]
fn demo_draws_the_trend() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("date,close\n");
    for t in 0..60 {
        let v = 100.0 + if t < 30 { t as f64 } else { 60.0 - t as f64 } + ((t * 7) % 5) as f64;
        text.push_str(&format!("2024-01-{:02},{v}\n", t % 28 + 1));
    }
    let input = write(&dir, "prices.csv", &text);
    let out = dir.path().join("trend.svg");
    let o = flhsions(&["demo", "--input", path(&input), "--lambda", "0.5", "--out", path(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(&out).unwrap();
    assert!(svg.contains("class=\"trend\"") && svg.contains("class=\"series\""));
    assert_eq!(code(&flhsions(&["demo", "--input", path(&input), "--lambda", "-1", "--out", path(&out)])), 1);
    let o = flhsions(&["demo", "--input", path(&input), "--lambda", "1", "--column", "volume", "--out", path(&out)]);
    assert_eq!(code(&o), 1);
}
