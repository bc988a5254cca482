use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fracstep"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|h| h == name).unwrap()
}

#[test]
fn solve_reproduces_example2_table_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "example = \"ex2\"\nalpha = 0.6\nN = 2000\n", &["solve"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("out/summary.csv"));
    let err: f64 = rows[1][column(&rows, "err_max")].parse().unwrap();
    assert!(((err - 3.8628e-7) / 3.8628e-7).abs() < 0.01, "{err}");
    let report = read_csv(&tmp.path().join("out/report.csv"));
    assert_eq!(report.len(), 2002);
}

#[test]
fn coeffs_on_uniform_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "alpha = 0.5\nN = 4\nr = 1.0\nT = 4.0\n", &["coeffs", "--k", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("out/coeffs.csv"));
    assert_eq!(rows.len(), 5);
    assert_eq!(rows.iter().skip(1).filter(|r| r[0] == "history").count(), 3);
    assert_eq!(rows[4][0], "last");
    assert!(rows.iter().skip(1).all(|r| r[6] == "1"));
}

#[test]
fn reruns_are_byte_identical_without_timing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "example = \"ex1\"\nalpha = 0.5\nN = 60\nscheme = \"fast\"\n";
    assert!(run(tmp.path(), cfg, &["--no-timing", "solve"]).status.success());
    let first = fs::read(tmp.path().join("out/summary.csv")).unwrap();
    let first_report = fs::read(tmp.path().join("out/report.csv")).unwrap();
    assert!(run(tmp.path(), cfg, &["--no-timing", "solve"]).status.success());
    assert_eq!(first, fs::read(tmp.path().join("out/summary.csv")).unwrap());
    assert_eq!(first_report, fs::read(tmp.path().join("out/report.csv")).unwrap());
    assert!(!String::from_utf8(first).unwrap().contains("seconds"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "alpha = 0.5\nsteps = 10\n", &["solve"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn quadrature_budget_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "alpha = 0.5\nN = 50\nmode = \"gauss-kronrod\"\n[gk]\nrtol = 1e-14\nbudget = 0\n";
    let out = run(tmp.path(), cfg, &["solve"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn convergence_sweep_reports_rates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "example = \"ex2\"\nalpha = 0.6\nT = 10.0\nN = [250, 500, 1000]\n";
    let out = Command::new(env!("CARGO_BIN_EXE_fracstep"))
        .env("FRACSTEP_THREADS", "2")
        .args(["--out", tmp.path().join("out").to_str().unwrap(), "--config"])
        .arg({
            let p = tmp.path().join("c.toml");
            fs::write(&p, cfg).unwrap();
            p
        })
        .arg("convergence")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("out/convergence.csv"));
    let c = column(&rows, "rate_max");
    assert_eq!(rows[1][c], "");
    for row in &rows[2..] {
        let rate: f64 = row[c].parse().unwrap();
        assert!((rate - 2.4).abs() < 0.05, "{rate}");
    }
}

#[test]
fn compare_modes_differences_are_tiny() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("example = \"ex1\"\nalpha = 0.6\nN = 400\nr = {}\n", 2.4 / 0.95);
    let out = run(tmp.path(), &cfg, &["compare-modes"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("out/compare.csv"));
    for name in ["diff_std", "diff_fast"] {
        let c = column(&rows, name);
        let worst = rows[1..].iter().map(|r| r[c].parse::<f64>().unwrap()).fold(0.0, f64::max);
        assert!(worst <= 1e-13, "{name}: {worst}");
    }
    assert_eq!(read_csv(&tmp.path().join("out/modes.csv")).len(), 5);
}

#[test]
fn soe_check_and_derivative() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "alpha = 0.5\nN = 100\n[soe]\neps = 1e-12\n", &["soe-check", "--dt", "1e-4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&tmp.path().join("out/soe_summary.csv"));
    assert_eq!(rows[1][column(&rows, "pass")], "1");

    let out = run(tmp.path(), "alpha = 0.5\nN = 100\nr = 2.0\n", &["derivative", "--power", "2"]);
    assert!(out.status.success());
    let rows = read_csv(&tmp.path().join("out/derivative.csv"));
    let (v, e) = (column(&rows, "value"), column(&rows, "exact"));
    for row in &rows[2..] {
        let (v, e): (f64, f64) = (row[v].parse().unwrap(), row[e].parse().unwrap());
        assert!(((v - e) / e).abs() < 1e-11);
    }
}

#[test]
fn self_test_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), "", &["--seed", "11", "self-test"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = fs::read_to_string(tmp.path().join("out/selftest.csv")).unwrap();
    assert!(!text.contains(",fail,"));
}
