use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BASE: &str = r#"
[market]
rate = 0.0
flat = 100.0

[factor.1]
v0 = 0.10
lambda = 1.0
kappa = 0.8
sigma = 1.2
rho = -0.25
pattern = "sinusoid"
a = 0.25
b = 0.15
t0 = "7/12"

[smile]
expiry = 0.5
strikes = [90, 100, 110]

[cso]
expiries = ["4/12"]
gap = 0.5
strikes = [-5, 5]

[mc]
paths = 4000
steps_per_year = 100
seed = 7
"#;

fn svol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svol"))
        .args(args)
        .output()
        .expect("spawn svol")
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn invalid_parameter_exits_1_and_names_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.cfg", &BASE.replace("kappa = 0.8", "kappa = -0.8"));
    let out = svol(&["--config", path_str(&cfg), "smile"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("factor.1.kappa"), "{}", stderr(&out));
}

#[test]
fn malformed_toml_and_unknown_keys_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "broken.cfg", "[market\nrate = 0");
    assert_eq!(svol(&["--config", path_str(&cfg), "smile"]).status.code(), Some(1));

    let cfg = write_config(
        &dir,
        "typo.cfg",
        &BASE.replace("sigma = 1.2", "sigma = 1.2\nsigmaa = 1.0"),
    );
    let out = svol(&["--config", path_str(&cfg), "smile"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("factor.1.sigmaa"), "{}", stderr(&out));
}

#[test]
fn missing_case_and_bad_usage_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.cfg", BASE);
    let out = svol(&["--config", path_str(&cfg), "smile", "--case", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cases.nope"));
    assert_eq!(
        svol(&["--config", path_str(&cfg), "price-vanilla"]).status.code(),
        Some(1)
    );
    assert_eq!(svol(&["--help"]).status.code(), Some(0));
}

#[test]
fn deep_in_the_money_call_reports_missing_implied_vol() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.cfg", BASE);
    let out = svol(&[
        "--config",
        path_str(&cfg),
        "price-vanilla",
        "--strike",
        "0.0001",
        "--expiry",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let price: f64 = text
        .lines()
        .next()
        .unwrap()
        .strip_prefix("price ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((price - 99.9999).abs() < 1e-4, "{price}");
    assert!(text.contains("implied_vol NA"), "{text}");
}

#[test]
fn smile_csv_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.cfg", BASE);
    let csv = dir.path().join("smile.csv");
    let out = svol(&["--config", path_str(&cfg), "--out", path_str(&csv), "smile"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows) = parse_csv(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header, ["strike", "price", "implied_vol"]);
    assert_eq!(rows.len(), 3);
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(parsed.iter().map(|r| r[0]).collect::<Vec<_>>(), [90.0, 100.0, 110.0]);
    assert!(parsed.windows(2).all(|w| w[1][1] < w[0][1]));
    assert!(parsed.iter().all(|r| r[2] > 0.1 && r[2] < 0.5));

    // The single-option command agrees with the smile row to its printed precision.
    let out = svol(&[
        "--config",
        path_str(&cfg),
        "price-vanilla",
        "--strike",
        "100",
        "--expiry",
        "0.5",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let price: f64 = text
        .lines()
        .next()
        .unwrap()
        .strip_prefix("price ")
        .unwrap()
        .parse()
        .unwrap();
    assert!((price - parsed[1][1]).abs() < 1e-6);
}

#[test]
fn mc_validate_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.cfg", BASE);
    let run = |threads: &str, seed: &str| {
        let out = svol(&[
            "--config",
            path_str(&cfg),
            "--threads",
            threads,
            "--seed",
            seed,
            "mc-validate",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run("1", "99");
    let b = run("3", "99");
    assert_eq!(a, b);
    assert_ne!(a, run("1", "100"));
    let (header, rows) = parse_csv(&a);
    assert_eq!(header.len(), 9);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let z: f64 = r[8].parse().unwrap();
        assert!(z.abs() < 5.0, "{r:?}");
    }
}

#[test]
fn cso_table_has_one_column_per_strike() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "ok.cfg", BASE);
    let out = svol(&["--config", path_str(&cfg), "cso-table"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, rows) = parse_csv(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(header, ["T", "T1", "T2", "model_K-5", "model_K5"]);
    let p: Vec<f64> = rows[0][3..].iter().map(|x| x.parse().unwrap()).collect();
    assert!(p[0] > p[1] && p[1] > 0.0);
}

#[test]
fn numerical_failure_exits_2() {
    // Vol of variance far beyond the moment-explosion boundary at a long expiry.
    let dir = TempDir::new().unwrap();
    let text = BASE
        .replace("sigma = 1.2", "sigma = 40.0")
        .replace("rho = -0.25", "rho = 0.95");
    let cfg = write_config(&dir, "explosive.cfg", &text);
    let out = svol(&[
        "--config",
        path_str(&cfg),
        "price-vanilla",
        "--strike",
        "100",
        "--expiry",
        "30",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("error:"));
}
