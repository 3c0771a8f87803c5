use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIXTURE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../core/fixtures/synthetic_profile.csv"
);

fn fracduct(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracduct"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

// Gauss-Seidel on the 5-point system for -lap u = 1, zero boundary.
fn poisson_reference(n: usize) -> Vec<Vec<f64>> {
    let h2 = (1.0 / n as f64).powi(2);
    let mut u = vec![vec![0.0; n + 1]; n + 1];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for i in 1..n {
            for j in 1..n {
                let next = 0.25 * (u[i - 1][j] + u[i + 1][j] + u[i][j - 1] + u[i][j + 1] + h2);
                change = change.max((next - u[i][j]).abs());
                u[i][j] = next;
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    u
}

#[test]
fn solve_writes_outputs_and_records_clamp() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(
        tmp.path(),
        &["solve", "--grid.n1", "12", "--grid.n2", "12", "--out", "run"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("w_max"));

    let root = tmp.path().join("run");
    for name in ["field.csv", "profile.csv", "summary.csv", "manifest.json"] {
        assert!(root.join(name).is_file(), "missing {name}");
    }
    assert_eq!(read_rows(&root.join("field.csv")).len(), 11 * 11);
    assert_eq!(read_rows(&root.join("profile.csv")).len(), 13);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config"]["grid"]["n1"], 12);
    let clamps = manifest["theta_delta_clamps"].as_array().unwrap();
    assert_eq!(clamps.len(), 1);
    let applied = clamps[0]["applied"].as_f64().unwrap();
    let lambda_min = clamps[0]["min_eigenvalue"].as_f64().unwrap();
    assert!(applied < lambda_min);
}

#[test]
fn two_term_without_fractional_term_is_poisson() {
    let tmp = tempfile::tempdir().unwrap();
    for method in ["pcg", "spectral"] {
        let out = fracduct(
            tmp.path(),
            &[
                "solve", "--grid.n1", "10", "--grid.n2", "10", "--model.mu", "0",
                "--model.variant", "two-term", "--model.method", method, "--out", method,
            ],
        );
        assert!(out.status.success(), "{}", stderr(&out));

        let reference = poisson_reference(10);
        for row in read_rows(&tmp.path().join(method).join("field.csv")) {
            let x1: f64 = row[0].parse().unwrap();
            let x2: f64 = row[1].parse().unwrap();
            let v: f64 = row[2].parse().unwrap();
            let (i, j) = ((x1 * 10.0).round() as usize, (x2 * 10.0).round() as usize);
            assert!(
                (v - reference[i][j]).abs() <= 1e-9 * reference[i][j],
                "{method} at ({x1}, {x2}): {v} vs {}",
                reference[i][j]
            );
        }
    }
}

#[test]
fn malformed_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"cg": {"max_iter": "many"}}"#).unwrap();
    let out = fracduct(tmp.path(), &["--config", "bad.json", "solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("cg.max_iter"), "{}", stderr(&out));

    fs::write(tmp.path().join("range.json"), r#"{"model": {"alpha": 1.5}}"#).unwrap();
    let out = fracduct(tmp.path(), &["--config", "range.json", "solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("alpha"), "{}", stderr(&out));
}

#[test]
fn bad_profiles_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(tmp.path(), &["calibrate", "--profile", "absent.csv"]);
    assert_eq!(out.status.code(), Some(1));

    fs::write(
        tmp.path().join("broken.csv"),
        "x1,x2,u_mean\n0.5,0.5,0.1\n0.5,oops,0.2\n",
    )
    .unwrap();
    let out = fracduct(tmp.path(), &["calibrate", "--profile", "broken.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn calibrate_recovers_planted_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(
        tmp.path(),
        &[
            "--grid.n1", "20", "--grid.n2", "20", "calibrate", "--profile", FIXTURE,
            "--mu", "25,50,75", "--alpha", "0.25,0.3333333333333333,0.5",
            "--normalization", "none", "--out", "cal",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let root = tmp.path().join("cal");
    let surface = read_rows(&root.join("surface.csv"));
    assert_eq!(surface.len(), 9);
    let best = surface
        .iter()
        .min_by(|a, b| {
            let sa: f64 = a[2].parse().unwrap();
            let sb: f64 = b[2].parse().unwrap();
            sa.total_cmp(&sb)
        })
        .unwrap();
    assert_eq!(best[0].parse::<f64>().unwrap(), 50.0);
    assert!((best[1].parse::<f64>().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!(fs::read_to_string(root.join("best_fit.txt")).unwrap().contains("mu"));
    assert_eq!(read_rows(&root.join("comparison_x1-0.5.csv")).len(), 5);
}

#[test]
fn cgstudy_without_fractional_term_takes_one_iteration() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(
        tmp.path(),
        &["--grid.n1", "12", "--grid.n2", "12", "cgstudy", "--mu", "0,10", "--out", "cg"],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let rows = read_rows(&tmp.path().join("cg").join("cgstudy.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][2], "1");
    let iterations: usize = rows[1][2].parse().unwrap();
    let bound: usize = rows[1][6].parse().unwrap();
    assert!(iterations > 1 && iterations <= bound);
}

#[test]
fn fracstudy_tabulates_every_case() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(
        tmp.path(),
        &[
            "--grid.n1", "8", "--grid.n2", "8", "fracstudy", "--n0", "5,10",
            "--d", "1,2", "--out", "frac",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let root = tmp.path().join("frac");
    let rows = read_rows(&root.join("wmax.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
    for row in &rows {
        let requested: f64 = row[2].parse().unwrap();
        let applied: f64 = row[3].parse().unwrap();
        assert!(applied <= requested);
        assert!(row[5].parse::<f64>().unwrap() > 0.0);
    }
    let traces = fs::read_dir(&root)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("_trace.csv"))
        .count();
    assert_eq!(traces, 8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| -> PathBuf {
        let out = fracduct(
            tmp.path(),
            &["--grid.n1", "10", "--grid.n2", "10", "--threads", "2", "cgstudy", "--out", name],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        tmp.path().join(name)
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn help_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracduct(tmp.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["solve", "fracstudy", "cgstudy", "calibrate"] {
        assert!(text.contains(sub));
    }
}
