use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_impulse-sde"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_paper_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "simulate", "--model", "pendulum", "--eps", "0.0625", "--T", "8", "--dt-exp", "12",
            "--alpha", "1", "--x0", "0.5,0.5", "--seed", "7", "--out", "sim.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("sim.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,X1,X2,Z1,Z2,A1,A2,Y1,Y2,event");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 32769 + 8);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",pre")).count(), 8);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",post")).count(), 8);
    assert!(!csv.contains('\r'));

    // first coordinate continuous across each impulse, second jumps
    for (i, row) in rows.iter().enumerate().filter(|(_, r)| r.ends_with(",pre")) {
        let pre: Vec<&str> = row.split(',').collect();
        let post: Vec<&str> = rows[i + 1].split(',').collect();
        assert_eq!(pre[0], post[0]);
        assert_eq!(pre[1], post[1]);
        assert_ne!(pre[2], post[2]);
    }
    // pinned from the first run (seed 7)
    assert!(rows.last().unwrap().starts_with(
        "8.0000000000000000e0,6.9120630506696101e-1,-1.3768248223580531e-1,7.2250565911843667e-1,-2.7891773523377039e-1,"
    ));

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["base_seed"], 7);
    assert_eq!(manifest["parameters"]["dt_exp"], 12);
    assert_eq!(manifest["parameters"]["alpha_pend"], 1.0);
}

#[test]
fn degenerate_noise_needs_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--eps", "0", "--dt-exp", "6", "--out", "a.csv"]);
    assert!(!out.status.success());
    assert!(!dir.path().join("a.csv").exists());

    let out = run(
        dir.path(),
        &["simulate", "--eps", "0", "--allow-degenerate", "--dt-exp", "6", "--out", "a.csv"],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[1..3], f[3..5]);
        assert_eq!(f[9], "");
    }
}

#[test]
fn misaligned_offset_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--alpha", "0.3", "--dt-exp", "1"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert_eq!(msg.lines().count(), 1);
    assert!(msg.contains("alpha = 0.3") && msg.contains("2^-1"), "{msg}");
}

#[test]
fn bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--eps", "1.5"][..],
        &["simulate", "--model", "rocket"],
        &["simulate", "--x0", "1,2,3"],
        &["convergence", "--paths", "1"],
        &["convergence", "--eps-exps", "0..3"],
        &["kickmap", "--A", "1,2,3"],
        &["kickmap", "--A", "1", "--c", "1,1"],
    ] {
        let out = run(dir.path(), args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
}

#[test]
fn convergence_desk_preset_regression() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["convergence", "--preset", "desk", "--out", "desk.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("lln slopes:") && stdout.contains("clt slopes:"));

    let csv = fs::read_to_string(dir.path().join("desk.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 10 + 2);
    let header_cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == header_cols));
    // slopes pinned from the first desk run (seed 0)
    assert_eq!(
        lines[11],
        "slope_log2,,1.0453786809986214e0,1.0019641037747040e0,1.0411837641600565e0,\
         2.1266387975132188e0,2.0284023817389865e0,2.0897144774129384e0,,,,,,"
    );
    assert!(lines[12].starts_with("r2_log2,,"));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("desk.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["parameters"]["paths"], 200);
    assert_eq!(manifest["parameters"]["dt_exp"], 10);
    assert_eq!(manifest["parameters"]["preset"], "desk");
}

fn kick_errors(args: &[&str]) -> Vec<(usize, f64)> {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "delta,substeps,error");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn kickmap_translation_is_exact() {
    let rows = kick_errors(&["kickmap", "--A", "0", "--c", "1", "--r", "0", "--deltas", "0.1,0.05"]);
    assert_eq!(rows, vec![(10, 0.0), (20, 0.0)]);
}

#[test]
fn kickmap_first_order() {
    let rows = kick_errors(&["kickmap", "--A", "1", "--c", "1", "--r", "1"]);
    for w in rows.windows(2) {
        assert_eq!(w[1].0, 2 * w[0].0);
        let ratio = w[0].1 / w[1].1;
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }
}

#[test]
fn kickmap_diagonal_reduces_to_scalar() {
    let scalar = kick_errors(&["kickmap", "--A", "1", "--c", "1", "--r", "0"]);
    let diag = kick_errors(&["kickmap", "--A", "1,0,0,1", "--c", "1,1"]);
    for (s, d) in scalar.iter().zip(&diag) {
        assert_eq!(s.0, d.0);
        // Euclidean norm of two identical coordinate errors
        assert!((d.1 - s.1 * 2f64.sqrt()).abs() < 1e-12 * s.1);
    }
}

#[test]
fn kickmap_to_file_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["kickmap", "--A", "0.5", "--c", "-1", "--out", "k.csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(dir.path().join("k.csv").exists());
    assert!(dir.path().join("k.csv.manifest.json").exists());
}

#[test]
fn affine_kick_model_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "convergence", "--model", "affine_kick", "--A", "0,0,0,0", "--c", "0,0.1",
            "--paths", "4", "--dt-exp", "6", "--eps-exps", "2,4,6", "--out", "k.csv",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(dir.path(), &["simulate", "--model", "pendulum", "--A", "1,0,0,1"]);
    assert!(!out.status.success());
}
