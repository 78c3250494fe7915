use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simulate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("spawn simulate")
}

fn short_run(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "--scenario",
        "manufactured",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "t_final=0.03",
    ];
    args.extend_from_slice(extra);
    simulate(&args)
}

#[test]
fn manufactured_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,time,cells,dofs,mass,cmin,cmax,xtip,tip_velocity,mixing_length,gmres_flow,gmres_transport"));
    assert_eq!(lines.count(), 3);
    assert!(dir.path().join("step_000000.vtk").exists());
    assert!(dir.path().join("step_000003.vtk").exists());
    assert!(dir.path().join("config.txt").exists());
}

#[test]
fn flags_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(
        dir.path(),
        &["--seed", "42", "--no-amr", "--no-stab", "--threads", "2"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cfg = fs::read_to_string(dir.path().join("config.txt")).unwrap();
    let pairs: Vec<(&str, &str)> = cfg
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    for pair in [
        ("seed", "42"),
        ("amr", "false"),
        ("lambda_lin", "0"),
        ("lambda_ent", "0"),
    ] {
        assert!(pairs.contains(&pair), "missing {pair:?}");
    }
}

#[test]
fn config_file_and_scenario_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# short run\nscenario=manufactured\nt_final=0.02\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = simulate(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("diagnostics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn single_threaded_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = simulate(&[
            "--scenario",
            "perm_block",
            "--out",
            d.path().to_str().unwrap(),
            "--set",
            "t_final=0.05",
        ]);
        assert!(out.status.success());
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("diagnostics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    for args in [
        vec!["--scenario", "nope", "--out", o],
        vec!["--out", o],
        vec!["--scenario", "manufactured", "--out", o, "--set", "dt=-1"],
        vec![
            "--scenario",
            "manufactured",
            "--out",
            o,
            "--set",
            "no_such_key=1",
        ],
        vec![
            "--scenario",
            "manufactured",
            "--out",
            o,
            "--config",
            "/nonexistent/run.cfg",
        ],
        vec!["--scenario", "manufactured", "--out", o, "--threads", "0"],
    ] {
        let out = simulate(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = short_run(
        dir.path(),
        &["--set", "gmres_max_iter=1", "--set", "gmres_tol=1e-30"],
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("diagnostics.csv").exists());
}
