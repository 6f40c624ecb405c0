use std::path::Path;
use std::process::{Command, Output};

fn thermovisco(runs: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermovisco"))
        .args(args)
        .env("THERMOVISCO_RUNS_DIR", runs)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&thermovisco(dir.path(), &["--help"])), 0);
    assert_eq!(code(&thermovisco(dir.path(), &["run-preset", "--help"])), 0);
}

#[test]
fn usage_errors_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&thermovisco(dir.path(), &["no-such-command"])), 4);
    assert_eq!(code(&thermovisco(dir.path(), &["run-preset", "no_such_preset"])), 4);
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "grid.length = 1\ngrid.n_cells = 32\ngamma.family = saturating_exp\ngamma.B = 2\ngamma.A = 1\ngamma.alpha = 1\na = 1\nD = 1\ntime.t_end = 1\n").unwrap();
    let o = thermovisco(dir.path(), &["check-gamma", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma.B") && err.contains("line 4"), "{err}");

    std::fs::write(&cfg, "grid.length = 1\ngrid.n_cells = lots\n").unwrap();
    let o = thermovisco(dir.path(), &["simulate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 4);

    let o = thermovisco(dir.path(), &["simulate", "--set", "time.t_end"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn check_gamma_prints_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermovisco(dir.path(), &["check-gamma", "--set", "preset=theorem9_global"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object());
}

#[test]
fn reduced_global_preset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermovisco(
        dir.path(),
        &[
            "run-preset",
            "theorem9_global",
            "--set",
            "time.t_end=0.5",
            "--set",
            "grid.n_cells=64",
        ],
    );
    let text = stdout(&o);
    assert_eq!(code(&o), 0, "{text}{}", String::from_utf8_lossy(&o.stderr));
    assert!(text.lines().any(|l| l.starts_with("PASS")), "{text:?}");
    assert!(!text.lines().any(|l| l.starts_with("FAIL")));
    let run_dirs: Vec<_> = std::fs::read_dir(dir.path().join("theorem9_global")).unwrap().collect();
    assert_eq!(run_dirs.len(), 1);
    let run = run_dirs[0].as_ref().unwrap().path();
    for f in ["series.csv", "reports.json", "config.snapshot"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }

    let fit = thermovisco(
        dir.path(),
        &[
            "fit-decay",
            run.join("series.csv").to_str().unwrap(),
            "--column",
            "theta_linf",
        ],
    );
    assert!(matches!(code(&fit), 0 | 3), "{}", String::from_utf8_lossy(&fit.stderr));
}

#[test]
fn blowup_demo_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = thermovisco(dir.path(), &["run-preset", "blowup_demo"]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_writes_to_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = thermovisco(
        dir.path(),
        &[
            "simulate",
            "--set",
            "preset=theorem9_global",
            "--set",
            "grid.n_cells=32",
            "--set",
            "time.t_end=0.1",
            "-o",
            out.to_str().unwrap(),
            "--plot-data",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["series.csv", "config.snapshot", "series.dat", "profiles.dat"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}
