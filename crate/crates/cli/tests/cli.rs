use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn r2ch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_r2ch"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn presets_are_listed() {
    let o = r2ch(&["presets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["smooth-I", "smooth-I-table5", "single-peakon-I", "zero"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn run_writes_snapshots_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = r2ch(&["run", "--preset", "zero", "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("conserved.csv").exists());
    assert!(out.join("snapshot_00000000.csv").exists());
    assert!(out.join("snapshot_00000010.csv").exists());
    assert!(stdout(&o).contains("10 steps"));

    let o = r2ch(&["run", "--preset", "zero", "--format", "json", "--output-dir", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(out.join("conserved.json").exists());
}

#[test]
fn convergence_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "scenario = \"smooth-I\"\nM = 40\nt_end = 2.0\n[solver]\ntau = 0.1\n[outputs]\noutput_dir = {:?}\n",
            dir.path().join("conv")
        ),
    );
    let o = r2ch(&["convergence", &cfg, "--axis", "time", "--levels", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].trim_start().starts_with('N'));
    assert!(rows[1].trim_start().starts_with("20"));
    assert!(dir.path().join("conv/convergence_time.csv").exists());
}

#[test]
fn conservation_reports_drift() {
    let dir = tempfile::tempdir().unwrap();
    let o = r2ch(&[
        "conservation",
        "--preset",
        "smooth-I",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("max drift"));
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(r2ch(&["run", "--preset", "no-such-thing"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario = \"zero\"\nbogus = 1\n");
    let o = r2ch(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    let cfg = write_config(dir.path(), "scenario = \"zero\"\n[outputs]\nsnapshot_times = [5.0]\n");
    assert_eq!(r2ch(&["run", &cfg]).status.code(), Some(2));
    assert_eq!(r2ch(&["run", "--preset", "zero", "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(
        r2ch(&["convergence", "--preset", "zero", "--axis", "time", "--levels", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "scenario = \"smooth-I\"\n[solver]\nmax_iter = 1\n[outputs]\noutput_dir = {:?}\n",
            dir.path().join("out")
        ),
    );
    let o = r2ch(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // The partial series is still written.
    assert!(dir.path().join("out/conserved.csv").exists());
}

#[test]
fn unwritable_output_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let target = blocker.join("out");
    let o = r2ch(&["run", "--preset", "zero", "--output-dir", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}
