use std::path::Path;
use std::process::Command;

fn kvtherm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kvtherm"))
}

fn run_creep(out: &Path, workers: &str) -> std::process::Output {
    kvtherm()
        .args(["run", "creep", "--set", "time.steps=3", "--quiet", "--stride", "2", "--workers", workers, "--out"])
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn list_presets() {
    let out = kvtherm().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().collect::<Vec<_>>(), ["rigid-rotation", "creep", "sma-cycle"]);
}

#[test]
fn missing_config_exits_2() {
    let out = kvtherm().args(["run", "/no/such/config.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.toml"));
}

#[test]
fn invalid_config_exits_3_and_lists_problems() {
    let dir = tempfile::tempdir().unwrap();
    let out = kvtherm()
        .args(["run", "creep", "--set", "material.mu=-1", "--set", "time.tau=0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("material.mu") && err.contains("tau"), "{err}");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "which = \"creep\"\nbogus = 1\n").unwrap();
    let out = kvtherm().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn stride_must_be_positive() {
    let out = kvtherm().args(["run", "creep", "--stride", "0"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_writes_series_snapshots_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_creep(dir.path(), "1");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("step,time,"));
    let width = lines[0].split(',').count();
    for (k, l) in lines[1..].iter().enumerate() {
        let fields: Vec<&str> = l.split(',').collect();
        assert_eq!(fields.len(), width);
        assert_eq!(fields[0], (k + 1).to_string());
        for f in &fields[1..] {
            f.parse::<f64>().unwrap();
        }
    }

    for step in [0, 2, 3] {
        assert!(dir.path().join(format!("snapshot_{step:05}.vtk")).is_file(), "snapshot {step}");
    }
    assert!(!dir.path().join("snapshot_00001.vtk").exists());

    let cfg = kvtherm::io::load_experiment(dir.path().join("config.toml").to_str().unwrap(), &[]).unwrap();
    assert_eq!(cfg.time.steps, 3);
}

#[test]
fn progress_lines_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = kvtherm().args(["run", "creep", "--set", "time.steps=2", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("step ")).count(), 2);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from-env");
    let out = kvtherm().args(["run", "creep", "--set", "time.steps=1", "--quiet"]).env("KVTHERM_OUTPUT_DIR", &target).output().unwrap();
    assert!(out.status.success());
    assert!(target.join("series.csv").is_file());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_creep(a.path(), "3").status.success());
    assert!(run_creep(b.path(), "3").status.success());
    for name in ["series.csv", "snapshot_00003.vtk", "config.toml"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}
