use std::process::Command;

fn cwlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cwlab"))
}

#[test]
fn passing_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwlab()
        .args(["run", "stationary", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("summary.json").exists());
    assert!(dir.path().join("series/linf.csv").exists());
}

#[test]
fn failed_flag_exits_nonzero_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let out = cwlab()
        .args(["sweep", "delta0", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = stderr.lines().collect();
    assert_eq!(lines.len(), 1, "{stderr}");
    assert!(lines[0].contains("delta0.theta0_x_sq_exponent"), "{stderr}");
}

#[test]
fn bad_config_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "scenario = \"stationary\"\n[params]\ngamma = \"fast\"\n",
    )
    .unwrap();
    let out = cwlab()
        .args(["run", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn config_and_scenario_must_agree() {
    let config = concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/perturbed_wave.toml"
    );
    let out = cwlab()
        .args(["run", "stationary", "--config", config])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
