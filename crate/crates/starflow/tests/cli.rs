//! End-to-end checks of the `starflow` binary: subcommands, artifact
//! layout, and exit codes (zero only when no property fails).

use std::path::Path;
use std::process::Command;

fn starflow() -> Command {
    Command::new(env!("CARGO_BIN_EXE_starflow"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("sphere.json");
    std::fs::write(
        &path,
        r#"{
        "name": "cli-sphere",
        "flow": {
            "shape": {"kind": "sphere", "radius": 1.0},
            "n": 2, "N": 96,
            "cfl_geom": 0.2, "cfl_curv": 0.2,
            "t_max": 1.0, "monitor_every": 1500,
            "a1": 1.0, "a2": 0.0
        },
        "ladder": [0.5, 2.0, 8.0, 32.0],
        "z_images": 16,
        "arrival": {"sigma": 0.1, "eps_ladder": [0.2, 0.1], "M": 128},
        "seed": 11
    }"#,
    )
    .unwrap();
    path
}

#[test]
fn run_report_blowup_arrival_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let run_dir = tmp.path().join("out");

    let out = starflow()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_dir)
        .arg("--threads")
        .arg("2")
        .output()
        .unwrap();
    assert!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS"), "report lines printed");
    assert!(!stdout.contains("FAIL "), "no failures expected: {stdout}");
    for artifact in ["monitors.csv", "events.json", "report.json", "blowup.json", "arrival.json", "arrival_study.csv"] {
        assert!(run_dir.join(artifact).exists(), "missing {artifact}");
    }
    assert!(run_dir.join("checkpoints").join("ckpt_0000.csv").exists());

    let out = starflow().args(["report", "--run"]).arg(&run_dir).output().unwrap();
    assert!(out.status.success());

    let blowup_path = tmp.path().join("tangent.json");
    let out = starflow()
        .args(["blowup", "--run"])
        .arg(&run_dir)
        .arg("--out")
        .arg(&blowup_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&blowup_path).unwrap()).unwrap();
    assert_eq!(report["classification"], "SPHERE");

    let arrival_path = tmp.path().join("arrival.json");
    let out = starflow()
        .args(["arrival", "--R0", "1.0", "--n", "2", "--sigma", "0.1", "--eps", "0.05", "--M", "256", "--study", "--out"])
        .arg(&arrival_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(arrival_path.exists());
    let study = tmp.path().join("arrival_study.csv");
    let text = std::fs::read_to_string(&study).unwrap();
    assert!(text.starts_with("eps,supError,maxGrad,cLow,cHigh,translatorDefect,Fdefect"));
    assert_eq!(text.lines().count(), 5, "header plus the four-rung ladder");
}

#[test]
fn tampered_run_fails_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let run_dir = tmp.path().join("out");
    let out = starflow()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap();
    assert!(out.status.success());

    let monitors = run_dir.join("monitors.csv");
    let text = std::fs::read_to_string(&monitors).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[4] = "-2.0".into(); // minF
    lines[1] = cells.join(",");
    std::fs::write(&monitors, lines.join("\n") + "\n").unwrap();

    let out = starflow().args(["report", "--run"]).arg(&run_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "failures exit nonzero");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL mon.min_f_positive"), "{stdout}");
}

#[test]
fn bad_inputs_exit_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = starflow()
        .args(["run", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARSE_ERROR"));

    let out = starflow()
        .args(["report", "--run"])
        .arg(tmp.path().join("nonexistent"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("MISSING_ARTIFACT"));
}
