//! End-to-end run of the built binary: code1 → code2 → evaluate → score,
//! plus the input-error exit code.

use std::fs;
use std::path::Path;
use std::process::Command;

fn gridopf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gridopf"))
}

fn write_instance(dir: &Path) -> std::path::PathBuf {
    let net = gridopf::samples::three_gen_ring();
    let path = dir.join("ring.json");
    fs::write(&path, gridopf::io::write_instance(&net, 100.0)).unwrap();
    path
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let instance = write_instance(dir.path());
    let sol1 = dir.path().join("solution1.txt");
    let sol2 = dir.path().join("solution2.txt");
    let results = dir.path().join("results");
    fs::create_dir(&results).unwrap();

    let status = gridopf()
        .args(["code1", "--network"])
        .arg(&instance)
        .args(["--mode", "rt", "--time-limit", "20", "--out"])
        .arg(&sol1)
        .arg("--report")
        .arg(dir.path().join("m1.json"))
        .status()
        .unwrap();
    assert!(status.success(), "code1 exit {status:?}");
    assert!(sol1.exists());

    let status = gridopf()
        .args(["code2", "--network"])
        .arg(&instance)
        .arg("--solution1")
        .arg(&sol1)
        .args(["--workers", "2", "--out"])
        .arg(&sol2)
        .status()
        .unwrap();
    assert!(status.success(), "code2 exit {status:?}");

    let output = gridopf()
        .args(["evaluate", "--network"])
        .arg(&instance)
        .arg("--solution1")
        .arg(&sol1)
        .arg("--solution2")
        .arg(&sol2)
        .args(["--team", "demo", "--scenario", "s1"])
        .arg("--report")
        .arg(results.join("demo__ring__s1.json"))
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("feasible: true"), "{stdout}");

    let csv = dir.path().join("board.csv");
    let status = gridopf()
        .args(["score", "--dir"])
        .arg(&results)
        .arg("--csv")
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let board = fs::read_to_string(&csv).unwrap();
    assert!(board.starts_with("team,overall_score"), "{board}");
    assert!(board.contains("demo,"), "{board}");

    // Manifest recorded a clean (non-fallback) solve.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m1.json")).unwrap()).unwrap();
    assert_eq!(manifest["fallback"], serde_json::Value::Bool(false));
}

#[test]
fn corrupt_instance_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("bad.json");
    fs::write(&instance, "not json at all").unwrap();
    let out = dir.path().join("solution1.txt");
    let output = gridopf()
        .args(["code1", "--network"])
        .arg(&instance)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!out.exists());
    assert!(!output.stderr.is_empty());
}
