use std::path::Path;
use std::process::{Command, Output};

fn adpqis(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adpqis"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn train_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = adpqis(dir.path(), &["train", "--iterations", "5", "--samples", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["report.csv", "coeffs.csv", "archive.csv", "timings.csv"] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("# adpqis "));
    assert!(report.lines().next().unwrap().contains("config-sha256="));
}

#[test]
fn missing_dataset_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = adpqis(dir.path(), &["train", "--dataset", "no-such-file.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-file.json"));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"run\": {\"samples\": }\n}").unwrap();
    let o = adpqis(dir.path(), &["oracle", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn invalid_parameter_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = adpqis(dir.path(), &["train", "--lambda", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = adpqis(dir.path(), &["train", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_on_missing_summary_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = adpqis(dir.path(), &["report", dir.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_train_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["train", "--iterations", "6", "--samples", "4", "--seed", "11"];
    assert!(adpqis(a.path(), &args).status.success());
    assert!(adpqis(b.path(), &args).status.success());
    for name in ["report.csv", "coeffs.csv", "archive.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}
