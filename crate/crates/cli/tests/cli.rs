//! End-to-end checks of the installed binary: run, score, report, and
//! translate against the bundled demo data with the canned backend.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dialectqa"))
}

fn repo_data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn write_config(dir: &Path) -> PathBuf {
    let data = repo_data();
    let config = format!(
        r#"
task = "privacy_classification"
output_dir = "runs"

[datasets]
privacyqa = "{data}/demo/privacyqa.tsv"
profiles = "{data}/profiles.jsonl"

[[dialects]]
id = "sae"
variants = "{data}/demo/variants/privacyqa.sae.jsonl"

[[dialects]]
id = "raave"
variants = "{data}/demo/variants/privacyqa.raave.jsonl"

[backend]
kind = "canned"
model = "canned-test"
"#,
        data = data.display()
    );
    let path = dir.join("config.toml");
    fs::write(&path, config).expect("write config");
    path
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn run_score_report_round_trip() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());

    let run = bin()
        .args(["run", "--config"])
        .arg(&config)
        .output()
        .expect("spawn run");
    assert!(run.status.success(), "run failed: {}", stderr_of(&run));
    let stdout = stdout_of(&run);
    assert!(stdout.contains("24 completed, 0 failed of 24 pairs"), "{stdout}");

    let runs_dir = dir.path().join("runs");
    let run_dir = fs::read_dir(&runs_dir)
        .expect("runs dir")
        .next()
        .expect("one run")
        .expect("entry")
        .path();
    assert!(run_dir.join("traces.jsonl").exists());
    assert!(run_dir.join("manifest.json").exists());

    let report_path = dir.path().join("report.csv");
    let score = bin()
        .arg("score")
        .arg("--traces")
        .arg(&run_dir)
        .arg("--gold")
        .arg(repo_data().join("demo/privacyqa.tsv"))
        .arg("--out")
        .arg(&report_path)
        .output()
        .expect("spawn score");
    assert!(score.status.success(), "score failed: {}", stderr_of(&score));
    let csv = fs::read_to_string(&report_path).expect("read report");
    assert!(csv.starts_with("section,label,field,value"), "{csv}");
    assert!(csv.contains("row,initial,dialect:sae,"), "{csv}");
    assert!(csv.contains("row,final,dialect:raave,"), "{csv}");

    let plain = bin()
        .arg("report")
        .arg("--in")
        .arg(&report_path)
        .args(["--format", "plain"])
        .output()
        .expect("spawn report");
    assert!(plain.status.success(), "report failed: {}", stderr_of(&plain));
    let text = stdout_of(&plain);
    assert!(text.contains("refinement ablation"), "{text}");
    assert!(text.contains("sae"), "{text}");
}

#[test]
fn translate_scores_sae_identity_at_100() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());

    let output = bin()
        .args(["translate", "--config"])
        .arg(&config)
        .output()
        .expect("spawn translate");
    assert!(output.status.success(), "translate failed: {}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("bleu= 100.00"), "{stdout}");
    assert!(dir.path().join("runs/translations.jsonl").exists());
}

#[test]
fn missing_config_is_a_clean_error() {
    let output = bin()
        .args(["run", "--config", "/nonexistent/config.toml"])
        .output()
        .expect("spawn run");
    assert!(!output.status.success());
    assert!(stderr_of(&output).contains("config.toml"));
}

#[test]
fn score_refuses_traces_with_unresolved_failures() {
    let dir = tempfile::tempdir().expect("tempdir");
    let traces = dir.path().join("traces.jsonl");
    fs::write(
        &traces,
        r#"{"status":"failed","example_id":"fit_01","dialect_id":"sae","error":"backend unreachable"}"#,
    )
    .expect("write traces");

    let output = bin()
        .arg("score")
        .arg("--traces")
        .arg(&traces)
        .arg("--gold")
        .arg(repo_data().join("demo/privacyqa.tsv"))
        .output()
        .expect("spawn score");
    assert!(!output.status.success());
    let err = stderr_of(&output);
    assert!(err.contains("fit_01"), "{err}");
}

#[test]
fn resume_reports_unknown_run_id() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = write_config(dir.path());

    let output = bin()
        .args(["run", "--config"])
        .arg(&config)
        .args(["--resume", "run-never-existed"])
        .output()
        .expect("spawn run");
    assert!(!output.status.success());
    assert!(stderr_of(&output).contains("run-never-existed"));
}
