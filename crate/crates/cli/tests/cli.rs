use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use truthscan::corpus::{write_manifest, Arm, FileRecord, FindingTally};
use truthscan::rules::{CheckId, Severity};
use truthscan::syntax::LanguageId;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_truthscan"));
    c.stdout(Stdio::null()).stderr(Stdio::null());
    c
}

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["truthscan"];
    full.extend_from_slice(args);
    let code = truthscan_cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn binary_exit_codes() {
    let l1 = fixture("listing1.py");
    let l2 = fixture("listing2.py");
    assert_eq!(bin().arg("scan").arg(&l1).arg("-q").status().unwrap().code(), Some(2));
    assert_eq!(bin().arg("scan").arg(&l2).arg("-q").status().unwrap().code(), Some(0));
    assert_eq!(bin().args(["scan", "/no/such/path"]).status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("frobnicate").status().unwrap().code(), Some(1));
    assert_eq!(bin().arg("--version").status().unwrap().code(), Some(0));
}

#[test]
fn scan_writes_report_file_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let l1 = fixture("listing1.py");
    let (code, stdout, stderr) = run(&["scan", l1.to_str().unwrap(), "--format", "json", "-o", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stdout.is_empty());
    assert!(stderr.contains("requires human review"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["ai_failure_audit"]["success_integrity"], "FAIL");
    assert_eq!(doc["ai_failure_audit"]["lineage"], "UNKNOWN");
}

#[test]
fn endpoint_flags_are_mode_checked() {
    let l1 = fixture("listing1.py");
    let p = l1.to_str().unwrap();
    let (code, _, err) = run(&["scan", p, "--endpoint", "stub:pass"]);
    assert_eq!(code, 1);
    assert!(err.contains("--mode llm or --mode hybrid"));
    assert_eq!(run(&["scan", p, "--mode", "llm"]).0, 1);
    let (code, out, _) = run(&["scan", p, "--mode", "llm", "--endpoint", "stub:pass", "-q"]);
    assert_eq!(code, 0, "an all-PASS evaluator in llm mode reports no findings");
    assert!(out.contains("mode: llm"));
    let (code, _, _) = run(&["scan", p, "--mode", "hybrid", "--endpoint", "stub:pass", "-q"]);
    assert_eq!(code, 2);
}

#[test]
fn research_submission_is_validated_and_appended() {
    let dir = tempfile::tempdir().unwrap();
    let sink = dir.path().join("agg.jsonl");
    let l1 = fixture("listing1.py");
    let args = ["scan", l1.to_str().unwrap(), "-q", "--submit-research-aggregate", "--research-sink", sink.to_str().unwrap()];
    assert_eq!(run(&args).0, 2);
    let mut bad = args.to_vec();
    bad.extend(["--research-note", "def leak(): pass"]);
    let (code, _, err) = run(&bad);
    assert_eq!(code, 1);
    assert!(err.contains("privacy"));
    assert_eq!(fs::read_to_string(&sink).unwrap().lines().count(), 1);
}

fn manifest(dir: &Path, name: &str, records: &[FileRecord]) -> String {
    let p = dir.join(name);
    let mut buf = Vec::new();
    write_manifest(records, &mut buf).unwrap();
    fs::write(&p, buf).unwrap();
    p.to_str().unwrap().to_string()
}

fn arm(arm: Arm, files: usize, high: usize, repos: usize) -> Vec<FileRecord> {
    (0..files)
        .map(|i| FileRecord {
            file_id: format!("{}-{i}", arm.as_str()),
            repo_id: format!("repo{}", i % repos),
            language: LanguageId::Python,
            line_count: 150 + i,
            arm,
            findings: if i < high { vec![FindingTally { check: CheckId::C01, severity: Severity::High }] } else { vec![] },
        })
        .collect()
}

#[test]
fn corpus_commands_run_on_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let a = manifest(dir.path(), "a.jsonl", &arm(Arm::AiAttributed, 20, 10, 4));
    let b = manifest(dir.path(), "b.jsonl", &arm(Arm::HumanControl, 40, 5, 8));

    let (code, out, _) = run(&["corpus", "summarize", &a, &b]);
    assert_eq!(code, 0);
    assert!(out.contains("A_ai") && out.contains("0.500") && out.contains("0.125"));

    let (code, out, _) = run(&["corpus", "compare", &a, &b, "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["differential"]["ratio"]["value"], 4.0);

    let sel = dir.path().join("sel.jsonl");
    let (code, out, _) =
        run(&["corpus", "match", "--arm-a", &a, "--pool", &b, "--cap", "3", "--out", sel.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("selected "));
    assert!(fs::read_to_string(&sel).unwrap().lines().count() <= 20);

    let (code, out, _) = run(&["corpus", "bootstrap", &a, "--reference", &b, "--draw-size", "2", "--draws", "100"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("P = 1.000"), "{out}");

    let (code, _, err) = run(&["corpus", "bootstrap", &a, "--reference-mean", "0.1", "--draw-size", "9"]);
    assert_eq!(code, 1);
    assert!(err.contains("draw size"));
}

#[test]
fn ingest_then_compare_reports() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    fs::create_dir_all(src.join("r1")).unwrap();
    fs::copy(fixture("listing1.py"), src.join("r1/a.py")).unwrap();
    fs::copy(fixture("listing2.py"), src.join("r1/b.py")).unwrap();
    let (code, out, _) = run(&["corpus", "ingest", src.to_str().unwrap(), "--arm", "A_ai"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("\"repo_id\":\"r1\"") && lines[0].contains("\"C01\""));

    let r1 = dir.path().join("1.yaml");
    let r2 = dir.path().join("2.yaml");
    run(&["scan", fixture("listing1.py").to_str().unwrap(), "-q", "-o", r1.to_str().unwrap()]);
    run(&["scan", fixture("listing2.py").to_str().unwrap(), "-q", "-o", r2.to_str().unwrap()]);
    let (code, out, _) = run(&["compare", r1.to_str().unwrap(), r2.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("C01 success_integrity") && out.contains("FAIL -> PASS"), "{out}");
    assert!(out.contains("ratio left/right: inf"));

    let (code, out, _) = run(&["suppression", r1.to_str().unwrap(), r2.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().trim_end().ends_with("100%"), "{out}");
}
