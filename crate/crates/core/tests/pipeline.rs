use std::fs;
use std::path::{Path, PathBuf};

use truthscan::llm::{run_augmented_scan, AugmentOptions, StubEvaluator, DEFAULT_CONTEXT_BUDGET};
use truthscan::report::{emit_report, OutputFormat, ScanMode, Verdict};
use truthscan::research::{build_aggregate, validate_privacy, write_jsonl};
use truthscan::rules::CheckId;
use truthscan::scan::{scan_path, scan_paths, ScanOptions};
use truthscan::syntax::walk::WalkOptions;

const SWALLOW: &str = "def f():\n    try:\n        g()\n    except Exception:\n        pass\n";

fn write(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    fs::create_dir_all(p.parent().unwrap()).unwrap();
    fs::write(p, text).unwrap();
}

fn sample_tree() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write(root, "app/main.py", SWALLOW);
    write(root, "app/util.js", "function f() { try { g(); } catch (e) { return { ok: true }; } }\n");
    write(root, "app/types.ts", "export const x: number = y ?? 0;\n");
    write(root, "node_modules/lib/index.js", "try { a() } catch (e) {}\n");
    write(root, "README.md", "# readme\n");
    write(root, "bin/blob.py", "x = 1\0\n");
    dir
}

#[test]
fn directory_scan_applies_ignores_and_counts_exclusions() {
    let dir = sample_tree();
    let out = scan_path(dir.path(), &ScanOptions::default()).unwrap();
    let ids: Vec<&str> = out.files.iter().map(|f| f.source.file_id.as_str()).collect();
    assert_eq!(ids, vec!["app/main.py", "app/types.ts", "app/util.js"]);
    assert_eq!(out.excluded_unsupported, 1);
    assert_eq!(out.skipped.len(), 1);
    assert_eq!(out.skipped[0].file, "bin/blob.py");

    let opts = ScanOptions {
        walk: WalkOptions { default_ignores: false, extra_ignores: vec!["*.ts".into()] },
        ..ScanOptions::default()
    };
    let out = scan_path(dir.path(), &opts).unwrap();
    let ids: Vec<&str> = out.files.iter().map(|f| f.source.file_id.as_str()).collect();
    assert_eq!(ids, vec!["app/main.py", "app/util.js", "node_modules/lib/index.js"]);
}

#[test]
fn size_filter_and_missing_target() {
    let dir = sample_tree();
    let opts = ScanOptions { size_filter: Some((100, 2000)), ..ScanOptions::default() };
    assert!(scan_path(dir.path(), &opts).unwrap().files.is_empty());
    assert!(scan_path(&dir.path().join("absent"), &ScanOptions::default()).is_err());
}

#[test]
fn report_is_identical_across_thread_counts() {
    let dir = sample_tree();
    let targets: Vec<PathBuf> = vec![dir.path().join("app"), dir.path().join("bin")];
    let render = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let out = pool.install(|| scan_paths(&targets, &ScanOptions::default())).unwrap();
        emit_report(&out.static_report(), OutputFormat::Schema12)
    };
    let one = render(1);
    assert_eq!(one, render(4));
    let app = dir.path().join("app").join("main.py");
    assert!(one.contains(&format!("file: \"{}\"", app.display())) || one.contains(&app.display().to_string()));
}

#[test]
fn hybrid_with_passing_evaluator_keeps_static_findings() {
    let dir = sample_tree();
    let out = scan_path(dir.path(), &ScanOptions::default()).unwrap();
    let opts = AugmentOptions { mode: ScanMode::Hybrid, budget: DEFAULT_CONTEXT_BUDGET, max_in_flight: 2 };
    let hybrid = run_augmented_scan(&out, &StubEvaluator::AllPass, &opts);
    let stat = out.static_report();
    assert_eq!(hybrid.findings, stat.findings);
    assert_eq!(hybrid.verdicts, stat.verdicts);
    assert_eq!(hybrid.scan_meta.mode, ScanMode::Hybrid);
}

#[test]
fn llm_mode_falls_back_per_file_on_evaluator_failure() {
    let dir = sample_tree();
    let out = scan_path(dir.path(), &ScanOptions::default()).unwrap();
    let opts = AugmentOptions { mode: ScanMode::Llm, budget: DEFAULT_CONTEXT_BUDGET, max_in_flight: 1 };
    let failed = run_augmented_scan(&out, &StubEvaluator::Fail("down".into()), &opts);
    assert_eq!(failed.findings, out.findings());
    assert_eq!(failed.scan_meta.evaluator.as_ref().unwrap().failures.len(), out.files.len());

    let passed = run_augmented_scan(&out, &StubEvaluator::AllPass, &opts);
    assert!(passed.findings.is_empty());
    assert_eq!(passed.verdicts.get(CheckId::C03), Verdict::Pass);
    assert_eq!(passed.verdicts.get(CheckId::C07), Verdict::Unknown);
}

#[test]
fn research_sink_gets_aggregates_only() {
    let dir = sample_tree();
    let report = scan_path(dir.path(), &ScanOptions::default()).unwrap().static_report();
    let mut sub = build_aggregate(&report);
    assert!(validate_privacy(&sub).is_ok());
    assert_eq!(sub.files_scanned, 3);
    let sink = dir.path().join("agg.jsonl");
    assert_eq!(write_jsonl(&[sub.clone(), sub.clone()], &sink).unwrap().appended, 2);
    let text = fs::read_to_string(&sink).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(!text.contains("main.py") && !text.contains("g()"));

    sub.note = Some("see app/main.py".into());
    let outcome = write_jsonl(&[sub], &sink).unwrap();
    assert_eq!((outcome.appended, outcome.rejected.len()), (0, 1));
    assert_eq!(fs::read_to_string(&sink).unwrap(), text);
}
