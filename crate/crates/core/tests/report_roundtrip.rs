use std::collections::BTreeMap;

use proptest::prelude::*;
use truthscan::report::{
    emit_report, parse_report, AuditReport, EvaluatorMeta, OutputFormat, ScanMeta, ScanMode, ScanScope, SkippedFile,
    Verdict, VerdictMap,
};
use truthscan::rules::{CheckId, Finding, FindingSource, Profile};

const KEYS: [&str; 15] = [
    "success_integrity",
    "audit_integrity",
    "exception_handling",
    "fallback_control",
    "bypass_controls",
    "return_contracts",
    "logic_consistency",
    "background_tasks",
    "environment_safety",
    "startup_integrity",
    "determinism",
    "lineage",
    "confidence_opacity",
    "test_coverage_symmetry",
    "idempotency_safety",
];

fn any_check() -> impl Strategy<Value = CheckId> {
    prop::sample::select(CheckId::automated().collect::<Vec<_>>())
}

fn any_finding() -> impl Strategy<Value = Finding> {
    (
        any_check(),
        any::<prop::sample::Index>(),
        "[a-zA-Z0-9_./ -]{1,24}",
        1usize..5000,
        "\\PC{0,40}|.*[\"'#:\\n\\t\\\\].*",
        "[a-z_]{0,24}",
        any::<bool>(),
    )
        .prop_map(|(check, sev, file, line, issue, trigger, llm)| {
            let allowed = check.allowed_severities();
            Finding {
                check,
                severity: allowed[sev.index(allowed.len())],
                file,
                line,
                issue,
                trigger,
                source: if llm { FindingSource::Llm } else { FindingSource::Static },
            }
        })
}

fn any_verdicts() -> impl Strategy<Value = VerdictMap> {
    prop::collection::vec(prop::sample::select(vec![Verdict::Pass, Verdict::Fail, Verdict::Unknown]), 15).prop_map(
        |vs| {
            let mut map = VerdictMap::filled(Verdict::Unknown);
            for (c, v) in CheckId::ALL.into_iter().zip(vs) {
                if c.is_automated() {
                    map.set(c, v);
                }
            }
            map
        },
    )
}

fn any_meta() -> impl Strategy<Value = ScanMeta> {
    (
        prop::sample::select(vec![ScanScope::File, ScanScope::Directory, ScanScope::Corpus]),
        prop::sample::select(vec![ScanMode::Static, ScanMode::Llm, ScanMode::Hybrid]),
        0usize..500,
        prop::collection::btree_map("python|javascript|typescript", 0usize..100, 0..3),
        prop::collection::vec(("[a-z/._]{1,16}", "\\PC{0,20}"), 0..3),
        prop::option::of(("[a-z:/.0-9]{1,20}", 0usize..50, prop::collection::vec("[a-z/.]{1,12}", 0..3))),
        prop::collection::vec(any_check(), 0..3),
    )
        .prop_map(|(scope, mode, files, languages, skipped, evaluator, prof)| ScanMeta {
            scope,
            mode,
            files_scanned: files,
            languages,
            parse_modes: BTreeMap::from([("full_parse".to_string(), files)]),
            excluded_unsupported: files / 3,
            skipped: skipped.into_iter().map(|(file, reason)| SkippedFile { file, reason }).collect(),
            profiles: prof
                .into_iter()
                .map(|c| Profile { file: "p.py".into(), tag: "failure concealment".into(), checks: [CheckId::C03, c] })
                .collect(),
            evaluator: evaluator.map(|(endpoint, requested, truncated)| EvaluatorMeta {
                contract: "llm-audit/1.2.0".into(),
                endpoint,
                requested,
                failures: vec![],
                truncated,
            }),
        })
}

fn any_report() -> impl Strategy<Value = AuditReport> {
    (any_verdicts(), prop::collection::vec(any_finding(), 0..8), any_meta())
        .prop_map(|(v, f, m)| AuditReport::new(v, f, m))
}

/// Keys at two-space indent directly under the audit block, read line by line.
fn yaml_verdict_keys(doc: &str) -> Vec<String> {
    doc.lines()
        .skip_while(|l| !l.starts_with("ai_failure_audit:"))
        .skip(1)
        .take_while(|l| l.starts_with("  "))
        .filter(|l| !l.starts_with("   ") && !l.trim_start().starts_with('-'))
        .filter_map(|l| l.trim().split(':').next().map(str::to_string))
        .filter(|k| KEYS.contains(&k.as_str()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn yaml_and_json_round_trip(report in any_report()) {
        for format in [OutputFormat::Schema12, OutputFormat::Json] {
            let doc = emit_report(&report, format);
            let back = parse_report(&doc).map_err(|e| TestCaseError::fail(format!("{e}\n{doc}")))?;
            prop_assert_eq!(&back, &report);
            prop_assert_eq!(emit_report(&back, format), doc);
        }
    }

    #[test]
    fn verdict_keys_in_schema_order(report in any_report()) {
        let doc = emit_report(&report, OutputFormat::Schema12);
        prop_assert_eq!(yaml_verdict_keys(&doc), KEYS.to_vec());
        prop_assert!(doc.lines().nth(1).is_some_and(|l| l.trim() == "audit_version:            \"1.2\""));
    }
}
