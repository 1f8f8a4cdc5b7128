//! Aggregate-only research submissions and the local JSONL sink.
//!
//! A submission carries counts and verdicts only. Before anything is
//! appended, every string in the serialized record (values and keys) is run
//! through [`validate_privacy`], which rejects:
//!
//! * path-like text: a `/` or `\` between two name characters, an absolute
//!   or home-relative path, a drive prefix, a URL scheme, or a file name with
//!   a known source/config extension;
//! * source-like text: one line with a strong code signal (a function or
//!   class header, an arrow, a statement-ending `;` or brace, a handler
//!   clause), or two or more lines that each look like code.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::{LazyLock, Mutex};

use rand::RngCore;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::report::{AuditReport, ScanMode, VerdictMap};
use crate::rules::{CheckId, Severity};
use crate::syntax::detect_language;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateSubmission {
    pub audit_version: String,
    /// Random 128-bit identifier, lower-case hex.
    pub scan_id: String,
    /// RFC 3339, UTC.
    pub scan_timestamp: String,
    pub tool_version: String,
    pub mode: ScanMode,
    pub files_scanned: usize,
    pub findings_total: usize,
    pub by_severity: BTreeMap<String, usize>,
    pub by_check: BTreeMap<String, usize>,
    pub files_by_language: BTreeMap<String, usize>,
    pub findings_by_language: BTreeMap<String, usize>,
    pub verdicts: VerdictMap,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn build_aggregate(report: &AuditReport) -> AggregateSubmission {
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    build_aggregate_with(report, &mut rand::thread_rng(), now)
}

/// As [`build_aggregate`] with an explicit id source and timestamp.
pub fn build_aggregate_with(report: &AuditReport, rng: &mut dyn RngCore, timestamp: String) -> AggregateSubmission {
    let mut id = [0u8; 16];
    rng.fill_bytes(&mut id);
    let by_severity = Severity::ALL
        .iter()
        .map(|s| (s.as_str().to_string(), report.findings.iter().filter(|f| f.severity == *s).count()))
        .collect();
    let by_check = CheckId::automated()
        .map(|c| (c.code().to_string(), report.findings.iter().filter(|f| f.check == c).count()))
        .collect();
    let mut findings_by_language: BTreeMap<String, usize> = BTreeMap::new();
    for f in &report.findings {
        *findings_by_language.entry(detect_language(&f.file).as_str().to_string()).or_default() += 1;
    }
    AggregateSubmission {
        audit_version: report.audit_version.clone(),
        scan_id: id.iter().map(|b| format!("{b:02x}")).collect(),
        scan_timestamp: timestamp,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mode: report.scan_meta.mode,
        files_scanned: report.scan_meta.files_scanned,
        findings_total: report.findings.len(),
        by_severity,
        by_check,
        files_by_language: report.scan_meta.languages.clone(),
        findings_by_language,
        verdicts: report.verdicts,
        description: None,
        note: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    PathLike,
    SourceLike,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrivacyViolation {
    /// Dotted location of the offending string; keys are suffixed with `{key}`.
    pub field: String,
    pub kind: ViolationKind,
}

static PATH_PATTERNS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"[\w.~-][/\\][\w.-]",
        r"(^|\s)(/|~/|\./|\.\./)[\w.-]",
        r"(?i)\b[a-z]:\\",
        r"(?i)\b[a-z][a-z0-9+.-]*://",
        r"(?i)[\w-]\.(py|pyi|js|jsx|mjs|cjs|ts|tsx|json|ya?ml|toml|ini|cfg|env|lock|java|kt|go|rs|rb|php|c|h|cc|cpp|hpp|cs|swift|sh|bash|sql|html|css|md|txt|ipynb)\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("valid pattern"))
    .collect()
});

static STRONG_CODE: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"\bdef\s+\w+\s*\(",
        r"\bclass\s+\w+\s*[:({]",
        r"\bfunction\b\s*\w*\s*\(",
        r"=>",
        r"\b(except|catch)\b[^\n]*[:{(]",
        r"\b(import|from)\s+[\w.]+\s+(import|as)\b",
        r"[;{}]\s*$",
        r"\w\([^()\n]*\)\s*[:;{]",
        r"#include\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("valid pattern"))
    .collect()
});

static WEAK_CODE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        ^\s*(return|raise|throw|try|else|elif|finally|const|let|var|async|await|yield|pass|import|export)\b
        | ^\s*(if|for|while|with)\b.*[:{]\s*$
        | ^\s*[\w.\[\]]+\s*(=|\+=|-=|==|!=)\s*\S
        | \w\(.*\)
        | [:{(\[]\s*$
        | ^\s*[)}\]]",
    )
    .expect("valid pattern")
});

fn path_like(s: &str) -> bool {
    PATH_PATTERNS.iter().any(|r| r.is_match(s))
}

fn source_like(s: &str) -> bool {
    let lines: Vec<&str> = s.lines().collect();
    if lines.iter().any(|l| STRONG_CODE.iter().any(|r| r.is_match(l))) {
        return true;
    }
    lines.len() >= 2 && lines.iter().filter(|l| WEAK_CODE_LINE.is_match(l)).count() >= 2
}

fn classify(s: &str) -> Option<ViolationKind> {
    if path_like(s) {
        Some(ViolationKind::PathLike)
    } else if source_like(s) {
        Some(ViolationKind::SourceLike)
    } else {
        None
    }
}

fn visit(value: &Value, field: &str, out: &mut Vec<PrivacyViolation>) {
    match value {
        Value::String(s) => {
            if let Some(kind) = classify(s) {
                out.push(PrivacyViolation { field: field.to_string(), kind });
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                visit(v, &format!("{field}[{i}]"), out);
            }
        }
        Value::Object(map) => {
            for (k, v) in map {
                let name = if field.is_empty() { k.clone() } else { format!("{field}.{k}") };
                if let Some(kind) = classify(k) {
                    out.push(PrivacyViolation { field: format!("{name}{{key}}"), kind });
                }
                visit(v, &name, out);
            }
        }
        _ => {}
    }
}

/// Every string value and key in the serialized submission, checked against
/// the path and source heuristics.
pub fn validate_privacy(submission: &AggregateSubmission) -> Result<(), Vec<PrivacyViolation>> {
    let value = serde_json::to_value(submission).unwrap_or(Value::Null);
    let mut out = Vec::new();
    visit(&value, "", &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Error)]
pub enum ResearchError {
    #[error("cannot write research sink {path}: {source}")]
    Sink {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default, PartialEq, Eq)]
pub struct WriteOutcome {
    pub appended: usize,
    /// Index into the input and the reasons it was refused.
    pub rejected: Vec<(usize, Vec<PrivacyViolation>)>,
}

static SINK_LOCK: Mutex<()> = Mutex::new(());

/// Append every submission that passes validation as one line each. The
/// accepted lines go out in a single write; an empty batch leaves the sink
/// untouched.
pub fn write_jsonl(submissions: &[AggregateSubmission], sink: &Path) -> Result<WriteOutcome, ResearchError> {
    let mut outcome = WriteOutcome::default();
    let mut buf = String::new();
    for (i, s) in submissions.iter().enumerate() {
        match validate_privacy(s) {
            Ok(()) => {
                buf.push_str(&serde_json::to_string(s).expect("submission serializes"));
                buf.push('\n');
                outcome.appended += 1;
            }
            Err(v) => outcome.rejected.push((i, v)),
        }
    }
    if outcome.appended == 0 {
        return Ok(outcome);
    }
    let err = |source| ResearchError::Sink { path: sink.display().to_string(), source };
    let _guard = SINK_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    let mut file = OpenOptions::new().read(true).append(true).create(true).open(sink).map_err(err)?;
    let len = file.metadata().map_err(err)?.len();
    if len > 0 {
        let mut last = [0u8; 1];
        file.seek(SeekFrom::Start(len - 1)).map_err(err)?;
        file.read_exact(&mut last).map_err(err)?;
        if last[0] != b'\n' {
            buf.insert(0, '\n');
        }
    }
    file.write_all(buf.as_bytes()).map_err(err)?;
    file.sync_data().map_err(err)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{Coverage, ScanMeta};
    use crate::rules::{Finding, FindingSource};
    use rand::SeedableRng;

    fn report(findings: Vec<Finding>) -> AuditReport {
        let v = crate::report::aggregate_verdicts(&findings, &Coverage::uniform(1));
        AuditReport::new(v, findings, ScanMeta::default())
    }

    fn sub() -> AggregateSubmission {
        build_aggregate_with(
            &report(vec![]),
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(1),
            "2026-01-01T00:00:00Z".into(),
        )
    }

    #[test]
    fn counts_carry_duplicates() {
        let f = Finding {
            check: CheckId::C03,
            severity: Severity::High,
            file: "a.py".into(),
            line: 1,
            issue: "i".into(),
            trigger: "t".into(),
            source: FindingSource::Static,
        };
        let s = build_aggregate(&report(vec![f.clone(), f.clone(), f]));
        assert_eq!(s.by_check["C03"], 3);
        assert_eq!(s.by_severity["HIGH"], 3);
        assert_eq!(s.findings_by_language["python"], 3);
        assert_eq!(s.scan_id.len(), 32);
        assert!(validate_privacy(&s).is_ok());
    }

    #[test]
    fn flags_paths_and_snippets() {
        let mut s = sub();
        assert!(validate_privacy(&s).is_ok());
        s.description = Some("found in src/a.py during review".into());
        let v = validate_privacy(&s).unwrap_err();
        assert_eq!(v, vec![PrivacyViolation { field: "description".into(), kind: ViolationKind::PathLike }]);

        let mut s = sub();
        s.note = Some("try:\n    run()\nexcept Exception:\n    pass\nreturn ok".into());
        assert_eq!(validate_privacy(&s).unwrap_err()[0].kind, ViolationKind::SourceLike);

        let mut s = sub();
        s.by_check.insert("C:\\repo".into(), 1);
        assert_eq!(validate_privacy(&s).unwrap_err()[0].field, "by_check.C:\\repo{key}");
    }

    #[test]
    fn sink_appends_and_repairs_torn_line() {
        let dir = tempfile::tempdir().unwrap();
        let sink = dir.path().join("sink.jsonl");
        assert_eq!(write_jsonl(&[], &sink).unwrap().appended, 0);
        assert!(!sink.exists());

        let mut bad = sub();
        bad.note = Some("/etc/passwd".into());
        let out = write_jsonl(&[sub(), bad], &sink).unwrap();
        assert_eq!((out.appended, out.rejected.len()), (1, 1));

        std::fs::OpenOptions::new().append(true).open(&sink).unwrap().write_all(b"{\"torn\":").unwrap();
        write_jsonl(&[sub(), sub()], &sink).unwrap();
        let text = std::fs::read_to_string(&sink).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        for i in [0, 2, 3] {
            serde_json::from_str::<AggregateSubmission>(lines[i]).unwrap();
        }
    }
}
