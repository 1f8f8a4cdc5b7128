use std::fmt::Write as _;

use serde::Serialize;

use super::{AuditReport, OutputFormat, ScanMeta, Verdict, VerdictMap};
use crate::rules::{CheckId, Finding, Severity};

/// Width of the indented key column; values start at column 28.
const KEY_WIDTH: usize = 26;

pub fn emit_report(report: &AuditReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Schema12 => emit_yaml(report),
        OutputFormat::Json => emit_json(report),
    }
}

/// Double-quoted scalar valid in both YAML and JSON.
pub(crate) fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if needs_escape(c) => {
                let mut buf = [0u16; 2];
                for unit in c.encode_utf16(&mut buf) {
                    let _ = write!(out, "\\u{:04X}", unit);
                }
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn needs_escape(c: char) -> bool {
    let u = c as u32;
    u < 0x20 || (0x7F..=0x9F).contains(&u) || u == 0xFEFF || u == 0xFFFE || u == 0xFFFF || u == 0x2028 || u == 0x2029
}

fn key_line(out: &mut String, key: &str, value: &str) {
    let _ = writeln!(out, "  {:<width$}{}", format!("{key}:"), value, width = KEY_WIDTH);
}

pub fn emit_yaml(report: &AuditReport) -> String {
    let mut out = String::from("ai_failure_audit:\n");
    key_line(&mut out, "audit_version", &quote(&report.audit_version));
    for (check, v) in report.verdicts.iter() {
        key_line(&mut out, check.schema_key(), v.as_str());
    }
    if report.findings.is_empty() {
        key_line(&mut out, "findings", "[]");
    } else {
        out.push_str("  findings:\n");
        for f in &report.findings {
            let _ = writeln!(out, "    - issue: {}", quote(&f.issue));
            let _ = writeln!(out, "      file: {}", quote(&f.file));
            let _ = writeln!(out, "      line: {}", f.line);
            let _ = writeln!(out, "      severity: {}", f.severity.as_str());
            let _ = writeln!(out, "      check: {}", f.check.code());
            let _ = writeln!(out, "      trigger: {}", quote(&f.trigger));
            let _ = writeln!(out, "      source: {}", f.source.as_str());
        }
    }
    out.push_str("scan_meta:\n");
    let meta = serde_yaml::to_string(&report.scan_meta).unwrap_or_default();
    for line in meta.lines() {
        let _ = writeln!(out, "  {line}");
    }
    out
}

#[derive(Serialize)]
struct JsonFinding<'a> {
    issue: &'a str,
    file: &'a str,
    line: usize,
    severity: Severity,
    check: &'static str,
    trigger: &'a str,
    source: &'static str,
}

#[derive(Serialize)]
struct JsonAudit<'a> {
    audit_version: &'a str,
    #[serde(flatten)]
    verdicts: &'a VerdictMap,
    findings: Vec<JsonFinding<'a>>,
}

#[derive(Serialize)]
struct JsonDoc<'a> {
    ai_failure_audit: JsonAudit<'a>,
    scan_meta: &'a ScanMeta,
}

pub fn emit_json(report: &AuditReport) -> String {
    let doc = JsonDoc {
        ai_failure_audit: JsonAudit {
            audit_version: &report.audit_version,
            verdicts: &report.verdicts,
            findings: report.findings.iter().map(json_finding).collect(),
        },
        scan_meta: &report.scan_meta,
    };
    let mut s = serde_json::to_string_pretty(&doc).unwrap_or_default();
    s.push('\n');
    s
}

fn json_finding(f: &Finding) -> JsonFinding<'_> {
    JsonFinding {
        issue: &f.issue,
        file: &f.file,
        line: f.line,
        severity: f.severity,
        check: f.check.code(),
        trigger: &f.trigger,
        source: f.source.as_str(),
    }
}

/// Human-readable digest for terminals.
pub fn render_summary(report: &AuditReport) -> String {
    let mut out = String::new();
    let meta = &report.scan_meta;
    let _ = writeln!(
        out,
        "scanned {} file(s) [{}], {} finding(s)",
        meta.files_scanned,
        meta.mode.as_str(),
        report.findings.len()
    );
    for sev in Severity::ALL {
        let n = report.findings.iter().filter(|f| f.severity == sev).count();
        if n > 0 {
            let _ = writeln!(out, "  {:<7}{n}", sev.as_str());
        }
    }
    let failed: Vec<CheckId> = report.verdicts.iter().filter(|(_, v)| *v == Verdict::Fail).map(|(c, _)| c).collect();
    if !failed.is_empty() {
        out.push_str("failed checks:\n");
        for c in failed {
            let n = report.findings.iter().filter(|f| f.check == c).count();
            let _ = writeln!(out, "  {} {:<28}{n}", c.code(), c.schema_key());
        }
    }
    let unknown: Vec<CheckId> =
        report.verdicts.iter().filter(|(_, v)| *v == Verdict::Unknown).map(|(c, _)| c).collect();
    if !unknown.is_empty() {
        out.push_str("requires human review (UNKNOWN):\n");
        for c in unknown {
            let note = if c.is_automated() { "no analyzable files" } else { "not automatable" };
            let _ = writeln!(out, "  {} {:<28}{note}", c.code(), c.schema_key());
        }
    }
    for p in &meta.profiles {
        let _ = writeln!(out, "profile: {} [{} + {}] in {}", p.tag, p.checks[0], p.checks[1], p.file);
    }
    for s in &meta.skipped {
        let _ = writeln!(out, "skipped: {} ({})", s.file, s.reason);
    }
    if let Some(ev) = &meta.evaluator {
        for s in &ev.failures {
            let _ = writeln!(out, "evaluator fallback: {} ({})", s.file, s.reason);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{aggregate_verdicts, Coverage};
    use crate::rules::FindingSource;

    fn sample() -> AuditReport {
        let findings = vec![Finding {
            check: CheckId::C01,
            severity: Severity::High,
            file: "svc/a.py".into(),
            line: 7,
            issue: "success \"ok\" after failure".into(),
            trigger: "success_coded_return".into(),
            source: FindingSource::Static,
        }];
        let verdicts = aggregate_verdicts(&findings, &Coverage::uniform(1));
        AuditReport::new(verdicts, findings, ScanMeta::default())
    }

    #[test]
    fn values_align_at_column_28() {
        let text = emit_yaml(&sample());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ai_failure_audit:");
        assert_eq!(lines[1], "  audit_version:            \"1.2\"");
        assert_eq!(lines[2], "  success_integrity:        FAIL");
        for line in &lines[1..17] {
            assert_eq!(line.find(|c: char| c == '"' || c.is_ascii_uppercase()), Some(28), "{line}");
        }
        assert_eq!(lines[17], "  findings:");
    }

    #[test]
    fn quoting_escapes_nonprintables() {
        assert_eq!(quote("a\"b\\c\n\u{7f}"), "\"a\\\"b\\\\c\\n\\u007F\"");
        let s = "x\u{1F600}\u{85}";
        let back: String = serde_yaml::from_str(&quote(s)).unwrap();
        assert_eq!(back, s);
        let back: String = serde_json::from_str(&quote(s)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_keeps_key_order() {
        let text = emit_json(&sample());
        let a = text.find("\"audit_version\"").unwrap();
        let b = text.find("\"success_integrity\"").unwrap();
        let c = text.find("\"confidence_opacity\"").unwrap();
        let d = text.find("\"findings\"").unwrap();
        assert!(a < b && b < c && c < d);
    }
}
