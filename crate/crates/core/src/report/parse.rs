use serde_yaml::{Mapping, Value};

use super::{AuditReport, ReportError, ScanMeta, Verdict, VerdictMap, AUDIT_VERSION};
use crate::rules::{CheckId, Finding, FindingSource, Severity};

/// JSON permits raw DEL, C1 controls and Unicode line separators inside strings;
/// YAML rejects or folds them. In a JSON document they can only occur inside
/// strings, so escaping them keeps the meaning.
fn escape_json_controls(text: &str) -> std::borrow::Cow<'_, str> {
    let bad = |c: char| c >= '\u{7f}' && super::emit::needs_escape(c);
    if !text.trim_start().starts_with('{') || !text.contains(bad) {
        return text.into();
    }
    text.chars()
        .map(|c| if bad(c) { format!("\\u{:04x}", c as u32) } else { c.to_string() })
        .collect::<String>()
        .into()
}

const FINDING_KEYS: [&str; 7] = ["issue", "file", "line", "severity", "check", "trigger", "source"];

/// Parse a YAML or JSON audit document, enforcing key order and value vocabularies.
pub fn parse_report(text: &str) -> Result<AuditReport, ReportError> {
    let text = escape_json_controls(text);
    let doc: Value = serde_yaml::from_str(&text).map_err(|e| ReportError::Syntax(e.to_string()))?;
    let top = doc.as_mapping().ok_or_else(|| ReportError::Syntax("top level is not a mapping".into()))?;
    let mut audit = None;
    let mut meta = None;
    for (k, v) in top {
        match key_str(k)? {
            "ai_failure_audit" if audit.is_none() => audit = Some(v),
            "scan_meta" if meta.is_none() => meta = Some(v),
            other => return Err(ReportError::UnexpectedKey(other.to_string())),
        }
    }
    let audit = audit.ok_or_else(|| ReportError::MissingKey("ai_failure_audit".into()))?;
    let audit = audit
        .as_mapping()
        .ok_or_else(|| ReportError::Syntax("ai_failure_audit is not a mapping".into()))?;

    let scan_meta = match meta {
        None | Some(Value::Null) => ScanMeta::default(),
        Some(v) => serde_yaml::from_value(v.clone()).map_err(|e| ReportError::Meta(e.to_string()))?,
    };

    let (audit_version, verdicts, findings) = parse_audit(audit)?;
    Ok(AuditReport { audit_version, verdicts, findings, scan_meta })
}

fn key_str(k: &Value) -> Result<&str, ReportError> {
    k.as_str().ok_or_else(|| ReportError::Syntax(format!("non-string key {k:?}")))
}

fn expected_keys() -> Vec<&'static str> {
    let mut keys = vec!["audit_version"];
    keys.extend(CheckId::ALL.iter().map(|c| c.schema_key()));
    keys.push("findings");
    keys
}

fn slot_matches(expected: &str, found: &str) -> bool {
    expected == found || (expected == CheckId::C13.schema_key() && found == "confidence_representation")
}

fn parse_audit(audit: &Mapping) -> Result<(String, VerdictMap, Vec<Finding>), ReportError> {
    match audit.get("audit_version") {
        None => return Err(ReportError::MissingKey("audit_version".into())),
        Some(v) => {
            let version = scalar_text(v);
            if version != AUDIT_VERSION {
                return Err(ReportError::UnsupportedVersion(version));
            }
        }
    }
    let expected = expected_keys();
    let entries: Vec<(&str, &Value)> =
        audit.iter().map(|(k, v)| key_str(k).map(|k| (k, v))).collect::<Result<_, _>>()?;
    for (found, _) in &entries {
        if !expected.iter().any(|e| slot_matches(e, found)) {
            return Err(ReportError::UnexpectedKey(found.to_string()));
        }
    }
    for e in &expected {
        if !entries.iter().any(|(k, _)| slot_matches(e, k)) {
            return Err(ReportError::MissingKey(e.to_string()));
        }
    }
    if entries.len() != expected.len() {
        return Err(ReportError::Syntax("duplicate keys in ai_failure_audit".into()));
    }
    for (e, (k, _)) in expected.iter().zip(&entries) {
        if !slot_matches(e, k) {
            return Err(ReportError::KeyOrder { expected: e.to_string(), found: k.to_string() });
        }
    }

    let mut verdicts = VerdictMap::filled(Verdict::Unknown);
    for (check, (key, value)) in CheckId::ALL.iter().zip(&entries[1..16]) {
        let token = scalar_text(value);
        let v = Verdict::parse(&token)
            .ok_or_else(|| ReportError::UnknownVerdict { key: key.to_string(), token })?;
        verdicts.set(*check, v);
    }

    let findings = match entries[16].1 {
        Value::Null => Vec::new(),
        Value::Sequence(items) => items
            .iter()
            .enumerate()
            .map(|(index, item)| {
                parse_finding(item).map_err(|reason| ReportError::MalformedFinding { index, reason })
            })
            .collect::<Result<_, _>>()?,
        _ => return Err(ReportError::MalformedFinding { index: 0, reason: "findings is not a list".into() }),
    };
    Ok((AUDIT_VERSION.to_string(), verdicts, findings))
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Null => "null".into(),
        other => format!("{other:?}"),
    }
}

fn parse_finding(item: &Value) -> Result<Finding, String> {
    let map = item.as_mapping().ok_or("entry is not a mapping")?;
    for k in map.keys() {
        let k = k.as_str().ok_or("non-string key")?;
        if !FINDING_KEYS.contains(&k) {
            return Err(format!("unexpected key `{k}`"));
        }
    }
    let text = |key: &str| -> Result<String, String> {
        match map.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(format!("`{key}` must be a string")),
            None => Err(format!("missing `{key}`")),
        }
    };
    let line = match map.get("line") {
        Some(Value::Number(n)) => n.as_u64().filter(|n| *n >= 1).ok_or("`line` must be a positive integer")?,
        _ => return Err("missing or non-integer `line`".into()),
    };
    let severity_token = text("severity")?;
    let severity = Severity::parse(&severity_token).ok_or(format!("unknown severity `{severity_token}`"))?;
    let check_token = text("check")?;
    let check: CheckId = check_token.parse().map_err(|_| format!("unknown check `{check_token}`"))?;
    let trigger = match map.get("trigger") {
        None => String::new(),
        Some(_) => text("trigger")?,
    };
    let source = match map.get("source").map(|_| text("source")).transpose()?.as_deref() {
        None | Some("static") => FindingSource::Static,
        Some("llm") => FindingSource::Llm,
        Some(other) => return Err(format!("unknown source `{other}`")),
    };
    Ok(Finding {
        check,
        severity,
        file: text("file")?,
        line: line as usize,
        issue: text("issue")?,
        trigger,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::{emit_json, emit_yaml, Coverage};

    fn empty_report() -> AuditReport {
        AuditReport::new(crate::report::aggregate_verdicts(&[], &Coverage::uniform(1)), vec![], ScanMeta::default())
    }

    #[test]
    fn both_formats_round_trip() {
        let r = empty_report();
        assert_eq!(parse_report(&emit_yaml(&r)).unwrap(), r);
        assert_eq!(parse_report(&emit_json(&r)).unwrap(), r);
    }

    #[test]
    fn rejects_wrong_version_order_and_tokens() {
        let text = emit_yaml(&empty_report());
        let old = text.replace("\"1.2\"", "\"1.1\"");
        assert_eq!(parse_report(&old), Err(ReportError::UnsupportedVersion("1.1".into())));

        let bad = text.replacen("PASS", "MAYBE", 1);
        assert!(matches!(parse_report(&bad), Err(ReportError::UnknownVerdict { token, .. }) if token == "MAYBE"));

        let lines: Vec<&str> = text.lines().collect();
        let mut swapped = lines.clone();
        swapped.swap(2, 3);
        assert!(matches!(parse_report(&swapped.join("\n")), Err(ReportError::KeyOrder { .. })));

        let dropped: Vec<&str> = lines.iter().copied().filter(|l| !l.contains("lineage")).collect();
        assert_eq!(parse_report(&dropped.join("\n")), Err(ReportError::MissingKey("lineage".into())));
    }

    #[test]
    fn accepts_c13_alias_and_rejects_bad_findings() {
        let text = emit_yaml(&empty_report()).replace("confidence_opacity:       ", "confidence_representation: ");
        assert!(parse_report(&text).is_ok());

        let text = emit_yaml(&empty_report()).replace(
            "findings:                 []",
            "findings:\n    - {issue: x, file: a.py, line: 0, severity: HIGH, check: C01}",
        );
        assert!(matches!(parse_report(&text), Err(ReportError::MalformedFinding { index: 0, .. })));
    }
}
