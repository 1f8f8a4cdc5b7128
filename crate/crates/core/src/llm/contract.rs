use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Deserialize;
use serde_json::Value;

use super::{Evaluator, LlmError};
use crate::report::{Verdict, VerdictMap};
use crate::rules::{catalog_entry, CheckId, Finding, FindingSource, Severity};
use crate::syntax::SourceFile;

/// Version tag of the request/response shape; bumped with any prompt change.
pub const CONTRACT_VERSION: &str = "llm-audit/1.2.0";

/// Bytes of file content sent per request.
pub const DEFAULT_CONTEXT_BUDGET: usize = 48_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluatorRequest {
    pub file_id: String,
    pub language: String,
    /// Possibly truncated at a line boundary.
    pub content: String,
    pub line_count: usize,
    pub truncated: bool,
    /// Automated checks only.
    pub checks: Vec<CheckId>,
}

impl EvaluatorRequest {
    pub fn new(file: &SourceFile, checks: &[CheckId], budget: usize) -> Self {
        let (content, truncated) = truncate_at_line(&file.content, budget);
        let checks = checks.iter().copied().filter(|c| c.is_automated()).collect();
        EvaluatorRequest {
            file_id: file.file_id.0.clone(),
            language: file.language.as_str().to_string(),
            line_count: content.lines().count(),
            content: content.to_string(),
            truncated,
            checks,
        }
    }

    /// Prompt text sent to a text-in endpoint.
    pub fn prompt(&self) -> String {
        let mut p = String::new();
        let _ = writeln!(p, "You are auditing one source file for failure-truthfulness defects.");
        let _ = writeln!(p, "Contract: {CONTRACT_VERSION}");
        let _ = writeln!(p, "Rule only on these checks, by key:");
        for c in &self.checks {
            let title = catalog_entry(*c).map_or("", |e| e.title);
            let sev: Vec<&str> = c.allowed_severities().iter().map(|s| s.as_str()).collect();
            let _ = writeln!(p, "- {} ({}): {}; severities {}", c.schema_key(), c.code(), title, sev.join("/"));
        }
        let _ = writeln!(p, "Reply with a single JSON object and nothing else:");
        let _ = writeln!(
            p,
            "{{\"contract\": \"{CONTRACT_VERSION}\", \"verdicts\": {{<key>: \"PASS\"|\"FAIL\"|\"UNKNOWN\"}}, \
             \"findings\": [{{\"check\": \"Cnn\", \"severity\": \"HIGH\"|\"MEDIUM\"|\"LOW\", \"line\": <int>, \"issue\": <text>}}]}}"
        );
        let _ = writeln!(p, "Every listed key needs a verdict. A FAIL verdict needs at least one finding; other verdicts none.");
        if self.truncated {
            let _ = writeln!(p, "The file was truncated to its first {} lines.", self.line_count);
        }
        let _ = writeln!(p, "File: {} ({})", self.file_id, self.language);
        for (i, line) in self.content.lines().enumerate() {
            let _ = writeln!(p, "{:>5} | {line}", i + 1);
        }
        p
    }
}

fn truncate_at_line(content: &str, budget: usize) -> (&str, bool) {
    if content.len() <= budget {
        return (content, false);
    }
    let mut cut = budget;
    while !content.is_char_boundary(cut) {
        cut -= 1;
    }
    let cut = content[..cut].rfind('\n').map_or(0, |i| i + 1);
    (&content[..cut], true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmAudit {
    pub verdicts: VerdictMap,
    pub findings: Vec<Finding>,
    pub truncated: bool,
    /// Human-review checks the evaluator ruled on; overwritten to UNKNOWN.
    pub forced: Vec<CheckId>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResponse {
    contract: String,
    verdicts: serde_json::Map<String, Value>,
    findings: Vec<RawFinding>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFinding {
    check: String,
    severity: String,
    line: u64,
    issue: String,
}

/// Strictly validate an evaluator reply. Any deviation rejects the whole
/// reply; rulings on human-review checks are overwritten rather than rejected.
pub fn parse_response(text: &str, request: &EvaluatorRequest) -> Result<LlmAudit, LlmError> {
    let bad = |m: String| LlmError::Contract(m);
    let raw: RawResponse = serde_json::from_str(text.trim()).map_err(|e| bad(e.to_string()))?;
    if raw.contract != CONTRACT_VERSION {
        return Err(bad(format!("contract `{}`", raw.contract)));
    }
    let requested: BTreeSet<CheckId> = request.checks.iter().copied().collect();
    let mut verdicts = VerdictMap::filled(Verdict::Unknown);
    let mut seen = BTreeSet::new();
    let mut forced = Vec::new();
    for (key, value) in &raw.verdicts {
        let check = CheckId::from_schema_key(key).ok_or_else(|| bad(format!("unknown verdict key `{key}`")))?;
        let token = value.as_str().ok_or_else(|| bad(format!("verdict for `{key}` is not a string")))?;
        let verdict = Verdict::parse(token).ok_or_else(|| bad(format!("verdict `{token}` for `{key}`")))?;
        if !seen.insert(check) {
            return Err(bad(format!("duplicate verdict for {check}")));
        }
        if !check.is_automated() {
            if verdict != Verdict::Unknown {
                forced.push(check);
            }
            continue;
        }
        if !requested.contains(&check) {
            return Err(bad(format!("verdict for unrequested check {check}")));
        }
        verdicts.set(check, verdict);
    }
    if let Some(missing) = requested.iter().find(|c| !seen.contains(c)) {
        return Err(bad(format!("no verdict for {}", missing.schema_key())));
    }

    let mut findings = Vec::new();
    for (i, f) in raw.findings.into_iter().enumerate() {
        let check: CheckId = f.check.parse().map_err(|_| bad(format!("finding {i}: check `{}`", f.check)))?;
        if !check.is_automated() {
            if !forced.contains(&check) {
                forced.push(check);
            }
            continue;
        }
        let severity = Severity::parse(&f.severity).ok_or_else(|| bad(format!("finding {i}: severity `{}`", f.severity)))?;
        if !check.allowed_severities().contains(&severity) {
            return Err(bad(format!("finding {i}: {check} cannot be {severity}")));
        }
        if f.line == 0 || f.line as usize > request.line_count.max(1) {
            return Err(bad(format!("finding {i}: line {} outside 1..={}", f.line, request.line_count)));
        }
        if verdicts.get(check) != Verdict::Fail {
            return Err(bad(format!("finding {i}: {check} reported without a FAIL verdict")));
        }
        findings.push(Finding {
            check,
            severity,
            file: request.file_id.clone(),
            line: f.line as usize,
            issue: f.issue,
            trigger: "llm".to_string(),
            source: FindingSource::Llm,
        });
    }
    for check in &request.checks {
        if verdicts.get(*check) == Verdict::Fail && !findings.iter().any(|f| f.check == *check) {
            return Err(bad(format!("FAIL verdict for {check} without findings")));
        }
    }
    forced.sort();
    Ok(LlmAudit { verdicts, findings, truncated: request.truncated, forced })
}

/// Request and validate one file's audit.
pub fn request_llm_audit(
    file: &SourceFile,
    checks: &[CheckId],
    evaluator: &dyn Evaluator,
    budget: usize,
) -> Result<LlmAudit, LlmError> {
    let request = EvaluatorRequest::new(file, checks, budget);
    let reply = evaluator.evaluate(&request)?;
    parse_response(&reply, &request)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::StubEvaluator;

    fn file() -> SourceFile {
        SourceFile::new("svc/a.py", "def f():\n    return 1\n")
    }

    fn all() -> Vec<CheckId> {
        CheckId::automated().collect()
    }

    #[test]
    fn stub_all_pass() {
        let a = request_llm_audit(&file(), &all(), &StubEvaluator::AllPass, 1000).unwrap();
        assert_eq!(a.verdicts.count(Verdict::Pass), 13);
        assert_eq!(a.verdicts.count(Verdict::Unknown), 2);
        assert!(a.findings.is_empty() && !a.truncated);
    }

    #[test]
    fn lineage_ruling_is_overwritten() {
        let req = EvaluatorRequest::new(&file(), &all(), 1000);
        let mut doc = serde_json::json!({"contract": CONTRACT_VERSION, "verdicts": {}, "findings": []});
        for c in CheckId::ALL {
            doc["verdicts"][c.schema_key()] = "PASS".into();
        }
        doc["verdicts"]["lineage"] = "FAIL".into();
        doc["findings"] = serde_json::json!([{"check": "C12", "severity": "HIGH", "line": 1, "issue": "x"}]);
        let a = parse_response(&doc.to_string(), &req).unwrap();
        assert_eq!(a.verdicts.get(CheckId::C12), Verdict::Unknown);
        assert_eq!(a.verdicts.get(CheckId::C07), Verdict::Unknown);
        assert_eq!(a.forced, vec![CheckId::C07, CheckId::C12]);
        assert!(a.findings.is_empty());
    }

    #[test]
    fn strictness() {
        let req = EvaluatorRequest::new(&file(), &all(), 1000);
        let pass = StubEvaluator::AllPass.evaluate(&req).unwrap();
        let mut doc: Value = serde_json::from_str(&pass).unwrap();
        doc["extra"] = 1.into();
        assert!(parse_response(&doc.to_string(), &req).is_err());

        let mut doc: Value = serde_json::from_str(&pass).unwrap();
        doc["verdicts"]["exception_handling"] = "FAIL".into();
        assert!(parse_response(&doc.to_string(), &req).is_err());
        doc["findings"] = serde_json::json!([{"check": "C03", "severity": "LOW", "line": 1, "issue": "x"}]);
        assert!(parse_response(&doc.to_string(), &req).is_err());
        doc["findings"] = serde_json::json!([{"check": "C03", "severity": "MEDIUM", "line": 9, "issue": "x"}]);
        assert!(parse_response(&doc.to_string(), &req).is_err());
        doc["findings"] = serde_json::json!([{"check": "C03", "severity": "MEDIUM", "line": 2, "issue": "x"}]);
        assert_eq!(parse_response(&doc.to_string(), &req).unwrap().findings.len(), 1);

        assert!(parse_response("not json", &req).is_err());
    }

    #[test]
    fn truncation_is_line_aligned_and_flagged() {
        let big = SourceFile::new("big.py", "x = 1\n".repeat(100));
        let req = EvaluatorRequest::new(&big, &all(), 20);
        assert!(req.truncated);
        assert_eq!(req.content, "x = 1\nx = 1\nx = 1\n");
        let a = request_llm_audit(&big, &all(), &StubEvaluator::AllPass, 20).unwrap();
        assert!(a.truncated);
    }
}
