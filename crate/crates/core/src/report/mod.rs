//! Verdict aggregation and the versioned audit document.

mod emit;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{CheckId, Finding, Profile};

pub use emit::{emit_json, emit_report, emit_yaml, render_summary};
pub use parse::parse_report;

pub const AUDIT_VERSION: &str = "1.2";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unknown => "UNKNOWN",
        }
    }

    pub fn parse(token: &str) -> Option<Verdict> {
        match token {
            "PASS" => Some(Verdict::Pass),
            "FAIL" => Some(Verdict::Fail),
            "UNKNOWN" => Some(Verdict::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One verdict per check, iterated in schema order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VerdictMap([Verdict; 15]);

impl VerdictMap {
    pub fn filled(v: Verdict) -> Self {
        VerdictMap([v; 15])
    }

    /// Every automated check PASS, human-review checks UNKNOWN.
    pub fn all_pass() -> Self {
        let mut m = VerdictMap::filled(Verdict::Pass);
        m.set(CheckId::C07, Verdict::Unknown);
        m.set(CheckId::C12, Verdict::Unknown);
        m
    }

    fn index(check: CheckId) -> usize {
        CheckId::ALL.iter().position(|c| *c == check).unwrap_or(0)
    }

    pub fn get(&self, check: CheckId) -> Verdict {
        self.0[Self::index(check)]
    }

    pub fn set(&mut self, check: CheckId, v: Verdict) {
        self.0[Self::index(check)] = v;
    }

    pub fn iter(&self) -> impl Iterator<Item = (CheckId, Verdict)> + '_ {
        CheckId::ALL.iter().copied().zip(self.0.iter().copied())
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.0.iter().filter(|x| **x == v).count()
    }
}

impl Serialize for VerdictMap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(15))?;
        for (check, v) in self.iter() {
            map.serialize_entry(check.schema_key(), &v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for VerdictMap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, Verdict>::deserialize(deserializer)?;
        let mut map = VerdictMap::filled(Verdict::Unknown);
        let mut seen = 0;
        for (key, v) in raw {
            let check = CheckId::from_schema_key(&key)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown verdict key `{key}`")))?;
            map.set(check, v);
            seen += 1;
        }
        if seen != 15 {
            return Err(serde::de::Error::custom(format!("expected 15 verdicts, found {seen}")));
        }
        Ok(map)
    }
}

/// Per-check count of files that could be analyzed for that check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Coverage([usize; 15]);

impl Coverage {
    pub fn get(&self, check: CheckId) -> usize {
        self.0[VerdictMap::index(check)]
    }

    pub fn add(&mut self, check: CheckId, n: usize) {
        self.0[VerdictMap::index(check)] += n;
    }

    /// Every automated check covered by `n` files.
    pub fn uniform(n: usize) -> Self {
        let mut c = Coverage::default();
        for check in CheckId::automated() {
            c.add(check, n);
        }
        c
    }

    pub fn merge(&mut self, other: &Coverage) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }
}

/// FAIL when any finding exists, UNKNOWN without coverage, PASS otherwise.
/// Human-review checks are always UNKNOWN.
pub fn aggregate_verdicts(findings: &[Finding], coverage: &Coverage) -> VerdictMap {
    let mut map = VerdictMap::filled(Verdict::Unknown);
    for check in CheckId::automated() {
        let v = if findings.iter().any(|f| f.check == check) {
            Verdict::Fail
        } else if coverage.get(check) == 0 {
            Verdict::Unknown
        } else {
            Verdict::Pass
        };
        map.set(check, v);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanScope {
    #[default]
    File,
    Directory,
    Corpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    #[default]
    Static,
    Llm,
    Hybrid,
}

impl ScanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanMode::Static => "static",
            ScanMode::Llm => "llm",
            ScanMode::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct EvaluatorMeta {
    pub contract: String,
    pub endpoint: String,
    pub requested: usize,
    /// Files whose evaluator result was discarded; the scan used static results only.
    pub failures: Vec<SkippedFile>,
    /// Files sent with truncated content.
    pub truncated: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScanMeta {
    pub scope: ScanScope,
    pub mode: ScanMode,
    pub files_scanned: usize,
    pub languages: BTreeMap<String, usize>,
    pub parse_modes: BTreeMap<String, usize>,
    pub excluded_unsupported: usize,
    pub skipped: Vec<SkippedFile>,
    pub profiles: Vec<Profile>,
    pub evaluator: Option<EvaluatorMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub audit_version: String,
    pub verdicts: VerdictMap,
    pub findings: Vec<Finding>,
    pub scan_meta: ScanMeta,
}

impl AuditReport {
    pub fn new(verdicts: VerdictMap, findings: Vec<Finding>, scan_meta: ScanMeta) -> Self {
        AuditReport { audit_version: AUDIT_VERSION.to_string(), verdicts, findings, scan_meta }
    }

    pub fn has_high(&self) -> bool {
        self.findings.iter().any(|f| f.severity == crate::rules::Severity::High)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    /// YAML document in the v1.2 layout.
    #[default]
    Schema12,
    Json,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("document is not well-formed: {0}")]
    Syntax(String),
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unexpected key `{0}`")]
    UnexpectedKey(String),
    #[error("key `{found}` out of order; expected `{expected}`")]
    KeyOrder { expected: String, found: String },
    #[error("unknown verdict `{token}` for `{key}`")]
    UnknownVerdict { key: String, token: String },
    #[error("malformed finding #{index}: {reason}")]
    MalformedFinding { index: usize, reason: String },
    #[error("unsupported audit_version `{0}`")]
    UnsupportedVersion(String),
    #[error("invalid scan_meta: {0}")]
    Meta(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{FindingSource, Severity};

    fn finding(check: CheckId) -> Finding {
        Finding {
            check,
            severity: Severity::Medium,
            file: "a.py".into(),
            line: 3,
            issue: "x".into(),
            trigger: "t".into(),
            source: FindingSource::Static,
        }
    }

    #[test]
    fn one_finding_full_coverage() {
        let v = aggregate_verdicts(&[finding(CheckId::C03)], &Coverage::uniform(1));
        assert_eq!(v.get(CheckId::C03), Verdict::Fail);
        assert_eq!(v.get(CheckId::C07), Verdict::Unknown);
        assert_eq!(v.get(CheckId::C12), Verdict::Unknown);
        assert_eq!(v.count(Verdict::Pass), 12);
    }

    #[test]
    fn coverage_gaps_are_unknown() {
        let mut cov = Coverage::uniform(1);
        cov.0[VerdictMap::index(CheckId::C14)] = 0;
        let v = aggregate_verdicts(&[], &cov);
        assert_eq!(v.get(CheckId::C14), Verdict::Unknown);
        assert_eq!(v.count(Verdict::Pass), 12);
        let v = aggregate_verdicts(&[], &Coverage::uniform(3));
        assert_eq!((v.count(Verdict::Pass), v.count(Verdict::Unknown)), (13, 2));
        assert_eq!(aggregate_verdicts(&[], &Coverage::default()).count(Verdict::Unknown), 15);
    }
}
