//! Check catalog and rule evaluation.

mod checks;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicons;
use crate::syntax::{ParseMode, SyntaxModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CheckId {
    C01,
    C02,
    C03,
    C04,
    C05,
    C06,
    C07,
    C08,
    C09,
    C10,
    C11,
    C12,
    C13,
    C14,
    C15,
}

impl CheckId {
    /// Schema order.
    pub const ALL: [CheckId; 15] = [
        CheckId::C01,
        CheckId::C02,
        CheckId::C03,
        CheckId::C04,
        CheckId::C05,
        CheckId::C06,
        CheckId::C07,
        CheckId::C08,
        CheckId::C09,
        CheckId::C10,
        CheckId::C11,
        CheckId::C12,
        CheckId::C13,
        CheckId::C14,
        CheckId::C15,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CheckId::C01 => "C01",
            CheckId::C02 => "C02",
            CheckId::C03 => "C03",
            CheckId::C04 => "C04",
            CheckId::C05 => "C05",
            CheckId::C06 => "C06",
            CheckId::C07 => "C07",
            CheckId::C08 => "C08",
            CheckId::C09 => "C09",
            CheckId::C10 => "C10",
            CheckId::C11 => "C11",
            CheckId::C12 => "C12",
            CheckId::C13 => "C13",
            CheckId::C14 => "C14",
            CheckId::C15 => "C15",
        }
    }

    pub fn schema_key(self) -> &'static str {
        match self {
            CheckId::C01 => "success_integrity",
            CheckId::C02 => "audit_integrity",
            CheckId::C03 => "exception_handling",
            CheckId::C04 => "fallback_control",
            CheckId::C05 => "bypass_controls",
            CheckId::C06 => "return_contracts",
            CheckId::C07 => "logic_consistency",
            CheckId::C08 => "background_tasks",
            CheckId::C09 => "environment_safety",
            CheckId::C10 => "startup_integrity",
            CheckId::C11 => "determinism",
            CheckId::C12 => "lineage",
            CheckId::C13 => "confidence_opacity",
            CheckId::C14 => "test_coverage_symmetry",
            CheckId::C15 => "idempotency_safety",
        }
    }

    /// Accepts the schema key or the alias `confidence_representation` for C13.
    pub fn from_schema_key(key: &str) -> Option<CheckId> {
        if key == "confidence_representation" {
            return Some(CheckId::C13);
        }
        CheckId::ALL.into_iter().find(|c| c.schema_key() == key)
    }

    /// C07 and C12 are left to human review and never evaluated.
    pub fn is_automated(self) -> bool {
        !matches!(self, CheckId::C07 | CheckId::C12)
    }

    /// Whether the check runs on lexical-fallback models.
    pub fn runs_lexically(self) -> bool {
        matches!(self, CheckId::C03 | CheckId::C05 | CheckId::C09 | CheckId::C11 | CheckId::C15)
    }

    pub fn automated() -> impl Iterator<Item = CheckId> {
        CheckId::ALL.into_iter().filter(|c| c.is_automated())
    }

    /// Severities the check is permitted to emit.
    pub fn allowed_severities(self) -> &'static [Severity] {
        match self {
            CheckId::C03 | CheckId::C14 => &[Severity::High, Severity::Medium],
            CheckId::C06 | CheckId::C08 | CheckId::C13 => &[Severity::Medium],
            CheckId::C04 => &[Severity::Low],
            CheckId::C07 | CheckId::C12 => &[],
            _ => &[Severity::High],
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown check id `{0}`")]
pub struct UnknownCheck(pub String);

impl FromStr for CheckId {
    type Err = UnknownCheck;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        CheckId::ALL
            .into_iter()
            .find(|c| c.code() == upper)
            .or_else(|| CheckId::from_schema_key(s.trim()))
            .ok_or_else(|| UnknownCheck(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::High, Severity::Medium, Severity::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::High => "HIGH",
            Severity::Medium => "MEDIUM",
            Severity::Low => "LOW",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        Severity::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which evaluator produced a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FindingSource {
    #[default]
    Static,
    Llm,
}

impl FindingSource {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingSource::Static => "static",
            FindingSource::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub check: CheckId,
    pub severity: Severity,
    pub file: String,
    pub line: usize,
    pub issue: String,
    /// Name of the trigger sub-pattern.
    pub trigger: String,
    pub source: FindingSource,
}

impl Finding {
    fn new(check: CheckId, severity: Severity, model: &SyntaxModel, line: usize, trigger: &str, issue: String) -> Self {
        debug_assert!(check.allowed_severities().contains(&severity));
        Finding {
            check,
            severity,
            file: model.file.file_id.0.clone(),
            line,
            issue,
            trigger: trigger.to_string(),
            source: FindingSource::Static,
        }
    }

    /// Ordering used for every findings list: file, line, check, then the rest.
    pub fn sort_key(&self) -> (&str, usize, CheckId, FindingSource, Severity, &str, &str) {
        (&self.file, self.line, self.check, self.source, self.severity, &self.trigger, &self.issue)
    }
}

pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleScope {
    PerHandler,
    PerFunction,
    PerCall,
    PerFile,
    PerTestFile,
}

/// One automated check's catalog entry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CheckRule {
    pub check: CheckId,
    pub title: &'static str,
    pub trigger: &'static str,
    pub scope: RuleScope,
}

const CATALOG: [CheckRule; 13] = [
    CheckRule {
        check: CheckId::C01,
        title: "Success returned after critical failure",
        trigger: "handler returns a success-coded value without re-raising",
        scope: RuleScope::PerHandler,
    },
    CheckRule {
        check: CheckId::C02,
        title: "Audit or evidence write can fail silently",
        trigger: "audit-lexicon call guarded by, or inside, a swallowing handler",
        scope: RuleScope::PerCall,
    },
    CheckRule {
        check: CheckId::C03,
        title: "Exceptions swallowed or neutralized",
        trigger: "broad or bare handler whose body is empty (HIGH), logs only or returns a value (MEDIUM)",
        scope: RuleScope::PerHandler,
    },
    CheckRule {
        check: CheckId::C04,
        title: "Silent fallback defaults",
        trigger: "null-coalescing, or-default, get-with-default, or default assignment in a handler",
        scope: RuleScope::PerFile,
    },
    CheckRule {
        check: CheckId::C05,
        title: "Bypass flags skip controls",
        trigger: "bypass-lexicon condition whose branch skips a guard call",
        scope: RuleScope::PerFunction,
    },
    CheckRule {
        check: CheckId::C06,
        title: "Ambiguous return contracts",
        trigger: "null return on a failure path alongside non-null returns",
        scope: RuleScope::PerFunction,
    },
    CheckRule {
        check: CheckId::C08,
        title: "Unsupervised background work",
        trigger: "task/thread/promise created with no join, await or error continuation",
        scope: RuleScope::PerCall,
    },
    CheckRule {
        check: CheckId::C09,
        title: "Environment-dependent safety",
        trigger: "environment-lexicon condition whose branch skips a guard call",
        scope: RuleScope::PerFunction,
    },
    CheckRule {
        check: CheckId::C10,
        title: "Startup continues after failed initialization",
        trigger: "swallowing handler in a startup-like scope",
        scope: RuleScope::PerHandler,
    },
    CheckRule {
        check: CheckId::C11,
        title: "Unseeded nondeterminism",
        trigger: "random source or positive temperature outside tests with no seed call in the file",
        scope: RuleScope::PerCall,
    },
    CheckRule {
        check: CheckId::C13,
        title: "Fallback values without confidence posture",
        trigger: "handler returns a fallback or empty value with no posture key",
        scope: RuleScope::PerHandler,
    },
    CheckRule {
        check: CheckId::C14,
        title: "Happy-path-only tests",
        trigger: "no failure-path tests with >=3 happy-path tests (HIGH); failure/happy < 0.25 (MEDIUM)",
        scope: RuleScope::PerTestFile,
    },
    CheckRule {
        check: CheckId::C15,
        title: "Non-idempotent retries",
        trigger: "retry construct encloses a write call with no idempotency token in scope",
        scope: RuleScope::PerFunction,
    },
];

pub fn catalog() -> &'static [CheckRule] {
    &CATALOG
}

pub fn catalog_entry(check: CheckId) -> Option<&'static CheckRule> {
    CATALOG.iter().find(|r| r.check == check)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("{0} is human-review-only and has no automated rule")]
    HumanReviewOnly(CheckId),
}

/// Rule evaluation bound to a lexicon set.
#[derive(Debug, Clone, Default)]
pub struct RuleEngine {
    pub lexicons: Lexicons,
}

impl RuleEngine {
    pub fn new(lexicons: Lexicons) -> Self {
        RuleEngine { lexicons }
    }

    /// Findings for one automated check, in (line, check) order.
    pub fn evaluate_check(&self, check: CheckId, model: &SyntaxModel) -> Result<Vec<Finding>, RuleError> {
        if !check.is_automated() {
            return Err(RuleError::HumanReviewOnly(check));
        }
        if model.mode == ParseMode::LexicalFallback && !check.runs_lexically() {
            return Ok(Vec::new());
        }
        let mut out = checks::evaluate(check, model, &self.lexicons);
        sort_findings(&mut out);
        Ok(out)
    }

    pub fn run_all_checks(&self, model: &SyntaxModel) -> Vec<Finding> {
        let mut all: Vec<Finding> = CheckId::automated()
            .flat_map(|c| self.evaluate_check(c, model).unwrap_or_default())
            .collect();
        sort_findings(&mut all);
        all
    }
}

/// Whether a model counts toward a check's coverage.
pub fn is_analyzable(check: CheckId, model: &SyntaxModel) -> bool {
    if !check.is_automated() {
        return false;
    }
    let full = model.mode == ParseMode::FullParse;
    match check {
        CheckId::C14 => full && model.file.is_test_like(),
        c if c.runs_lexically() => true,
        _ => full,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Profile {
    pub file: String,
    pub tag: String,
    pub checks: [CheckId; 2],
}

const PROFILES: [(CheckId, CheckId, &str); 3] = [
    (CheckId::C03, CheckId::C01, "failure concealment"),
    (CheckId::C04, CheckId::C09, "environment-shaped degraded assurance"),
    (CheckId::C02, CheckId::C10, "starts despite lost evidence guarantees"),
];

/// Advisory profile tags for check pairs co-occurring within a file.
pub fn cooccurrence_profiles(findings: &[Finding]) -> Vec<Profile> {
    let mut by_file: std::collections::BTreeMap<&str, std::collections::BTreeSet<CheckId>> = Default::default();
    for f in findings {
        by_file.entry(&f.file).or_default().insert(f.check);
    }
    let mut out = Vec::new();
    for (file, checks) in by_file {
        for (a, b, tag) in PROFILES {
            if checks.contains(&a) && checks.contains(&b) {
                out.push(Profile { file: file.to_string(), tag: tag.to_string(), checks: [a, b] });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_keys() {
        assert_eq!(CheckId::ALL.len(), 15);
        assert_eq!(CheckId::automated().count(), 13);
        assert_eq!("c03".parse::<CheckId>().unwrap(), CheckId::C03);
        assert_eq!("confidence_representation".parse::<CheckId>().unwrap(), CheckId::C13);
        assert!("C16".parse::<CheckId>().is_err());
        for c in CheckId::ALL {
            assert_eq!(CheckId::from_schema_key(c.schema_key()), Some(c));
        }
    }

    #[test]
    fn catalog_covers_automated_checks_once() {
        for c in CheckId::ALL {
            let n = catalog().iter().filter(|r| r.check == c).count();
            assert_eq!(n, usize::from(c.is_automated()), "{c}");
        }
    }

    #[test]
    fn profiles_need_both_members_in_one_file() {
        let f = |check, file: &str| Finding {
            check,
            severity: check.allowed_severities()[0],
            file: file.into(),
            line: 1,
            issue: String::new(),
            trigger: String::new(),
            source: FindingSource::Static,
        };
        assert!(cooccurrence_profiles(&[]).is_empty());
        assert!(cooccurrence_profiles(&[f(CheckId::C04, "a")]).is_empty());
        assert!(cooccurrence_profiles(&[f(CheckId::C03, "a"), f(CheckId::C01, "b")]).is_empty());
        let p = cooccurrence_profiles(&[f(CheckId::C03, "a"), f(CheckId::C01, "a")]);
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].tag, "failure concealment");
    }
}
