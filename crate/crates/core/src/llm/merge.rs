use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::{request_llm_audit, Evaluator, DEFAULT_CONTEXT_BUDGET, CONTRACT_VERSION};
use crate::report::{AuditReport, Coverage, EvaluatorMeta, ScanMode, SkippedFile, Verdict, VerdictMap};
use crate::rules::{sort_findings, CheckId, Finding, FindingSource};
use crate::scan::{build_report, ScanOutcome};

/// Union of both lists, tagged by source. Static findings pass through untouched.
pub fn merge_hybrid(static_findings: &[Finding], llm_findings: &[Finding]) -> Vec<Finding> {
    let mut out: Vec<Finding> = static_findings
        .iter()
        .cloned()
        .map(|f| Finding { source: FindingSource::Static, ..f })
        .chain(llm_findings.iter().cloned().map(|f| Finding { source: FindingSource::Llm, ..f }))
        .collect();
    sort_findings(&mut out);
    out
}

#[derive(Debug, Clone, Copy)]
pub struct AugmentOptions {
    pub mode: ScanMode,
    /// Bytes of content per request before truncation.
    pub budget: usize,
    /// Concurrent evaluator requests.
    pub max_in_flight: usize,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions { mode: ScanMode::Hybrid, budget: DEFAULT_CONTEXT_BUDGET, max_in_flight: 4 }
    }
}

/// Build an `llm` or `hybrid` report over an existing static scan. Files the
/// evaluator fails on keep their static results.
pub fn run_augmented_scan(outcome: &ScanOutcome, evaluator: &dyn Evaluator, opts: &AugmentOptions) -> AuditReport {
    if opts.mode == ScanMode::Static {
        return outcome.static_report();
    }
    let checks: Vec<CheckId> = CheckId::automated().collect();
    let run = || {
        outcome
            .files
            .par_iter()
            .map(|f| request_llm_audit(&f.source, &checks, evaluator, opts.budget))
            .collect::<Vec<_>>()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(opts.max_in_flight.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };

    let mut meta = outcome.meta(opts.mode);
    let mut ev = EvaluatorMeta {
        contract: CONTRACT_VERSION.to_string(),
        endpoint: evaluator.describe(),
        requested: outcome.files.len(),
        ..EvaluatorMeta::default()
    };
    let mut llm_findings = Vec::new();
    let mut fallback_findings = Vec::new();
    let mut llm_coverage = Coverage::default();
    for (file, result) in outcome.files.iter().zip(results) {
        match result {
            Ok(audit) => {
                if audit.truncated {
                    ev.truncated.push(file.source.file_id.0.clone());
                }
                for check in CheckId::automated() {
                    if audit.verdicts.get(check) != Verdict::Unknown {
                        llm_coverage.add(check, 1);
                    }
                }
                llm_findings.extend(audit.findings);
            }
            Err(e) => {
                ev.failures.push(SkippedFile { file: file.source.file_id.0.clone(), reason: e.to_string() });
                fallback_findings.extend(file.findings.iter().cloned());
                llm_coverage.merge(&file.coverage);
            }
        }
    }
    meta.evaluator = Some(ev);
    match opts.mode {
        ScanMode::Hybrid => build_report(merge_hybrid(&outcome.findings(), &llm_findings), &outcome.coverage(), meta),
        _ => build_report(merge_hybrid(&fallback_findings, &llm_findings), &llm_coverage, meta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum SuppressionRate {
    Rate(f64),
    /// No static FAILs to suppress.
    NotApplicable,
}

impl fmt::Display for SuppressionRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SuppressionRate::Rate(r) => write!(f, "{:.0}%", r * 100.0),
            SuppressionRate::NotApplicable => f.write_str("n/a"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CheckSuppression {
    pub check: CheckId,
    pub static_verdict: Verdict,
    pub llm_verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuppressionReport {
    /// Rows by static verdict, columns by LLM verdict, both PASS/FAIL/UNKNOWN.
    pub matrix: [[usize; 3]; 3],
    pub static_fail: usize,
    pub suppressed: usize,
    pub both_fail: usize,
    pub llm_unknown: usize,
    pub rate: SuppressionRate,
    pub checks: Vec<CheckSuppression>,
}

fn slot(v: Verdict) -> usize {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 1,
        Verdict::Unknown => 2,
    }
}

fn finish(matrix: [[usize; 3]; 3], checks: Vec<CheckSuppression>) -> SuppressionReport {
    let row = matrix[slot(Verdict::Fail)];
    let static_fail: usize = row.iter().sum();
    let suppressed = row[slot(Verdict::Pass)];
    SuppressionReport {
        matrix,
        static_fail,
        suppressed,
        both_fail: row[slot(Verdict::Fail)],
        llm_unknown: row[slot(Verdict::Unknown)],
        rate: if static_fail == 0 {
            SuppressionRate::NotApplicable
        } else {
            SuppressionRate::Rate(suppressed as f64 / static_fail as f64)
        },
        checks,
    }
}

/// Static-FAIL versus LLM verdicts over the automated checks of one file or scan.
pub fn suppression_report(static_verdicts: &VerdictMap, llm_verdicts: &VerdictMap) -> SuppressionReport {
    let mut matrix = [[0; 3]; 3];
    let mut checks = Vec::new();
    for check in CheckId::automated() {
        let (s, l) = (static_verdicts.get(check), llm_verdicts.get(check));
        matrix[slot(s)][slot(l)] += 1;
        if s == Verdict::Fail {
            checks.push(CheckSuppression { check, static_verdict: s, llm_verdict: l });
        }
    }
    finish(matrix, checks)
}

/// Sum of several reports, e.g. one per file.
pub fn suppression_totals(reports: &[SuppressionReport]) -> SuppressionReport {
    let mut matrix = [[0; 3]; 3];
    for r in reports {
        for (i, row) in r.matrix.iter().enumerate() {
            for (j, n) in row.iter().enumerate() {
                matrix[i][j] += n;
            }
        }
    }
    finish(matrix, reports.iter().flat_map(|r| r.checks.iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::StubEvaluator;
    use crate::rules::Severity;
    use crate::scan::{scan_sources, ScanOptions};
    use crate::syntax::SourceFile;

    fn finding(check: CheckId, source: FindingSource) -> Finding {
        Finding {
            check,
            severity: Severity::Medium,
            file: "a.py".into(),
            line: 2,
            issue: "x".into(),
            trigger: "t".into(),
            source,
        }
    }

    #[test]
    fn merge_is_a_tagged_union() {
        let s = vec![finding(CheckId::C03, FindingSource::Static)];
        assert_eq!(merge_hybrid(&s, &[]), s);
        let l = vec![finding(CheckId::C13, FindingSource::Static)];
        let m = merge_hybrid(&[], &l);
        assert_eq!(m[0].source, FindingSource::Llm);
        assert_eq!(merge_hybrid(&s, &l).len(), 2);
    }

    #[test]
    fn suppression_rows() {
        let statics = VerdictMap::filled(Verdict::Fail);
        let mut llm = VerdictMap::all_pass();
        let r = suppression_report(&statics, &llm);
        assert_eq!((r.static_fail, r.suppressed, r.rate), (13, 13, SuppressionRate::Rate(1.0)));
        llm.set(CheckId::C01, Verdict::Unknown);
        llm.set(CheckId::C02, Verdict::Fail);
        let r = suppression_report(&statics, &llm);
        assert_eq!(r.suppressed + r.both_fail + r.llm_unknown, r.static_fail);
        let none = suppression_report(&VerdictMap::all_pass(), &llm);
        assert_eq!(none.rate, SuppressionRate::NotApplicable);
        assert_eq!(none.rate.to_string(), "n/a");
    }

    #[test]
    fn failing_evaluator_falls_back_to_static() {
        let out = scan_sources(
            vec![SourceFile::new("a.py", "try:\n    go()\nexcept:\n    pass\n")],
            &ScanOptions::default(),
        );
        let opts = AugmentOptions { mode: ScanMode::Llm, ..AugmentOptions::default() };
        let r = run_augmented_scan(&out, &StubEvaluator::Fail("down".into()), &opts);
        assert_eq!(r.findings, out.findings());
        assert_eq!(r.scan_meta.evaluator.as_ref().unwrap().failures.len(), 1);
        let r = run_augmented_scan(&out, &StubEvaluator::AllPass, &opts);
        assert!(r.findings.is_empty());
        assert_eq!(r.verdicts.get(CheckId::C03), Verdict::Pass);
    }
}
