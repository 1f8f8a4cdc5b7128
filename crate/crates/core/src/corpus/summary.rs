use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::Serialize;

use super::{Arm, CorpusError, FileRecord};
use crate::rules::{CheckId, Severity};
use crate::syntax::LanguageId;

/// Relative difference under which two arms are labelled parity.
pub const DEFAULT_PARITY_BAND: f64 = 0.10;

/// Round to three decimals, the precision rates are reported at.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: Arm,
    pub files: usize,
    pub high: usize,
    pub medium: usize,
    pub low: usize,
    pub high_per_file: f64,
    pub repos: usize,
}

pub fn summarize_arm(records: &[FileRecord]) -> Result<ArmSummary, CorpusError> {
    let first = records.first().ok_or(CorpusError::EmptyArm)?;
    if records.iter().any(|r| r.arm != first.arm) {
        return Err(CorpusError::MixedArms);
    }
    let count = |s: Severity| records.iter().map(|r| r.count(s)).sum::<usize>();
    let high = count(Severity::High);
    Ok(ArmSummary {
        arm: first.arm,
        files: records.len(),
        high,
        medium: count(Severity::Medium),
        low: count(Severity::Low),
        high_per_file: high as f64 / records.len() as f64,
        repos: records.iter().map(|r| r.repo_id.as_str()).collect::<BTreeSet<_>>().len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    /// Numerator positive over a zero denominator.
    Infinite,
    /// Both sides zero.
    Undefined,
}

impl Ratio {
    pub fn of(a: f64, b: f64) -> Ratio {
        if b > 0.0 {
            Ratio::Finite(a / b)
        } else if a > 0.0 {
            Ratio::Infinite
        } else {
            Ratio::Undefined
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Finite(v) => write!(f, "{v:.2}"),
            Ratio::Infinite => f.write_str("inf"),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AGreater,
    BGreater,
    Parity,
}

impl Direction {
    pub fn between(a: f64, b: f64, band: f64) -> Direction {
        let hi = a.max(b);
        if hi <= 0.0 || (a - b).abs() / hi <= band {
            Direction::Parity
        } else if a > b {
            Direction::AGreater
        } else {
            Direction::BGreater
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::AGreater => "AI > Human",
            Direction::BGreater => "Human > AI",
            Direction::Parity => "approx. parity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Differential {
    /// HIGH/file of each arm at reporting precision.
    pub a_rate: f64,
    pub b_rate: f64,
    /// Ratio of the reported rates.
    pub ratio: Ratio,
    /// Ratio of the unrounded rates.
    pub exact_ratio: Ratio,
    pub direction: Direction,
    pub delta_high: i64,
    pub delta_medium: i64,
    pub delta_low: i64,
}

pub fn compare_arms(a: &ArmSummary, b: &ArmSummary, parity_band: f64) -> Differential {
    let (a_rate, b_rate) = (round3(a.high_per_file), round3(b.high_per_file));
    Differential {
        a_rate,
        b_rate,
        ratio: Ratio::of(a_rate, b_rate),
        exact_ratio: Ratio::of(a.high_per_file, b.high_per_file),
        direction: Direction::between(a.high_per_file, b.high_per_file, parity_band),
        delta_high: a.high as i64 - b.high as i64,
        delta_medium: a.medium as i64 - b.medium as i64,
        delta_low: a.low as i64 - b.low as i64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageRow {
    pub language: LanguageId,
    pub a: Option<ArmSummary>,
    pub b: Option<ArmSummary>,
    /// Absent when the language appears in one arm only.
    pub differential: Option<Differential>,
    pub comparable: bool,
}

fn split_arms(records: &[FileRecord]) -> (Vec<FileRecord>, Vec<FileRecord>) {
    records.iter().cloned().partition(|r| r.arm == Arm::AiAttributed)
}

pub fn per_language_breakdown(records: &[FileRecord], parity_band: f64) -> Vec<LanguageRow> {
    let mut by_lang: BTreeMap<LanguageId, Vec<FileRecord>> = BTreeMap::new();
    for r in records {
        by_lang.entry(r.language).or_default().push(r.clone());
    }
    by_lang
        .into_iter()
        .map(|(language, recs)| {
            let (a, b) = split_arms(&recs);
            let a = summarize_arm(&a).ok();
            let b = summarize_arm(&b).ok();
            let differential = match (&a, &b) {
                (Some(a), Some(b)) => Some(compare_arms(a, b, parity_band)),
                _ => None,
            };
            LanguageRow { language, comparable: differential.is_some(), a, b, differential }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckRow {
    pub check: CheckId,
    pub a: usize,
    pub b: usize,
    pub direction: Direction,
}

/// Finding counts per automated check and arm.
pub fn per_check_breakdown(records: &[FileRecord], parity_band: f64) -> Vec<CheckRow> {
    CheckId::automated()
        .map(|check| {
            let count = |arm: Arm| {
                records
                    .iter()
                    .filter(|r| r.arm == arm)
                    .flat_map(|r| &r.findings)
                    .filter(|f| f.check == check)
                    .count()
            };
            let (a, b) = (count(Arm::AiAttributed), count(Arm::HumanControl));
            CheckRow { check, a, b, direction: Direction::between(a as f64, b as f64, parity_band) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub a: ArmSummary,
    pub b: ArmSummary,
    pub differential: Differential,
    pub parity_band: f64,
    pub languages: Vec<LanguageRow>,
    pub checks: Vec<CheckRow>,
}

impl Comparison {
    pub fn build(a: &[FileRecord], b: &[FileRecord], parity_band: f64) -> Result<Comparison, CorpusError> {
        let sa = summarize_arm(a)?;
        let sb = summarize_arm(b)?;
        let all: Vec<FileRecord> = a.iter().chain(b).cloned().collect();
        Ok(Comparison {
            differential: compare_arms(&sa, &sb, parity_band),
            languages: per_language_breakdown(&all, parity_band),
            checks: per_check_breakdown(&all, parity_band),
            a: sa,
            b: sb,
            parity_band,
        })
    }
}

fn rate(s: &Option<ArmSummary>) -> String {
    s.as_ref().map_or("-".to_string(), |s| format!("{:.3}", round3(s.high_per_file)))
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10}{:>7}{:>7}{:>8}{:>6}{:>7}{:>11}", "arm", "files", "high", "medium", "low", "repos", "HIGH/file");
    for s in [&c.a, &c.b] {
        let _ = writeln!(
            out,
            "{:<10}{:>7}{:>7}{:>8}{:>6}{:>7}{:>11.3}",
            s.arm.as_str(),
            s.files,
            s.high,
            s.medium,
            s.low,
            s.repos,
            round3(s.high_per_file)
        );
    }
    let d = &c.differential;
    let _ = writeln!(
        out,
        "ratio A/B: {} (unrounded {})  {}",
        d.ratio,
        d.exact_ratio.value().map_or(d.exact_ratio.to_string(), |v| format!("{v:.3}")),
        d.direction.label()
    );
    out.push('\n');
    let _ = writeln!(out, "{:<12}{:>10}{:>10}{:>8}  direction", "language", "A HIGH/f", "B HIGH/f", "ratio");
    for row in &c.languages {
        let (ratio, label) = match &row.differential {
            Some(d) => (d.ratio.to_string(), d.direction.label()),
            None => ("-".to_string(), "not comparable (single arm)"),
        };
        let _ = writeln!(out, "{:<12}{:>10}{:>10}{:>8}  {label}", row.language.as_str(), rate(&row.a), rate(&row.b), ratio);
    }
    out.push('\n');
    let _ = writeln!(out, "{:<30}{:>7}{:>7}  direction", "check", "A", "B");
    for row in &c.checks {
        let name = format!("{} {}", row.check.code(), row.check.schema_key());
        let _ = writeln!(out, "{:<30}{:>7}{:>7}  {}", name, row.a, row.b, row.direction.label());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::FindingTally;

    fn arm(arm: Arm, files: usize, highs: usize, lang: LanguageId) -> Vec<FileRecord> {
        (0..files)
            .map(|i| FileRecord {
                file_id: format!("{arm}-{lang}-{i}"),
                repo_id: format!("r{}", i % 7),
                language: lang,
                line_count: 200,
                arm,
                findings: if i < highs {
                    vec![FindingTally { check: CheckId::C01, severity: Severity::High }]
                } else {
                    vec![]
                },
            })
            .collect()
    }

    #[test]
    fn zero_findings_summary() {
        let s = summarize_arm(&arm(Arm::HumanControl, 10, 0, LanguageId::Python)).unwrap();
        assert_eq!((s.files, s.high, s.high_per_file, s.repos), (10, 0, 0.0, 7));
        assert!(matches!(summarize_arm(&[]), Err(CorpusError::EmptyArm)));
    }

    #[test]
    fn identical_arms_are_parity() {
        let a = summarize_arm(&arm(Arm::AiAttributed, 20, 5, LanguageId::Python)).unwrap();
        let b = summarize_arm(&arm(Arm::HumanControl, 20, 5, LanguageId::Python)).unwrap();
        let d = compare_arms(&a, &b, DEFAULT_PARITY_BAND);
        assert_eq!(d.ratio, Ratio::Finite(1.0));
        assert_eq!(d.direction, Direction::Parity);
    }

    #[test]
    fn zero_reference_rate_is_infinite() {
        let a = summarize_arm(&arm(Arm::AiAttributed, 4, 1, LanguageId::Python)).unwrap();
        let b = summarize_arm(&arm(Arm::HumanControl, 4, 0, LanguageId::Python)).unwrap();
        assert_eq!(compare_arms(&a, &b, 0.1).ratio, Ratio::Infinite);
        assert_eq!(compare_arms(&b, &b, 0.1).ratio, Ratio::Undefined);
    }

    #[test]
    fn single_arm_language_not_comparable() {
        let mut recs = arm(Arm::AiAttributed, 3, 1, LanguageId::Python);
        recs.extend(arm(Arm::HumanControl, 3, 1, LanguageId::Python));
        recs.extend(arm(Arm::AiAttributed, 2, 1, LanguageId::Typescript));
        let rows = per_language_breakdown(&recs, 0.1);
        assert!(rows[0].comparable);
        assert!(!rows[1].comparable);
        let checks = per_check_breakdown(&recs, 0.1);
        assert_eq!(checks.iter().map(|c| c.a + c.b).sum::<usize>(), 3);
    }

    #[test]
    fn parity_band_labels() {
        assert_eq!(Direction::between(33.0, 35.0, DEFAULT_PARITY_BAND), Direction::Parity);
        assert_eq!(Direction::between(263.0, 185.0, DEFAULT_PARITY_BAND), Direction::AGreater);
        assert_eq!(Direction::between(80.0, 96.0, DEFAULT_PARITY_BAND), Direction::BGreater);
        assert_eq!(Direction::between(0.0, 0.0, DEFAULT_PARITY_BAND), Direction::Parity);
    }
}
