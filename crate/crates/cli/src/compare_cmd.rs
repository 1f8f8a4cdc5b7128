use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde::Serialize;
use truthscan::corpus::{load_manifest, render_comparison, round3, Comparison, Ratio, DEFAULT_PARITY_BAND};
use truthscan::llm::{suppression_report, suppression_totals, SuppressionReport};
use truthscan::report::{parse_report, AuditReport, Verdict};
use truthscan::rules::{CheckId, Severity};

use crate::{TableFormat, EXIT_OK};

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Audit report (YAML or JSON) or arm manifest for side A.
    pub left: PathBuf,
    /// Audit report or arm manifest for side B.
    pub right: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PARITY_BAND)]
    pub parity_band: f64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct SuppressionArgs {
    /// Alternating static and LLM report paths: STATIC LLM [STATIC LLM ...].
    #[arg(required = true, num_args = 2..)]
    pub reports: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

fn read_report(path: &Path) -> Result<AuditReport> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_report(&text).with_context(|| format!("{} is not a valid audit report", path.display()))
}

#[derive(Serialize)]
struct ReportSide {
    files: usize,
    high: usize,
    high_per_file: Option<f64>,
}

#[derive(Serialize)]
struct VerdictChange {
    check: CheckId,
    left: Verdict,
    right: Verdict,
}

#[derive(Serialize)]
struct ReportComparison {
    left: ReportSide,
    right: ReportSide,
    ratio: Ratio,
    changes: Vec<VerdictChange>,
}

fn side(r: &AuditReport) -> ReportSide {
    let high = r.findings.iter().filter(|f| f.severity == Severity::High).count();
    let files = r.scan_meta.files_scanned;
    ReportSide { files, high, high_per_file: (files > 0).then(|| high as f64 / files as f64) }
}

pub fn compare(args: &CompareArgs, stdout: &mut dyn Write) -> Result<i32> {
    let text = match (read_report(&args.left), read_report(&args.right)) {
        (Ok(l), Ok(r)) => compare_reports(&l, &r, args.format)?,
        (report_l, report_r) => {
            let manifests = load_manifest(&args.left).and_then(|a| Ok((a, load_manifest(&args.right)?)));
            let (a, b) = manifests.map_err(|e| {
                let report_err = report_l.err().or(report_r.err()).map_or(String::new(), |e| format!("{e:#}"));
                anyhow!("inputs are neither two audit reports ({report_err}) nor two manifests ({e})")
            })?;
            let c = Comparison::build(&a, &b, args.parity_band)?;
            match args.format {
                TableFormat::Text => render_comparison(&c),
                TableFormat::Json => serde_json::to_string_pretty(&c)? + "\n",
            }
        }
    };
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn compare_reports(l: &AuditReport, r: &AuditReport, format: TableFormat) -> Result<String> {
    let (ls, rs) = (side(l), side(r));
    let ratio = match (ls.high_per_file, rs.high_per_file) {
        (Some(a), Some(b)) => Ratio::of(round3(a), round3(b)),
        _ => Ratio::Undefined,
    };
    let changes: Vec<VerdictChange> = l
        .verdicts
        .iter()
        .zip(r.verdicts.iter())
        .filter(|((_, a), (_, b))| a != b)
        .map(|((check, left), (_, right))| VerdictChange { check, left, right })
        .collect();
    let cmp = ReportComparison { left: ls, right: rs, ratio, changes };
    if format == TableFormat::Json {
        return Ok(serde_json::to_string_pretty(&cmp)? + "\n");
    }
    let mut out = String::new();
    let rate = |s: &ReportSide| s.high_per_file.map_or("-".to_string(), |v| format!("{:.3}", round3(v)));
    writeln!(out, "{:<6}{:>7}{:>7}{:>11}", "side", "files", "high", "HIGH/file")?;
    writeln!(out, "{:<6}{:>7}{:>7}{:>11}", "left", cmp.left.files, cmp.left.high, rate(&cmp.left))?;
    writeln!(out, "{:<6}{:>7}{:>7}{:>11}", "right", cmp.right.files, cmp.right.high, rate(&cmp.right))?;
    writeln!(out, "ratio left/right: {}", cmp.ratio)?;
    if cmp.changes.is_empty() {
        writeln!(out, "verdicts identical")?;
    } else {
        for c in &cmp.changes {
            writeln!(out, "{} {:<28}{} -> {}", c.check.code(), c.check.schema_key(), c.left, c.right)?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct SuppressionDoc {
    pairs: Vec<SuppressionReport>,
    total: SuppressionReport,
}

pub fn suppression(args: &SuppressionArgs, stdout: &mut dyn Write) -> Result<i32> {
    if !args.reports.len().is_multiple_of(2) {
        bail!("expected STATIC LLM report pairs, got {} paths", args.reports.len());
    }
    let mut pairs = Vec::new();
    let mut labels = Vec::new();
    for pair in args.reports.chunks(2) {
        let (s, l) = (read_report(&pair[0])?, read_report(&pair[1])?);
        pairs.push(suppression_report(&s.verdicts, &l.verdicts));
        labels.push(pair[0].display().to_string());
    }
    let total = suppression_totals(&pairs);
    let text = if args.format == TableFormat::Json {
        serde_json::to_string_pretty(&SuppressionDoc { pairs, total })? + "\n"
    } else {
        let mut out = String::new();
        writeln!(out, "{:<32}{:>8}{:>12}{:>11}{:>9}{:>8}", "static report", "static", "suppressed", "both FAIL", "unknown", "rate")?;
        let row = |out: &mut String, name: &str, r: &SuppressionReport| {
            writeln!(
                out,
                "{:<32}{:>8}{:>12}{:>11}{:>9}{:>8}",
                name, r.static_fail, r.suppressed, r.both_fail, r.llm_unknown, r.rate.to_string()
            )
        };
        for (name, r) in labels.iter().zip(&pairs) {
            row(&mut out, name, r)?;
        }
        if pairs.len() > 1 {
            row(&mut out, "total", &total)?;
        }
        out
    };
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}
