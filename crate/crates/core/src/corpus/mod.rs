//! Two-arm corpus comparison: manifests, summaries, matching and bootstrap.

mod bootstrap;
mod matching;
mod summary;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{CheckId, Finding, Severity};
use crate::scan::ScanOutcome;
use crate::syntax::LanguageId;

pub use bootstrap::{bootstrap_repo_sensitivity, repo_means, BootstrapResult};
pub use matching::{
    assign_cells, band_label, match_controls, priority_order, CellGap, CellKey, MatchResult, MatchSpec, DEFAULT_BAND_EDGES,
};
pub use summary::{
    compare_arms, per_check_breakdown, per_language_breakdown, render_comparison, round3, summarize_arm,
    ArmSummary, CheckRow, Comparison, Differential, Direction, LanguageRow, Ratio, DEFAULT_PARITY_BAND,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    #[serde(rename = "A_ai")]
    AiAttributed,
    #[serde(rename = "B_human")]
    HumanControl,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::AiAttributed => "A_ai",
            Arm::HumanControl => "B_human",
        }
    }

    pub fn parse(s: &str) -> Option<Arm> {
        match s {
            "A_ai" | "A" | "ai" => Some(Arm::AiAttributed),
            "B_human" | "B" | "human" => Some(Arm::HumanControl),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Check and severity of one finding, as stored in manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FindingTally {
    pub check: CheckId,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub file_id: String,
    pub repo_id: String,
    pub language: LanguageId,
    pub line_count: usize,
    pub arm: Arm,
    #[serde(default)]
    pub findings: Vec<FindingTally>,
}

impl FileRecord {
    pub fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record { path: String, line: usize, message: String },
    #[error("arm is empty; HIGH/file is undefined")]
    EmptyArm,
    #[error("records span more than one arm")]
    MixedArms,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("reference arm is empty")]
    EmptyReference,
    #[error("per-repo cap must be at least 1")]
    InvalidCap,
    #[error("draw size {draw_size} exceeds the {repos} available repos")]
    DrawTooLarge { draw_size: usize, repos: usize },
    #[error("invalid bootstrap parameters: {0}")]
    Bootstrap(String),
}

/// Read a line-delimited manifest; blank lines are ignored.
pub fn load_manifest(path: &Path) -> Result<Vec<FileRecord>, CorpusError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io { path: display.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io { path: display.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Record {
            path: display.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(records: &[FileRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Keep records within inclusive line bounds; returns the kept records and the excluded count.
pub fn apply_size_filter(records: Vec<FileRecord>, bounds: (usize, usize)) -> (Vec<FileRecord>, usize) {
    let before = records.len();
    let kept: Vec<FileRecord> = records.into_iter().filter(|r| (bounds.0..=bounds.1).contains(&r.line_count)).collect();
    let excluded = before - kept.len();
    (kept, excluded)
}

/// Turn analyzed files into manifest records. The repo id is `repo_id` when
/// given, else the first path segment of each file id.
pub fn records_from_scan(outcome: &ScanOutcome, arm: Arm, repo_id: Option<&str>) -> Vec<FileRecord> {
    outcome
        .files
        .iter()
        .map(|f| {
            let id = f.source.file_id.0.clone();
            let repo = match repo_id {
                Some(r) => r.to_string(),
                None => id.split('/').next().unwrap_or("").to_string(),
            };
            FileRecord {
                repo_id: repo,
                language: f.source.language,
                line_count: f.source.line_count,
                arm,
                findings: f.findings.iter().map(tally).collect(),
                file_id: id,
            }
        })
        .collect()
}

fn tally(f: &Finding) -> FindingTally {
    FindingTally { check: f.check, severity: f.severity }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_filter() {
        let rec = FileRecord {
            file_id: "f1".into(),
            repo_id: "r1".into(),
            language: LanguageId::Python,
            line_count: 150,
            arm: Arm::AiAttributed,
            findings: vec![FindingTally { check: CheckId::C03, severity: Severity::High }],
        };
        let mut buf = Vec::new();
        write_manifest(std::slice::from_ref(&rec), &mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert!(line.contains("\"arm\":\"A_ai\"") && line.contains("\"check\":\"C03\""));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, format!("{line}\n")).unwrap();
        assert_eq!(load_manifest(&p).unwrap(), vec![rec.clone()]);

        let small = FileRecord { line_count: 99, ..rec.clone() };
        let (kept, excluded) = apply_size_filter(vec![rec, small], (100, 2000));
        assert_eq!((kept.len(), excluded), (1, 1));
    }

    #[test]
    fn bad_record_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.jsonl");
        std::fs::write(&p, "\n{\"file_id\": 1}\n").unwrap();
        assert!(matches!(load_manifest(&p), Err(CorpusError::Record { line: 2, .. })));
    }
}
