//! Directory and in-memory scan orchestration.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::report::{aggregate_verdicts, AuditReport, Coverage, ScanMeta, ScanMode, ScanScope, SkippedFile};
use crate::rules::{cooccurrence_profiles, is_analyzable, sort_findings, CheckId, Finding, RuleEngine};
use crate::syntax::walk::{walk, WalkEntry, WalkOptions};
use crate::syntax::{parse_source, ParseError, ParseMode, SourceFile};

/// Inclusive line-count bounds of the study filter.
pub const STUDY_SIZE_BOUNDS: (usize, usize) = (100, 2000);

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("no scan targets given")]
    NoTargets,
    #[error(transparent)]
    Walk(#[from] crate::syntax::walk::WalkError),
}

#[derive(Debug, Clone, Default)]
pub struct ScanOptions {
    pub walk: WalkOptions,
    /// Inclusive line-count bounds; files outside are skipped.
    pub size_filter: Option<(usize, usize)>,
    pub engine: RuleEngine,
}

#[derive(Debug, Clone)]
pub struct FileAnalysis {
    pub source: Arc<SourceFile>,
    pub mode: ParseMode,
    pub findings: Vec<Finding>,
    pub coverage: Coverage,
}

#[derive(Debug, Clone, Default)]
pub struct ScanOutcome {
    pub scope: ScanScope,
    /// Analyzed files, sorted by file id.
    pub files: Vec<FileAnalysis>,
    pub skipped: Vec<SkippedFile>,
    pub excluded_unsupported: usize,
    pub ignored: usize,
}

impl ScanOutcome {
    /// All static findings in report order.
    pub fn findings(&self) -> Vec<Finding> {
        let mut all: Vec<Finding> = self.files.iter().flat_map(|f| f.findings.iter().cloned()).collect();
        sort_findings(&mut all);
        all
    }

    pub fn coverage(&self) -> Coverage {
        let mut c = Coverage::default();
        for f in &self.files {
            c.merge(&f.coverage);
        }
        c
    }

    /// Scan metadata without profiles or evaluator details.
    pub fn meta(&self, mode: ScanMode) -> ScanMeta {
        let mut meta = ScanMeta {
            scope: self.scope,
            mode,
            files_scanned: self.files.len(),
            excluded_unsupported: self.excluded_unsupported,
            skipped: self.skipped.clone(),
            ..ScanMeta::default()
        };
        for f in &self.files {
            *meta.languages.entry(f.source.language.as_str().to_string()).or_default() += 1;
            *meta.parse_modes.entry(f.mode.as_str().to_string()).or_default() += 1;
        }
        meta
    }

    pub fn static_report(&self) -> AuditReport {
        build_report(self.findings(), &self.coverage(), self.meta(ScanMode::Static))
    }
}

/// Sort findings, derive verdicts and attach co-occurrence profiles.
pub fn build_report(mut findings: Vec<Finding>, coverage: &Coverage, mut meta: ScanMeta) -> AuditReport {
    sort_findings(&mut findings);
    let verdicts = aggregate_verdicts(&findings, coverage);
    meta.profiles = cooccurrence_profiles(&findings);
    AuditReport::new(verdicts, findings, meta)
}

pub fn analyze(source: Arc<SourceFile>, engine: &RuleEngine) -> Result<FileAnalysis, ParseError> {
    let model = parse_source(Arc::clone(&source))?;
    let findings = engine.run_all_checks(&model);
    let mut coverage = Coverage::default();
    for check in CheckId::automated() {
        if is_analyzable(check, &model) {
            coverage.add(check, 1);
        }
    }
    Ok(FileAnalysis { source, mode: model.mode, findings, coverage })
}

fn within(bounds: Option<(usize, usize)>, lines: usize) -> bool {
    bounds.is_none_or(|(lo, hi)| (lo..=hi).contains(&lines))
}

enum Loaded {
    Analyzed(FileAnalysis),
    Skipped(SkippedFile),
}

fn load_and_analyze(entry: &WalkEntry, id: String, opts: &ScanOptions) -> Loaded {
    let skip = |reason: String| Loaded::Skipped(SkippedFile { file: id.clone(), reason });
    let bytes = match fs::read(&entry.path) {
        Ok(b) => b,
        Err(e) => return skip(format!("unreadable: {}", e.kind())),
    };
    if bytes.contains(&0) {
        return skip("not text: NUL bytes present".into());
    }
    let source = SourceFile::from_bytes(entry.relative.clone(), &bytes).with_id(id.as_str().into());
    if !within(opts.size_filter, source.line_count) {
        return skip(format!("outside size filter: {} lines", source.line_count));
    }
    match analyze(Arc::new(source), &opts.engine) {
        Ok(a) => Loaded::Analyzed(a),
        Err(e) => skip(e.to_string()),
    }
}

/// Scan one or more files or directories. With several targets, file ids
/// are prefixed by the target path to keep them distinct.
pub fn scan_paths(targets: &[PathBuf], opts: &ScanOptions) -> Result<ScanOutcome, ScanError> {
    if targets.is_empty() {
        return Err(ScanError::NoTargets);
    }
    let mut outcome = ScanOutcome {
        scope: if targets.len() == 1 && targets[0].is_file() { ScanScope::File } else { ScanScope::Directory },
        ..ScanOutcome::default()
    };
    let mut work = Vec::new();
    for target in targets {
        let walked = walk(target, &opts.walk)?;
        let prefix = (targets.len() > 1).then(|| display_prefix(target));
        let id_of = |rel: &str| match &prefix {
            Some(p) if target.is_file() => p.clone(),
            Some(p) => format!("{p}/{rel}"),
            None => rel.to_string(),
        };
        outcome.excluded_unsupported += walked.unsupported.len();
        outcome.ignored += walked.ignored;
        outcome
            .skipped
            .extend(walked.errors.into_iter().map(|e| SkippedFile { file: id_of(""), reason: e }));
        for entry in walked.files {
            let id = id_of(&entry.relative);
            work.push((entry, id));
        }
    }
    let loaded: Vec<Loaded> = work.par_iter().map(|(entry, id)| load_and_analyze(entry, id.clone(), opts)).collect();
    for item in loaded {
        match item {
            Loaded::Analyzed(a) => outcome.files.push(a),
            Loaded::Skipped(s) => outcome.skipped.push(s),
        }
    }
    outcome.files.sort_by(|a, b| a.source.file_id.0.cmp(&b.source.file_id.0));
    outcome.skipped.sort_by(|a, b| (&a.file, &a.reason).cmp(&(&b.file, &b.reason)));
    Ok(outcome)
}

pub fn scan_path(target: &Path, opts: &ScanOptions) -> Result<ScanOutcome, ScanError> {
    scan_paths(&[target.to_path_buf()], opts)
}

fn display_prefix(target: &Path) -> String {
    let s = target.to_string_lossy().replace('\\', "/");
    let s = s.trim_start_matches("./").trim_end_matches('/');
    if s.is_empty() { ".".to_string() } else { s.to_string() }
}

/// Scan in-memory sources; unsupported languages are counted and excluded.
pub fn scan_sources(sources: Vec<SourceFile>, opts: &ScanOptions) -> ScanOutcome {
    let mut outcome = ScanOutcome { scope: ScanScope::Directory, ..ScanOutcome::default() };
    let (supported, unsupported): (Vec<_>, Vec<_>) =
        sources.into_iter().partition(|s| s.language.is_supported());
    outcome.excluded_unsupported = unsupported.len();
    let results: Vec<Loaded> = supported
        .into_par_iter()
        .map(|s| {
            let id = s.file_id.0.clone();
            if !within(opts.size_filter, s.line_count) {
                let reason = format!("outside size filter: {} lines", s.line_count);
                return Loaded::Skipped(SkippedFile { file: id, reason });
            }
            match analyze(Arc::new(s), &opts.engine) {
                Ok(a) => Loaded::Analyzed(a),
                Err(e) => Loaded::Skipped(SkippedFile { file: id, reason: e.to_string() }),
            }
        })
        .collect();
    for item in results {
        match item {
            Loaded::Analyzed(a) => outcome.files.push(a),
            Loaded::Skipped(s) => outcome.skipped.push(s),
        }
    }
    outcome.files.sort_by(|a, b| a.source.file_id.0.cmp(&b.source.file_id.0));
    outcome.skipped.sort_by(|a, b| (&a.file, &a.reason).cmp(&(&b.file, &b.reason)));
    outcome
}
