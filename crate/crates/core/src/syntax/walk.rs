//! Source discovery with glob-based exclusions.

use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use thiserror::Error;
use walkdir::WalkDir;

use super::{detect_language, LanguageId};

/// Vendored, generated and tooling paths skipped unless disabled.
pub const DEFAULT_IGNORES: &[&str] = &[
    "**/node_modules/**",
    "**/vendor/**",
    "**/third_party/**",
    "**/dist/**",
    "**/build/**",
    "**/.git/**",
    "**/__pycache__/**",
    "**/venv/**",
    "**/.venv/**",
    "**/*.min.js",
    "**/*_pb2.py",
    "**/*.generated.*",
    "**/*.gen.*",
];

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("path does not exist: {0}")]
    Missing(PathBuf),
    #[error("invalid ignore pattern `{pattern}`: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: globset::Error,
    },
}

#[derive(Debug, Clone)]
pub struct WalkOptions {
    pub extra_ignores: Vec<String>,
    pub default_ignores: bool,
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions { extra_ignores: Vec::new(), default_ignores: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkEntry {
    pub path: PathBuf,
    /// Forward-slash path relative to the walk root.
    pub relative: String,
    pub language: LanguageId,
}

#[derive(Debug, Default, Clone)]
pub struct WalkResult {
    /// Supported sources, sorted by relative path.
    pub files: Vec<WalkEntry>,
    /// Relative paths of files in languages without an analyzer.
    pub unsupported: Vec<String>,
    /// Files removed by ignore patterns.
    pub ignored: usize,
    /// Entries the walker could not read.
    pub errors: Vec<String>,
}

fn pattern_set(opts: &WalkOptions) -> Result<GlobSet, WalkError> {
    let mut builder = GlobSetBuilder::new();
    let defaults = if opts.default_ignores { DEFAULT_IGNORES } else { &[] };
    let extra = opts.extra_ignores.iter().map(|p| {
        if p.contains('/') {
            p.trim_start_matches("./").to_string()
        } else {
            format!("**/{p}")
        }
    });
    for pattern in defaults.iter().map(|p| p.to_string()).chain(extra) {
        let glob = Glob::new(&pattern).map_err(|source| WalkError::Pattern { pattern: pattern.clone(), source })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| WalkError::Pattern { pattern: "<set>".into(), source })
}

/// Enumerate files under `root` (or `root` itself when it is a file).
pub fn walk(root: &Path, opts: &WalkOptions) -> Result<WalkResult, WalkError> {
    if !root.exists() {
        return Err(WalkError::Missing(root.to_path_buf()));
    }
    let ignores = pattern_set(opts)?;
    let mut result = WalkResult::default();
    if root.is_file() {
        let relative = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        classify(root.to_path_buf(), relative, &ignores, &mut result);
        return Ok(result);
    }
    let relative_of = |p: &Path| {
        p.strip_prefix(root)
            .unwrap_or(p)
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect::<Vec<_>>()
            .join("/")
    };
    let walker = WalkDir::new(root)
        .follow_links(false)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| {
            e.depth() == 0 || !e.file_type().is_dir() || !ignores.is_match(format!("{}/_", relative_of(e.path())))
        });
    for entry in walker {
        match entry {
            Ok(e) if e.file_type().is_file() => {
                let relative = relative_of(e.path());
                classify(e.into_path(), relative, &ignores, &mut result);
            }
            Ok(_) => {}
            Err(err) => result.errors.push(err.to_string()),
        }
    }
    result.files.sort_by(|a, b| a.relative.cmp(&b.relative));
    result.unsupported.sort();
    Ok(result)
}

fn classify(path: PathBuf, relative: String, ignores: &GlobSet, result: &mut WalkResult) {
    if ignores.is_match(&relative) {
        result.ignored += 1;
        return;
    }
    match detect_language(&relative) {
        LanguageId::Unsupported => result.unsupported.push(relative),
        language => result.files.push(WalkEntry { path, relative, language }),
    }
}
