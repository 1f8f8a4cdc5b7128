use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use truthscan::corpus::{
    apply_size_filter, band_label, bootstrap_repo_sensitivity, load_manifest, match_controls, records_from_scan,
    render_comparison, repo_means, round3, summarize_arm, write_manifest, Arm, Comparison, FileRecord, MatchSpec,
    DEFAULT_BAND_EDGES, DEFAULT_PARITY_BAND,
};
use truthscan::scan::{scan_path, ScanOptions, STUDY_SIZE_BOUNDS};
use truthscan::syntax::walk::WalkOptions;

use crate::{TableFormat, EXIT_OK};

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Per-arm totals and HIGH/file.
    Summarize(SummarizeArgs),
    /// Differential between two arm manifests.
    Compare(CorpusCompareArgs),
    /// Select matched controls for arm A from a candidate pool.
    Match(MatchArgs),
    /// Repo-balance sensitivity of arm A's HIGH/file.
    Bootstrap(BootstrapArgs),
    /// Scan a directory into manifest records.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Keep only records of 100 to 2000 lines.
    #[arg(long)]
    pub size_filter: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct CorpusCompareArgs {
    pub arm_a: PathBuf,
    pub arm_b: PathBuf,
    /// Relative difference labelled as parity.
    #[arg(long, default_value_t = DEFAULT_PARITY_BAND)]
    pub parity_band: f64,
    #[arg(long)]
    pub size_filter: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub arm_a: PathBuf,
    #[arg(long)]
    pub pool: PathBuf,
    /// Maximum selected files per repository.
    #[arg(long, default_value_t = 4)]
    pub cap: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Number of controls wanted (default: size of arm A).
    #[arg(long)]
    pub target: Option<usize>,
    /// Upper line bounds of the lower size bands, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BAND_EDGES)]
    pub band_edges: Vec<usize>,
    /// Write the selected records here as a manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Arm manifest whose repositories are resampled.
    pub arm_a: PathBuf,
    /// Reference arm manifest; its HIGH/file is the reference mean.
    #[arg(long, conflicts_with = "reference_mean", required_unless_present = "reference_mean")]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub reference_mean: Option<f64>,
    #[arg(long, default_value_t = 5000)]
    pub draws: usize,
    #[arg(long, default_value_t = 6)]
    pub draw_size: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub dir: PathBuf,
    /// `A_ai` or `B_human`.
    #[arg(long, value_parser = parse_arm)]
    pub arm: Arm,
    /// Repository id for every file (default: first path segment).
    #[arg(long)]
    pub repo_id: Option<String>,
    #[arg(long)]
    pub size_filter: bool,
    #[arg(long = "ignore", value_name = "GLOB")]
    pub ignores: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_arm(s: &str) -> Result<Arm, String> {
    Arm::parse(s).ok_or_else(|| format!("unknown arm `{s}` (expected A_ai or B_human)"))
}

fn load(path: &Path, size_filter: bool) -> Result<Vec<FileRecord>> {
    let records = load_manifest(path)?;
    Ok(if size_filter { apply_size_filter(records, STUDY_SIZE_BOUNDS).0 } else { records })
}

fn json(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn run(cmd: &CorpusCommand, stdout: &mut dyn Write) -> Result<i32> {
    let text = match cmd {
        CorpusCommand::Summarize(a) => summarize(a)?,
        CorpusCommand::Compare(a) => {
            let c = Comparison::build(&load(&a.arm_a, a.size_filter)?, &load(&a.arm_b, a.size_filter)?, a.parity_band)?;
            match a.format {
                TableFormat::Text => render_comparison(&c),
                TableFormat::Json => json(&c)?,
            }
        }
        CorpusCommand::Match(a) => matching(a)?,
        CorpusCommand::Bootstrap(a) => bootstrap(a)?,
        CorpusCommand::Ingest(a) => return ingest(a, stdout),
    };
    stdout.write_all(text.as_bytes())?;
    Ok(EXIT_OK)
}

fn summarize(a: &SummarizeArgs) -> Result<String> {
    let mut records = Vec::new();
    for m in &a.manifests {
        records.extend(load(m, a.size_filter)?);
    }
    let mut summaries = Vec::new();
    for arm in [Arm::AiAttributed, Arm::HumanControl] {
        let subset: Vec<FileRecord> = records.iter().filter(|r| r.arm == arm).cloned().collect();
        if !subset.is_empty() {
            summaries.push(summarize_arm(&subset)?);
        }
    }
    if summaries.is_empty() {
        bail!("no records in the given manifests");
    }
    if a.format == TableFormat::Json {
        return json(&summaries);
    }
    let mut out = String::new();
    writeln!(out, "{:<10}{:>7}{:>7}{:>8}{:>6}{:>7}{:>11}", "arm", "files", "high", "medium", "low", "repos", "HIGH/file")?;
    for s in &summaries {
        writeln!(
            out,
            "{:<10}{:>7}{:>7}{:>8}{:>6}{:>7}{:>11.3}",
            s.arm.as_str(),
            s.files,
            s.high,
            s.medium,
            s.low,
            s.repos,
            round3(s.high_per_file)
        )?;
    }
    Ok(out)
}

fn matching(a: &MatchArgs) -> Result<String> {
    let arm_a = load_manifest(&a.arm_a)?;
    let pool = load_manifest(&a.pool)?;
    let spec = MatchSpec { cap: a.cap, seed: a.seed, target: a.target, band_edges: a.band_edges.clone() };
    let result = match_controls(&pool, &arm_a, &spec)?;
    if let Some(path) = &a.out {
        let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
        let mut w = BufWriter::new(file);
        write_manifest(&result.selected, &mut w)?;
        w.flush()?;
    }
    if a.format == TableFormat::Json {
        return json(&result);
    }
    let mut out = String::new();
    writeln!(
        out,
        "selected {} of {} candidates (target {}, cap {}, seed {})",
        result.selected.len(),
        result.candidates,
        result.target,
        a.cap,
        a.seed
    )?;
    if result.gaps.is_empty() {
        writeln!(out, "all cells filled")?;
    } else {
        writeln!(out, "{:<12}{:>10}{:>8}{:>7}{:>10}{:>10}", "language", "band", "decile", "quota", "selected", "shortfall")?;
        for g in &result.gaps {
            writeln!(
                out,
                "{:<12}{:>10}{:>8}{:>7}{:>10}{:>10}",
                g.cell.language.as_str(),
                band_label(g.cell.band, &a.band_edges),
                g.cell.decile,
                g.quota,
                g.selected,
                g.shortfall
            )?;
        }
    }
    Ok(out)
}

fn bootstrap(a: &BootstrapArgs) -> Result<String> {
    let arm_a = load_manifest(&a.arm_a)?;
    let reference = match (&a.reference, a.reference_mean) {
        (_, Some(m)) => m,
        (Some(p), None) => summarize_arm(&load_manifest(p)?)?.high_per_file,
        (None, None) => bail!("give --reference or --reference-mean"),
    };
    let means: Vec<f64> = repo_means(&arm_a).into_iter().map(|(_, m)| m).collect();
    let r = bootstrap_repo_sensitivity(&means, reference, a.draws, a.draw_size, a.seed)?;
    if a.format == TableFormat::Json {
        return json(&r);
    }
    Ok(format!(
        "P = {:.3} ({} of {} draws of {} repos reached reference mean {:.3}; {} repos; seed {})\n",
        r.p,
        r.exceed,
        r.draws,
        r.draw_size,
        r.reference_mean,
        means.len(),
        r.seed
    ))
}

fn ingest(a: &IngestArgs, stdout: &mut dyn Write) -> Result<i32> {
    let opts = ScanOptions {
        walk: WalkOptions { extra_ignores: a.ignores.clone(), ..WalkOptions::default() },
        size_filter: a.size_filter.then_some(STUDY_SIZE_BOUNDS),
        ..ScanOptions::default()
    };
    let outcome = scan_path(&a.dir, &opts)?;
    let records = records_from_scan(&outcome, a.arm, a.repo_id.as_deref());
    match &a.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_manifest(&records, &mut w)?;
            w.flush()?;
        }
        None => write_manifest(&records, stdout)?,
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arm_names() {
        assert_eq!(parse_arm("A_ai"), Ok(Arm::AiAttributed));
        assert_eq!(parse_arm("human"), Ok(Arm::HumanControl));
        assert!(parse_arm("C").is_err());
    }
}
