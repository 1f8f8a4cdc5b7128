use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use truthscan::lexicon::Lexicons;
use truthscan::llm::{build_evaluator, run_augmented_scan, AugmentOptions, NetworkPolicy, DEFAULT_CONTEXT_BUDGET};
use truthscan::report::{emit_report, render_summary, OutputFormat, ScanMode};
use truthscan::research::{build_aggregate, write_jsonl};
use truthscan::rules::RuleEngine;
use truthscan::scan::{scan_paths, ScanOptions, STUDY_SIZE_BOUNDS};
use truthscan::syntax::walk::WalkOptions;

use crate::{EXIT_HIGH, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Static,
    Llm,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    #[value(name = "schema-1.2")]
    Schema12,
    Json,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Files or directories to scan.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "static")]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value = "schema-1.2")]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads for file analysis (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Extra ignore glob; patterns without `/` match at any depth.
    #[arg(long = "ignore", value_name = "GLOB")]
    pub ignores: Vec<String>,
    /// Do not skip vendored, minified and generated paths.
    #[arg(long)]
    pub no_default_ignores: bool,
    /// Only scan files of 100 to 2000 lines.
    #[arg(long)]
    pub size_filter: bool,
    /// TOML file of lexicon overrides.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Evaluator endpoint for llm/hybrid: `stub:pass`, `stub:fail`, or an http(s) base address.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to an HTTP endpoint.
    #[arg(long)]
    pub model: Option<String>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Bytes of file content per evaluator request before truncation.
    #[arg(long)]
    pub context_budget: Option<usize>,
    /// Concurrent evaluator requests.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Append an aggregate-only record of this scan to the research sink.
    #[arg(long)]
    pub submit_research_aggregate: bool,
    #[arg(long, value_name = "FILE", default_value = "research_aggregates.jsonl")]
    pub research_sink: PathBuf,
    /// Free-text note stored with the research record (privacy-checked).
    #[arg(long)]
    pub research_note: Option<String>,
    /// Suppress the human-readable summary on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

impl ScanArgs {
    fn endpoint_settings_given(&self) -> bool {
        self.endpoint.is_some()
            || self.model.is_some()
            || self.timeout.is_some()
            || self.context_budget.is_some()
            || self.max_in_flight.is_some()
    }
}

pub fn run(args: &ScanArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let mode = match args.mode {
        ModeArg::Static => ScanMode::Static,
        ModeArg::Llm => ScanMode::Llm,
        ModeArg::Hybrid => ScanMode::Hybrid,
    };
    if mode == ScanMode::Static && args.endpoint_settings_given() {
        bail!("endpoint settings require --mode llm or --mode hybrid");
    }
    if mode != ScanMode::Static && args.endpoint.is_none() {
        bail!("--mode {} requires --endpoint", mode.as_str());
    }
    let policy = if mode == ScanMode::Static { NetworkPolicy::Denied } else { NetworkPolicy::Allowed };
    let evaluator = match &args.endpoint {
        Some(e) => Some(build_evaluator(
            e,
            args.model.as_deref().unwrap_or("llama3"),
            Duration::from_secs(args.timeout.unwrap_or(120)),
            policy,
        )?),
        None => None,
    };

    let lexicons = match &args.lexicon {
        Some(p) => Lexicons::from_override_file(p)?,
        None => Lexicons::default(),
    };
    let opts = ScanOptions {
        walk: WalkOptions { extra_ignores: args.ignores.clone(), default_ignores: !args.no_default_ignores },
        size_filter: args.size_filter.then_some(STUDY_SIZE_BOUNDS),
        engine: RuleEngine::new(lexicons),
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().context("cannot start worker pool")?;
    let outcome = pool.install(|| scan_paths(&args.paths, &opts))?;

    let report = match &evaluator {
        Some(ev) => {
            let aug = AugmentOptions {
                mode,
                budget: args.context_budget.unwrap_or(DEFAULT_CONTEXT_BUDGET),
                max_in_flight: args.max_in_flight.unwrap_or(4),
            };
            run_augmented_scan(&outcome, ev.as_ref(), &aug)
        }
        None => outcome.static_report(),
    };

    let format = match args.format {
        FormatArg::Schema12 => OutputFormat::Schema12,
        FormatArg::Json => OutputFormat::Json,
    };
    let doc = emit_report(&report, format);
    match &args.output {
        Some(p) => fs::write(p, &doc).with_context(|| format!("cannot write {}", p.display()))?,
        None => stdout.write_all(doc.as_bytes())?,
    }
    if !args.quiet {
        stderr.write_all(render_summary(&report).as_bytes())?;
    }

    if args.submit_research_aggregate {
        let mut submission = build_aggregate(&report);
        submission.note = args.research_note.clone();
        let written = write_jsonl(std::slice::from_ref(&submission), &args.research_sink)?;
        if let Some((_, violations)) = written.rejected.first() {
            let fields: Vec<String> = violations.iter().map(|v| format!("{} ({:?})", v.field, v.kind)).collect();
            bail!("research aggregate refused by privacy validation: {}", fields.join(", "));
        }
        if !args.quiet {
            writeln!(stderr, "research aggregate appended to {}", args.research_sink.display())?;
        }
    }
    Ok(if report.has_high() { EXIT_HIGH } else { EXIT_OK })
}
