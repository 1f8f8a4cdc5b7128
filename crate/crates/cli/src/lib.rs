//! Command-line surface for the truthscan scanner.
//!
//! Exit status: 0 when a command completes without HIGH findings, 2 when a
//! scan completes with at least one HIGH finding, 1 on any error.

mod compare_cmd;
mod corpus_cmd;
mod scan_cmd;

use std::ffi::OsString;
use std::io::Write;

use clap::{Parser, Subcommand, ValueEnum};

pub use compare_cmd::{CompareArgs, SuppressionArgs};
pub use corpus_cmd::CorpusCommand;
pub use scan_cmd::ScanArgs;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_HIGH: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "truthscan", version, about = "Audit source code for failure-untruthful patterns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan files or directories and emit an audit report.
    Scan(ScanArgs),
    /// Two-arm corpus analytics over line-delimited manifests.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Compare two audit reports, or two arm manifests.
    Compare(CompareArgs),
    /// Static-FAIL versus LLM-verdict suppression from paired reports.
    Suppression(SuppressionArgs),
}

/// Machine-readable or aligned-text output for analytics commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum TableFormat {
    #[default]
    Text,
    Json,
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = stderr.write_all(rendered.as_bytes());
                    EXIT_ERROR
                }
            };
        }
    };
    let result = match cli.command {
        Command::Scan(args) => scan_cmd::run(&args, stdout, stderr),
        Command::Corpus(cmd) => corpus_cmd::run(&cmd, stdout),
        Command::Compare(args) => compare_cmd::compare(&args, stdout),
        Command::Suppression(args) => compare_cmd::suppression(&args, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("truthscan").chain(args.iter().copied()))
    }

    #[test]
    fn scan_defaults() {
        let Command::Scan(a) = parse(&["scan", "src"]).unwrap().command else { panic!("not scan") };
        assert_eq!(a.mode, scan_cmd::ModeArg::Static);
        assert_eq!(a.format, scan_cmd::FormatArg::Schema12);
        assert_eq!(a.research_sink, std::path::PathBuf::from("research_aggregates.jsonl"));
        assert!(a.endpoint.is_none() && !a.quiet);
    }

    #[test]
    fn format_names() {
        assert!(parse(&["scan", "x", "--format", "schema-1.2"]).is_ok());
        assert!(parse(&["scan", "x", "--format", "json"]).is_ok());
        assert!(parse(&["scan", "x", "--format", "xml"]).is_err());
        assert!(parse(&["scan"]).is_err());
    }

    #[test]
    fn bootstrap_needs_one_reference() {
        assert!(parse(&["corpus", "bootstrap", "a.jsonl"]).is_err());
        assert!(parse(&["corpus", "bootstrap", "a.jsonl", "--reference", "b", "--reference-mean", "1"]).is_err());
        assert!(parse(&["corpus", "bootstrap", "a.jsonl", "--reference-mean", "0.2"]).is_ok());
    }

    #[test]
    fn errors_go_to_stderr_with_status_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["truthscan", "corpus", "compare", "/missing/a", "/missing/b"], &mut out, &mut err), EXIT_ERROR);
        assert!(out.is_empty());
        assert!(String::from_utf8(err).unwrap().starts_with("error: "));
    }
}
