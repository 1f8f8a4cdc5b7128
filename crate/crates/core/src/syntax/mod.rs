//! Language-neutral structural view of a source file.
//!
//! [`parse_source`] runs a full tree-sitter grammar pass for the file's
//! language. When the grammar rejects the file (any error or missing node in
//! the tree) the file is re-read by a token-level scanner instead, which
//! recovers the same site kinds from keywords, brackets and indentation. The
//! model records which of the two produced it.

mod builder;
mod ecma;
mod expr;
mod lexical;
mod python;
mod tree;
pub mod walk;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageId {
    Python,
    Javascript,
    Typescript,
    JsxTsx,
    Unsupported,
}

impl LanguageId {
    pub const SUPPORTED: [LanguageId; 4] = [
        LanguageId::Python,
        LanguageId::Javascript,
        LanguageId::Typescript,
        LanguageId::JsxTsx,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LanguageId::Python => "python",
            LanguageId::Javascript => "javascript",
            LanguageId::Typescript => "typescript",
            LanguageId::JsxTsx => "jsx_tsx",
            LanguageId::Unsupported => "unsupported",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "python" => Some(LanguageId::Python),
            "javascript" => Some(LanguageId::Javascript),
            "typescript" => Some(LanguageId::Typescript),
            "jsx_tsx" => Some(LanguageId::JsxTsx),
            "unsupported" => Some(LanguageId::Unsupported),
            _ => None,
        }
    }

    pub fn is_supported(self) -> bool {
        self != LanguageId::Unsupported
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map a path to a language by its extension. Total; unknown is `Unsupported`.
pub fn detect_language(relative_path: &str) -> LanguageId {
    let name = relative_path.rsplit(['/', '\\']).next().unwrap_or(relative_path);
    let Some((_, ext)) = name.rsplit_once('.') else {
        return LanguageId::Unsupported;
    };
    match ext.to_ascii_lowercase().as_str() {
        "py" | "pyw" => LanguageId::Python,
        "js" | "mjs" | "cjs" => LanguageId::Javascript,
        "ts" | "mts" | "cts" => LanguageId::Typescript,
        "jsx" | "tsx" => LanguageId::JsxTsx,
        _ => LanguageId::Unsupported,
    }
}

/// Opaque stable identifier of a scanned file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FileId(pub String);

impl FileId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FileId {
    fn from(s: &str) -> Self {
        FileId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub file_id: FileId,
    pub relative_path: String,
    pub language: LanguageId,
    pub content: String,
    pub line_count: usize,
}

impl SourceFile {
    /// Build a file from decoded text. The id defaults to the path with `/` separators.
    pub fn new(relative_path: impl Into<String>, content: impl Into<String>) -> Self {
        let relative_path = relative_path.into().replace('\\', "/");
        let content = content.into();
        SourceFile {
            file_id: FileId(relative_path.clone()),
            language: detect_language(&relative_path),
            line_count: count_lines(&content),
            relative_path,
            content,
        }
    }

    /// Decode raw bytes as UTF-8, replacing invalid sequences.
    pub fn from_bytes(relative_path: impl Into<String>, bytes: &[u8]) -> Self {
        Self::new(relative_path, String::from_utf8_lossy(bytes).into_owned())
    }

    pub fn with_id(mut self, id: FileId) -> Self {
        self.file_id = id;
        self
    }

    /// Text of 1-based line `n`, without the terminator.
    pub fn line(&self, n: usize) -> Option<&str> {
        n.checked_sub(1).and_then(|i| self.content.lines().nth(i))
    }

    /// Test-file naming rule: a test directory segment, or `test_`, `.test.`,
    /// `.spec.` in the file name.
    pub fn is_test_like(&self) -> bool {
        is_test_path(&self.relative_path)
    }

    /// Startup naming rule for the file itself (`startup.py`, `bootstrap.ts`).
    pub fn is_startup_like(&self) -> bool {
        let name = self.relative_path.rsplit('/').next().unwrap_or("");
        let stem = name.split('.').next().unwrap_or("");
        crate::lexicon::split_words(stem)
            .iter()
            .any(|w| w == "startup" || w == "bootstrap")
    }
}

pub fn count_lines(content: &str) -> usize {
    content.lines().count()
}

pub fn is_test_path(path: &str) -> bool {
    let path = path.replace('\\', "/");
    let mut segments: Vec<&str> = path.split('/').collect();
    let name = segments.pop().unwrap_or("").to_ascii_lowercase();
    let dir_hit = segments.iter().any(|s| {
        matches!(s.to_ascii_lowercase().as_str(), "test" | "tests" | "__tests__" | "testing")
    });
    dir_hit || name.starts_with("test_") || name.contains(".test.") || name.contains(".spec.")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    FullParse,
    LexicalFallback,
}

impl ParseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseMode::FullParse => "full_parse",
            ParseMode::LexicalFallback => "lexical_fallback",
        }
    }
}

/// Half-open byte range into the file content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end: end.max(start) }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Containment that excludes the identical range.
    pub fn strictly_contains(&self, other: &Span) -> bool {
        self.contains(other) && self != other
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionUnit {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub span: Span,
    pub is_async: bool,
    pub decorators: Vec<String>,
    pub is_startup_like: bool,
    pub is_test_like: bool,
    pub parent: Option<usize>,
    pub handlers: Vec<usize>,
    pub returns: Vec<usize>,
    pub calls: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaughtBreadth {
    /// No exception type at all (`except:`, `catch {}`).
    Bare,
    /// Catches the root exception type, or everything (JavaScript `catch (e)`).
    Broad,
    Narrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Empty,
    LogOnly,
    ReturnsValue,
    Reraises,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandlerBlock {
    pub line: usize,
    pub end_line: usize,
    pub span: Span,
    pub body: Span,
    /// Byte range of the guarded `try` body.
    pub protected: Span,
    pub caught_breadth: CaughtBreadth,
    pub caught_types: Vec<String>,
    pub body_kind: BodyKind,
    pub returned_expression: Option<Expr>,
    pub logs: bool,
    /// Line of a top-level `name = <literal>` statement in the body.
    pub default_assignment: Option<usize>,
    pub function: Option<usize>,
}

impl HandlerBlock {
    pub fn is_broad(&self) -> bool {
        matches!(self.caught_breadth, CaughtBreadth::Bare | CaughtBreadth::Broad)
    }

    pub fn swallows(&self) -> bool {
        matches!(self.body_kind, BodyKind::Empty | BodyKind::LogOnly | BodyKind::ReturnsValue)
    }
}

/// How the value produced by a call is consumed at its creation site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum CallContext {
    /// Bare expression statement; the result is dropped.
    Statement,
    Awaited,
    Assigned(String),
    Argument,
    Returned,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallSite {
    pub line: usize,
    pub end_line: usize,
    pub span: Span,
    /// Callee text with argument lists elided, e.g. `expect().rejects.toThrow`.
    pub callee: String,
    /// Final segment of the callee.
    pub name: String,
    pub is_constructor: bool,
    pub context: CallContext,
    /// Methods invoked directly on the result (`.then`, `.start`, ...).
    pub chained: Vec<String>,
    pub args: Vec<Expr>,
    pub keywords: Vec<(String, Expr)>,
    /// Plain identifiers passed as arguments, including inside array literals.
    pub arg_idents: Vec<String>,
    pub function: Option<usize>,
    /// Innermost handler whose body contains the call.
    pub handler: Option<usize>,
    /// Handlers attached to the innermost `try` whose body contains the call.
    pub guarded_by: Vec<usize>,
}

impl CallSite {
    /// Callee receiver (everything before the final segment), if any.
    pub fn receiver(&self) -> Option<&str> {
        self.callee.rsplit_once('.').map(|(r, _)| r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub span: Span,
    pub calls: Vec<usize>,
    /// Ends in `return`, `continue` or `break`.
    pub exits_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSite {
    pub line: usize,
    pub end_line: usize,
    pub span: Span,
    /// Words of the identifiers and string literals in the condition.
    pub words: Vec<String>,
    pub negated: bool,
    pub then_branch: Branch,
    pub else_branch: Option<Branch>,
    pub function: Option<usize>,
}

impl ConditionSite {
    /// Negative or error-flavoured test (`not x`, `!res`, `err`, `x is None`).
    pub fn is_error_check(&self) -> bool {
        const ERROR_WORDS: &[&str] = &[
            "err", "error", "errors", "exc", "exception", "fail", "failed", "failure", "invalid",
            "none", "null", "undefined", "nil",
        ];
        self.negated || self.words.iter().any(|w| ERROR_WORDS.contains(&w.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSite {
    pub line: usize,
    pub span: Span,
    /// `None` for a bare `return`.
    pub value: Option<Expr>,
    pub function: Option<usize>,
    pub handler: Option<usize>,
    pub in_error_branch: bool,
}

impl ReturnSite {
    pub fn returns_null(&self) -> bool {
        self.value.as_ref().is_none_or(Expr::is_null)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSite {
    pub line: usize,
    pub end_line: usize,
    pub span: Span,
    pub words: Vec<String>,
    pub calls: Vec<usize>,
    pub function: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefaultKind {
    NullCoalescing,
    OrDefault,
    GetWithDefault,
    HandlerDefault,
}

impl DefaultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DefaultKind::NullCoalescing => "null_coalescing",
            DefaultKind::OrDefault => "or_default",
            DefaultKind::GetWithDefault => "get_with_default",
            DefaultKind::HandlerDefault => "handler_default",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultSite {
    pub line: usize,
    pub span: Span,
    pub kind: DefaultKind,
    pub function: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwaitSite {
    pub line: usize,
    pub span: Span,
    pub target: Option<String>,
    pub function: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub line: usize,
    pub end_line: usize,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntaxModel {
    pub file: Arc<SourceFile>,
    pub mode: ParseMode,
    pub functions: Vec<FunctionUnit>,
    pub handlers: Vec<HandlerBlock>,
    pub calls: Vec<CallSite>,
    pub conditionals: Vec<ConditionSite>,
    pub returns: Vec<ReturnSite>,
    pub loops: Vec<LoopSite>,
    pub defaults: Vec<DefaultSite>,
    pub awaits: Vec<AwaitSite>,
    pub tests: Vec<TestCase>,
}

impl SyntaxModel {
    pub fn function(&self, index: Option<usize>) -> Option<&FunctionUnit> {
        index.and_then(|i| self.functions.get(i))
    }

    /// Source text covered by `span`.
    pub fn text(&self, span: Span) -> &str {
        self.file.content.get(span.start..span.end).unwrap_or("")
    }

    /// Words of the enclosing function's text, or of the whole file at module level.
    pub fn scope_words(&self, function: Option<usize>) -> Vec<String> {
        let text = match self.function(function) {
            Some(f) => self.text(f.span),
            None => self.file.content.as_str(),
        };
        crate::lexicon::split_words(text)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{0}: unsupported language")]
    Unsupported(String),
    #[error("{0}: content is not text (NUL bytes present)")]
    UnreadableContent(String),
}

/// Build the structural model for one file. Never rejects parseable text:
/// grammar failures degrade to lexical extraction.
pub fn parse_source(file: Arc<SourceFile>) -> Result<SyntaxModel, ParseError> {
    if !file.language.is_supported() {
        return Err(ParseError::Unsupported(file.relative_path.clone()));
    }
    if file.content.contains('\0') {
        return Err(ParseError::UnreadableContent(file.relative_path.clone()));
    }
    let raw = match tree::extract(&file) {
        Some(raw) => (raw, ParseMode::FullParse),
        None => (lexical::extract(&file), ParseMode::LexicalFallback),
    };
    Ok(builder::build(file, raw.1, raw.0))
}

/// Lexical extraction regardless of grammar acceptance.
pub fn parse_lexical(file: Arc<SourceFile>) -> Result<SyntaxModel, ParseError> {
    if !file.language.is_supported() {
        return Err(ParseError::Unsupported(file.relative_path.clone()));
    }
    let raw = lexical::extract(&file);
    Ok(builder::build(file, ParseMode::LexicalFallback, raw))
}

/// A site selected by [`query_sites`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Site<'m> {
    Function(&'m FunctionUnit),
    Handler(&'m HandlerBlock),
    Call(&'m CallSite),
    Condition(&'m ConditionSite),
    Return(&'m ReturnSite),
}

impl Site<'_> {
    pub fn line(&self) -> usize {
        match self {
            Site::Function(s) => s.start_line,
            Site::Handler(s) => s.line,
            Site::Call(s) => s.line,
            Site::Condition(s) => s.line,
            Site::Return(s) => s.line,
        }
    }

    fn start(&self) -> usize {
        match self {
            Site::Function(s) => s.span.start,
            Site::Handler(s) => s.span.start,
            Site::Call(s) => s.span.start,
            Site::Condition(s) => s.span.start,
            Site::Return(s) => s.span.start,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteKind {
    Function,
    Handler,
    Call,
    Condition,
    Return,
}

/// Select sites of one kind matching `predicate`, in ascending line order.
pub fn query_sites<'m>(
    model: &'m SyntaxModel,
    kind: SiteKind,
    predicate: impl Fn(&Site<'m>) -> bool,
) -> Vec<Site<'m>> {
    let all: Vec<Site<'m>> = match kind {
        SiteKind::Function => model.functions.iter().map(Site::Function).collect(),
        SiteKind::Handler => model.handlers.iter().map(Site::Handler).collect(),
        SiteKind::Call => model.calls.iter().map(Site::Call).collect(),
        SiteKind::Condition => model.conditionals.iter().map(Site::Condition).collect(),
        SiteKind::Return => model.returns.iter().map(Site::Return).collect(),
    };
    let mut selected: Vec<Site<'m>> = all.into_iter().filter(|s| predicate(s)).collect();
    selected.sort_by_key(|s| (s.line(), s.start()));
    selected
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn language_by_extension() {
        assert_eq!(detect_language("a/b.py"), LanguageId::Python);
        assert_eq!(detect_language("src/x.tsx"), LanguageId::JsxTsx);
        assert_eq!(detect_language("src/x.jsx"), LanguageId::JsxTsx);
        assert_eq!(detect_language("lib/x.mjs"), LanguageId::Javascript);
        assert_eq!(detect_language("x.TS"), LanguageId::Typescript);
        assert_eq!(detect_language("README.md"), LanguageId::Unsupported);
        assert_eq!(detect_language("Makefile"), LanguageId::Unsupported);
        assert_eq!(detect_language("dir.py/file"), LanguageId::Unsupported);
    }

    #[test]
    fn line_counting() {
        assert_eq!(count_lines(""), 0);
        assert_eq!(count_lines("a"), 1);
        assert_eq!(count_lines("a\n"), 1);
        assert_eq!(count_lines("a\nb"), 2);
        assert_eq!(count_lines("a\r\nb\r\n"), 2);
        assert_eq!(count_lines("\n\n"), 2);
    }

    #[test]
    fn lossy_decoding_keeps_lines() {
        let f = SourceFile::from_bytes("x.py", b"a = 1\nb = '\xff\xfe'\nc = 3\n");
        assert_eq!(f.line_count, 3);
        assert_eq!(f.line(3), Some("c = 3"));
    }

    #[test]
    fn test_path_rule() {
        assert!(is_test_path("tests/foo.py"));
        assert!(is_test_path("pkg/test_foo.py"));
        assert!(is_test_path("src/a.test.ts"));
        assert!(is_test_path("src/a.spec.js"));
        assert!(is_test_path("src/__tests__/a.js"));
        assert!(!is_test_path("src/contest.py"));
        assert!(!is_test_path("src/latest/a.py"));
    }

    #[test]
    fn startup_file_rule() {
        assert!(SourceFile::new("app/startup.py", "").is_startup_like());
        assert!(SourceFile::new("bootstrap.ts", "").is_startup_like());
        assert!(!SourceFile::new("app/main.py", "").is_startup_like());
    }

    #[test]
    fn unsupported_and_binary_rejected() {
        let md = Arc::new(SourceFile::new("README.md", "# hi"));
        assert!(matches!(parse_source(md), Err(ParseError::Unsupported(_))));
        let bin = Arc::new(SourceFile::new("x.py", "a\0b"));
        assert!(matches!(parse_source(bin), Err(ParseError::UnreadableContent(_))));
    }
}
