//! Token-level extraction for files the grammars reject.
//!
//! Python indentation is turned into virtual braces so both language families
//! share one block matcher. Only the facts needed by the lexical check set are
//! recovered: functions, try/handler blocks, calls, conditionals, loops and
//! returns.

use super::builder::*;
use super::expr::{text_words, Expr};
use super::python::is_log_callee;
use super::tree::callee_text;
use super::{CallContext, CaughtBreadth, LanguageId, SourceFile, Span};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum K {
    Ident,
    Num,
    Str,
    Punct,
    Open,
    Close,
    LBrace,
    RBrace,
    Sep,
}

#[derive(Clone, Copy, Debug)]
struct Tok {
    k: K,
    start: usize,
    end: usize,
    /// First token on its physical line (brace languages only).
    nl: bool,
}

struct RawTok {
    k: K,
    start: usize,
    end: usize,
    line_start: bool,
    indent: usize,
}

const OPS3: &[&str] = &["===", "!==", "**=", "...", ">>=", "<<=", "??=", "||=", "&&=", ">>>", "//="];
const OPS2: &[&str] = &[
    "=>", "==", "!=", "<=", ">=", "?.", "??", "||", "&&", "**", "->", ":=", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "//", "<<", ">>", "++", "--",
];
const PY_HEADERS: &[&str] =
    &["def", "class", "if", "elif", "else", "for", "while", "try", "except", "finally", "with", "async"];
/// Keywords that cannot continue a bracketed expression; seeing one at the
/// start of a line closes any brackets left open by a syntax error.
const PY_STATEMENT_STARTS: &[&str] = &[
    "def", "class", "try", "except", "finally", "while", "with", "elif", "return", "raise", "pass", "import",
    "continue", "break",
];
const NOT_CALLEES: &[&str] = &[
    "if", "elif", "else", "while", "for", "switch", "catch", "return", "with", "except", "not", "and", "or",
    "in", "is", "typeof", "instanceof", "void", "delete", "function", "def", "class", "lambda", "assert",
    "yield", "del", "import", "from", "raise", "throw", "new", "await", "async", "as", "case", "do",
];
const METHOD_MODIFIERS: &[&str] =
    &["async", "static", "get", "set", "public", "private", "protected", "readonly", "override", "*"];

fn scan(src: &str, python: bool) -> Vec<RawTok> {
    let bytes = src.as_bytes();
    let mut out: Vec<RawTok> = Vec::new();
    let mut pos = 0;
    let mut line_start = true;
    let mut line_begin = 0;
    if src.starts_with("#!") {
        pos = src.find('\n').unwrap_or(src.len());
    }
    while pos < bytes.len() {
        let c = src[pos..].chars().next().unwrap_or(' ');
        let b = bytes[pos];
        if b == b'\n' {
            pos += 1;
            line_start = true;
            line_begin = pos;
            continue;
        }
        if b == b'\\' && python && src[pos + 1..].starts_with('\n') {
            pos += 2;
            continue;
        }
        if b == b'\\' && python && src[pos + 1..].starts_with("\r\n") {
            pos += 3;
            continue;
        }
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        if python && b == b'#' {
            pos = src[pos..].find('\n').map_or(bytes.len(), |n| pos + n);
            continue;
        }
        if !python && src[pos..].starts_with("//") {
            pos = src[pos..].find('\n').map_or(bytes.len(), |n| pos + n);
            continue;
        }
        if !python && src[pos..].starts_with("/*") {
            pos = src[pos + 2..].find("*/").map_or(bytes.len(), |n| pos + n + 4);
            continue;
        }
        let start = pos;
        let k;
        if b == b'"' || b == b'\'' || (!python && b == b'`') {
            pos = string_end(src, pos, python);
            k = K::Str;
        } else if c.is_alphabetic() || c == '_' || c == '$' || (!python && c == '#') {
            pos += c.len_utf8();
            while let Some(n) = src[pos..].chars().next() {
                if n.is_alphanumeric() || n == '_' || n == '$' {
                    pos += n.len_utf8();
                } else {
                    break;
                }
            }
            let word = &src[start..pos];
            let is_prefix = python
                && word.len() <= 2
                && word.chars().all(|ch| "rbufRBUF".contains(ch))
                && matches!(bytes.get(pos), Some(b'"') | Some(b'\''));
            if is_prefix {
                pos = string_end(src, pos, python);
                k = K::Str;
            } else {
                k = K::Ident;
            }
        } else if b.is_ascii_digit() || (b == b'.' && bytes.get(pos + 1).is_some_and(u8::is_ascii_digit)) {
            pos += 1;
            while pos < bytes.len() {
                let n = bytes[pos];
                let exponent_sign =
                    (n == b'+' || n == b'-') && matches!(bytes[pos - 1], b'e' | b'E') && !src[start..pos].starts_with("0x");
                if !(exponent_sign || n.is_ascii_alphanumeric() || n == b'.' || n == b'_') {
                    break;
                }
                pos += 1;
            }
            k = K::Num;
        } else if matches!(b, b'(' | b'[') || (python && b == b'{') {
            pos += 1;
            k = K::Open;
        } else if matches!(b, b')' | b']') || (python && b == b'}') {
            pos += 1;
            k = K::Close;
        } else if b == b'{' {
            pos += 1;
            k = K::LBrace;
        } else if b == b'}' {
            pos += 1;
            k = K::RBrace;
        } else if b == b';' {
            pos += 1;
            k = K::Sep;
        } else if !python && b == b'/' && regex_allowed(src, &out) {
            pos = regex_end(src, pos);
            k = K::Str;
        } else {
            let rest = &src[pos..];
            let len = OPS3
                .iter()
                .chain(OPS2)
                .find(|op| rest.starts_with(**op))
                .map_or(c.len_utf8(), |op| op.len());
            pos += len;
            k = K::Punct;
        }
        let indent = if line_start {
            src[line_begin..start]
                .chars()
                .map(|ch| if ch == '\t' { 8 } else { 1 })
                .sum()
        } else {
            0
        };
        out.push(RawTok { k, start, end: pos, line_start, indent });
        line_start = false;
    }
    out
}

fn string_end(src: &str, start: usize, python: bool) -> usize {
    let bytes = src.as_bytes();
    let quote = bytes[start];
    let fence = [quote; 3];
    let triple = python && bytes[start..].starts_with(&fence);
    let mut pos = start + if triple { 3 } else { 1 };
    let mut template_depth = 0usize;
    while pos < bytes.len() {
        let b = bytes[pos];
        if b == b'\\' {
            pos += 2;
            continue;
        }
        if quote == b'`' {
            if bytes[pos..].starts_with(b"${") {
                template_depth += 1;
                pos += 2;
                continue;
            }
            if b == b'}' && template_depth > 0 {
                template_depth -= 1;
            } else if b == b'`' && template_depth == 0 {
                return pos + 1;
            }
        } else if triple {
            if bytes[pos..].starts_with(&fence) {
                return pos + 3;
            }
        } else if b == quote {
            return pos + 1;
        } else if b == b'\n' {
            return pos;
        }
        pos += 1;
    }
    bytes.len().min(pos)
}

fn regex_allowed(src: &str, prev: &[RawTok]) -> bool {
    match prev.last() {
        None => true,
        Some(t) => match t.k {
            K::Ident => matches!(&src[t.start..t.end], "return" | "typeof" | "case" | "in" | "of"),
            K::Num | K::Str | K::Close | K::RBrace => false,
            _ => true,
        },
    }
}

fn regex_end(src: &str, start: usize) -> usize {
    let bytes = src.as_bytes();
    let mut pos = start + 1;
    let mut in_class = false;
    while pos < bytes.len() {
        match bytes[pos] {
            b'\\' => pos += 1,
            b'[' => in_class = true,
            b']' => in_class = false,
            b'/' if !in_class => {
                pos += 1;
                while pos < bytes.len() && bytes[pos].is_ascii_alphabetic() {
                    pos += 1;
                }
                return pos;
            }
            b'\n' => return start + 1,
            _ => {}
        }
        pos += 1;
    }
    start + 1
}

/// Python: logical lines become `Sep`-terminated, indented suites become
/// zero-width braces.
fn python_blocks(src: &str, raw: Vec<RawTok>) -> Vec<Tok> {
    let text = |t: &RawTok| &src[t.start..t.end];
    let mut out: Vec<Tok> = Vec::with_capacity(raw.len() * 2);
    let virt = |k: K, at: usize| Tok { k, start: at, end: at, nl: false };
    let mut indents = vec![0usize];
    let mut depth = 0i32;
    let mut header_line = false;
    let mut colon_seen = false;
    let mut pending_block = false;
    let mut inline_opens = 0;
    let mut last_end = 0;
    for rt in &raw {
        let top = *indents.last().unwrap_or(&0);
        let is_header = PY_HEADERS.contains(&text(rt));
        let new_logical = rt.line_start
            && (depth == 0 || PY_STATEMENT_STARTS.contains(&text(rt)) || (is_header && rt.indent <= top));
        if new_logical && !out.is_empty() {
            depth = 0;
            // A header's suite opens without a separator so the header stays
            // adjacent to its brace.
            if !(pending_block && rt.indent > top) {
                out.push(virt(K::Sep, last_end));
            }
            for _ in 0..inline_opens {
                out.push(virt(K::RBrace, last_end));
            }
            inline_opens = 0;
            if pending_block && rt.indent > top {
                indents.push(rt.indent);
                out.push(virt(K::LBrace, rt.start));
            } else {
                while indents.len() > 1 && rt.indent < *indents.last().unwrap_or(&0) {
                    indents.pop();
                    out.push(virt(K::RBrace, last_end));
                }
            }
            pending_block = false;
            colon_seen = false;
        }
        if new_logical || out.is_empty() {
            header_line = is_header;
        }
        match rt.k {
            K::Open => depth += 1,
            K::Close => depth = (depth - 1).max(0),
            _ => {}
        }
        if pending_block {
            out.push(virt(K::LBrace, rt.start));
            inline_opens += 1;
            pending_block = false;
        }
        out.push(Tok { k: rt.k, start: rt.start, end: rt.end, nl: false });
        if header_line && !colon_seen && depth == 0 && text(rt) == ":" {
            colon_seen = true;
            pending_block = true;
        }
        last_end = rt.end;
    }
    if !out.is_empty() {
        out.push(virt(K::Sep, last_end));
    }
    for _ in 0..inline_opens {
        out.push(virt(K::RBrace, last_end));
    }
    for _ in 1..indents.len() {
        out.push(virt(K::RBrace, last_end));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Function { name: String, name_tok: Option<usize>, start: usize, is_async: bool },
    Try,
    Handler { breadth: CaughtBreadth, types: Vec<String> },
    Finally,
    If { words: Vec<String>, negated: bool, elif: bool },
    Else,
    Loop,
    Other,
}

#[derive(Debug)]
struct Block {
    kind: Kind,
    header: usize,
    open: usize,
    close: usize,
    next: Option<usize>,
}

struct Lex<'a> {
    src: &'a str,
    toks: Vec<Tok>,
    mate: Vec<usize>,
    python: bool,
}

impl<'a> Lex<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| &self.src[t.start..t.end])
    }

    fn text_at(&self, i: Option<usize>) -> &'a str {
        i.map_or("", |i| self.text(i))
    }

    fn range_text(&self, lo: usize, hi: usize) -> &'a str {
        if lo >= hi || hi > self.toks.len() {
            return "";
        }
        &self.src[self.toks[lo].start..self.toks[hi - 1].end.max(self.toks[lo].start)]
    }

    fn span(&self, lo: usize, hi_incl: usize) -> Span {
        Span::new(self.toks[lo].start, self.toks[hi_incl].end.max(self.toks[lo].start))
    }

    fn compute_mates(&mut self) {
        let n = self.toks.len();
        let mut mate: Vec<usize> = (0..n).collect();
        let mut parens: Vec<usize> = Vec::new();
        let mut braces: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            match self.toks[i].k {
                K::Open => parens.push(i),
                K::Close => {
                    if let Some(o) = parens.pop() {
                        mate[o] = i;
                        mate[i] = o;
                    }
                }
                K::LBrace => braces.push((i, parens.len())),
                K::RBrace => {
                    if let Some((o, mark)) = braces.pop() {
                        parens.truncate(mark);
                        mate[o] = i;
                        mate[i] = o;
                    }
                }
                _ => {}
            }
        }
        for (o, _) in braces {
            mate[o] = n - 1;
        }
        self.mate = mate;
    }

    /// First token of the statement ending at `from`.
    fn stmt_start(&self, from: usize) -> usize {
        let mut start = from + 1;
        let mut i = from as isize;
        while i >= 0 {
            let mut j = i as usize;
            match self.toks[j].k {
                K::Sep | K::LBrace | K::RBrace | K::Open => break,
                K::Close if self.mate[j] < j => j = self.mate[j],
                K::Close => break,
                _ => {}
            }
            start = j;
            if self.toks[j].nl {
                break;
            }
            i = j as isize - 1;
        }
        start
    }

    /// Exclusive end of the statement containing token `from`.
    fn stmt_end(&self, from: usize, limit: usize) -> usize {
        let mut i = from + 1;
        while i < limit {
            let t = self.toks[i];
            match t.k {
                K::Sep | K::RBrace => return i,
                _ if t.nl => return i,
                K::Open | K::LBrace if self.mate[i] > i => i = self.mate[i] + 1,
                _ => i += 1,
            }
        }
        limit.min(self.toks.len())
    }

    /// Top-level statements in `[lo, hi)` as token ranges.
    fn statements(&self, lo: usize, hi: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut cur: Option<usize> = None;
        let mut i = lo;
        while i < hi {
            let t = self.toks[i];
            if t.k == K::Sep {
                if let Some(s) = cur.take() {
                    out.push((s, i));
                }
                i += 1;
                continue;
            }
            if t.nl {
                if let Some(s) = cur.take() {
                    out.push((s, i));
                }
            }
            let s = *cur.get_or_insert(i);
            if matches!(t.k, K::Open | K::LBrace) && self.mate[i] > i {
                i = self.mate[i].min(hi - 1) + 1;
                if t.k == K::LBrace {
                    out.push((s, i));
                    cur = None;
                }
                continue;
            }
            i += 1;
        }
        if let Some(s) = cur {
            out.push((s, hi));
        }
        out
    }

    fn classify(&self, b: usize) -> (Kind, usize) {
        if b == 0 {
            return (Kind::Other, b);
        }
        if self.python {
            self.classify_python(b)
        } else {
            self.classify_brace(b)
        }
    }

    fn classify_python(&self, b: usize) -> (Kind, usize) {
        let hs = self.stmt_start(b - 1);
        if hs >= b {
            return (Kind::Other, b);
        }
        let colon = if self.text(b - 1) == ":" { b - 1 } else { b };
        let first = self.text(hs);
        let kind = match first {
            "def" => Kind::Function {
                name: self.text(hs + 1).to_string(),
                name_tok: Some(hs + 1),
                start: hs,
                is_async: false,
            },
            "async" if self.text(hs + 1) == "def" => Kind::Function {
                name: self.text(hs + 2).to_string(),
                name_tok: Some(hs + 2),
                start: hs,
                is_async: true,
            },
            "try" => Kind::Try,
            "finally" => Kind::Finally,
            "else" => Kind::Else,
            "except" => {
                let mut lo = hs + 1;
                if self.text(lo) == "*" {
                    lo += 1;
                }
                let hi = (lo..colon).find(|&i| self.text(i) == "as").unwrap_or(colon);
                let types: Vec<String> = self
                    .range_text(lo, hi)
                    .trim_matches(|c| c == '(' || c == ')' || char::is_whitespace(c))
                    .split(',')
                    .map(|t| t.trim().to_string())
                    .filter(|t| !t.is_empty())
                    .collect();
                let breadth = if lo >= hi {
                    CaughtBreadth::Bare
                } else if (lo..hi).any(|i| matches!(self.text(i), "Exception" | "BaseException")) {
                    CaughtBreadth::Broad
                } else {
                    CaughtBreadth::Narrow
                };
                Kind::Handler { breadth, types }
            }
            "if" | "elif" => Kind::If {
                words: condition_words(self.range_text(hs + 1, colon)),
                negated: self.text(hs + 1) == "not",
                elif: first == "elif",
            },
            "for" | "while" => Kind::Loop,
            "async" if self.text(hs + 1) == "for" => Kind::Loop,
            _ => Kind::Other,
        };
        (kind, hs)
    }

    fn classify_brace(&self, b: usize) -> (Kind, usize) {
        let p = b - 1;
        let hs = self.stmt_start(p);
        let t = self.text(p);
        match t {
            "=>" => return (self.arrow(p), hs),
            "try" => return (Kind::Try, hs),
            "finally" => return (Kind::Finally, hs),
            "else" => return (Kind::Else, hs),
            "do" => return (Kind::Loop, hs),
            "catch" => return (Kind::Handler { breadth: CaughtBreadth::Bare, types: Vec::new() }, hs),
            _ => {}
        }
        // Skip a return type annotation: `f(): Promise<T> {`.
        let close = (hs..=p)
            .rev()
            .take(16)
            .find(|&i| self.toks[i].k == K::Close && (i == p || self.text(i + 1) == ":"));
        let Some(close) = close else {
            return (Kind::Other, hs);
        };
        let m = self.mate[close];
        if m >= close || m == 0 {
            return (Kind::Other, hs);
        }
        let q = m - 1;
        let kind = match self.text(q) {
            "catch" => Kind::Handler { breadth: CaughtBreadth::Broad, types: Vec::new() },
            "if" => Kind::If {
                words: condition_words(self.range_text(m + 1, close)),
                negated: self.text(m + 1) == "!",
                elif: q > 0 && self.text(q - 1) == "else",
            },
            "for" | "while" => Kind::Loop,
            "await" if q > 0 && self.text(q - 1) == "for" => Kind::Loop,
            "switch" | "with" => Kind::Other,
            "function" => {
                let (name, start, is_async) = self.context_name(q);
                Kind::Function { name, name_tok: None, start, is_async }
            }
            _ if self.toks[q].k == K::Ident && !NOT_CALLEES.contains(&self.text(q)) => {
                let before = q.checked_sub(1);
                let before_fn = before.is_some_and(|x| self.text(x) == "function")
                    || (before.is_some_and(|x| self.text(x) == "*")
                        && q >= 2
                        && self.text(q - 2) == "function");
                if before_fn {
                    let fn_tok = if self.text(q - 1) == "function" { q - 1 } else { q - 2 };
                    let is_async = fn_tok > 0 && self.text(fn_tok - 1) == "async";
                    Kind::Function {
                        name: self.text(q).to_string(),
                        name_tok: Some(q),
                        start: if is_async { fn_tok - 1 } else { fn_tok },
                        is_async,
                    }
                } else if self.toks[q].nl
                    || before.is_none_or(|x| {
                        matches!(self.toks[x].k, K::Sep | K::LBrace | K::RBrace)
                            || METHOD_MODIFIERS.contains(&self.text(x))
                    })
                {
                    let mut start = q;
                    while start > 0 && METHOD_MODIFIERS.contains(&self.text(start - 1)) && !self.toks[start].nl {
                        start -= 1;
                    }
                    let is_async = (start..q).any(|i| self.text(i) == "async");
                    Kind::Function { name: self.text(q).to_string(), name_tok: Some(q), start, is_async }
                } else {
                    Kind::Other
                }
            }
            _ => Kind::Other,
        };
        (kind, hs)
    }

    fn arrow(&self, arrow: usize) -> Kind {
        let Some(mut q) = arrow.checked_sub(1) else {
            return Kind::Other;
        };
        if self.toks[q].k == K::Close && self.mate[q] < q {
            q = self.mate[q];
        } else if self.toks[q].k != K::Ident {
            return Kind::Other;
        }
        let (name, start, is_async) = self.context_name(q);
        Kind::Function { name, name_tok: None, start, is_async }
    }

    /// Name bound to an anonymous function starting at token `q`.
    fn context_name(&self, q: usize) -> (String, usize, bool) {
        let mut start = q;
        let is_async = q > 0 && self.text(q - 1) == "async";
        if is_async {
            start = q - 1;
        }
        let name = match start.checked_sub(1) {
            Some(p) if matches!(self.text(p), "=" | ":") && p > 0 && self.toks[p - 1].k == K::Ident => {
                self.text(p - 1).to_string()
            }
            _ => "<anonymous>".to_string(),
        };
        (name, start, is_async)
    }

    fn blocks(&self) -> Vec<Block> {
        let mut blocks: Vec<Block> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut last_closed: Vec<Option<usize>> = vec![None];
        for i in 0..self.toks.len() {
            match self.toks[i].k {
                K::LBrace => {
                    let (kind, header) = self.classify(i);
                    let depth = stack.len();
                    let prev = match kind {
                        Kind::Handler { .. } | Kind::Finally | Kind::Else | Kind::If { elif: true, .. } => {
                            last_closed[depth].filter(|&p| header > 0 && blocks[p].close == header - 1)
                        }
                        _ => None,
                    };
                    if let Some(p) = prev {
                        blocks[p].next = Some(blocks.len());
                    }
                    stack.push(blocks.len());
                    blocks.push(Block { kind, header, open: i, close: self.mate[i], next: None });
                    if last_closed.len() <= stack.len() {
                        last_closed.push(None);
                    }
                    last_closed[stack.len()] = None;
                }
                K::RBrace => {
                    if let Some(idx) = stack.pop() {
                        blocks[idx].close = i;
                        last_closed[stack.len()] = Some(idx);
                    }
                }
                _ => {}
            }
        }
        blocks
    }

    fn simple_expr(&self, lo: usize, hi: usize) -> Option<Expr> {
        if lo >= hi {
            return None;
        }
        if hi - lo == 1 {
            let t = self.toks[lo];
            let text = self.text(lo);
            return Some(match (t.k, text) {
                (K::Ident, "None" | "null" | "undefined") => Expr::Null,
                (K::Ident, "True" | "true") => Expr::Bool(true),
                (K::Ident, "False" | "false") => Expr::Bool(false),
                (K::Ident, _) => Expr::Ident(text.to_string()),
                (K::Num, _) => Expr::Number(text.to_string()),
                (K::Str, _) => Expr::Str(
                    text.trim_start_matches(|c: char| c.is_ascii_alphabetic())
                        .trim_matches(|c| c == '"' || c == '\'' || c == '`')
                        .to_string(),
                ),
                _ => Expr::Other(text_words(text)),
            });
        }
        if hi - lo == 2 && self.toks[lo].k == K::Open && self.mate[lo] == lo + 1 {
            return Some(if self.text(lo) == "[" { Expr::Array(Vec::new()) } else { Expr::Object(Vec::new()) });
        }
        if hi - lo == 2 && self.toks[lo].k == K::LBrace && self.mate[lo] == lo + 1 {
            return Some(Expr::Object(Vec::new()));
        }
        Some(Expr::Other(text_words(self.range_text(lo, hi))))
    }

    fn statement(&self, lo: usize, hi: usize) -> Stmt {
        let mut lo = lo;
        if self.text(lo) == "await" {
            lo += 1;
        }
        if lo >= hi {
            return Stmt::NoOp;
        }
        let first = self.text(lo);
        match first {
            "pass" | "continue" | "break" | "..." => return Stmt::NoOp,
            "raise" | "throw" => return Stmt::Raise,
            "return" => return Stmt::Return(self.simple_expr(lo + 1, hi)),
            _ => {}
        }
        if hi - lo == 1 && self.toks[lo].k == K::Str {
            return Stmt::NoOp;
        }
        if let Some(o) = (lo..hi).find(|&i| self.toks[i].k == K::Open) {
            let chain = (lo..o).all(|i| matches!(self.toks[i].k, K::Ident) || matches!(self.text(i), "." | "?."));
            if chain && o > lo && self.mate[o] + 1 == hi && is_log_callee(&callee_text(self.range_text(lo, o))) {
                return Stmt::Log;
            }
        }
        if let Some(eq) = (lo..hi).find(|&i| self.text(i) == "=") {
            if let Some(e) = self.simple_expr(eq + 1, hi) {
                if e.is_literal() {
                    return Stmt::DefaultAssign(self.toks[lo].start);
                }
            }
        }
        Stmt::Other
    }

    fn skip_nested_functions(&self, lo: usize, hi: usize, fn_opens: &[bool]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = lo;
        while i < hi {
            if fn_opens[i] && self.mate[i] > i {
                i = self.mate[i] + 1;
                continue;
            }
            out.push(i);
            i += 1;
        }
        out
    }

    fn call_args(&self, open: usize) -> (Vec<Expr>, Vec<(String, Expr)>, Vec<String>) {
        let close = self.mate[open];
        let mut args = Vec::new();
        let mut keywords = Vec::new();
        let mut idents = Vec::new();
        if close <= open {
            return (args, keywords, idents);
        }
        let mut lo = open + 1;
        let mut i = lo;
        while i <= close {
            let at_end = i == close || (self.text(i) == "," && self.toks[i].k == K::Punct);
            if at_end {
                if lo < i {
                    if i - lo == 1 && self.toks[lo].k == K::Ident {
                        idents.push(self.text(lo).to_string());
                    }
                    if i - lo >= 3 && self.toks[lo].k == K::Ident && self.text(lo + 1) == "=" {
                        if let Some(e) = self.simple_expr(lo + 2, i) {
                            keywords.push((self.text(lo).to_string(), e));
                        }
                    } else if let Some(e) = self.simple_expr(lo, i) {
                        args.push(e);
                    }
                }
                lo = i + 1;
                i += 1;
                continue;
            }
            if matches!(self.toks[i].k, K::Open | K::LBrace) && self.mate[i] > i {
                i = self.mate[i];
                continue;
            }
            i += 1;
        }
        // Object-literal properties anywhere in the arguments.
        for j in open + 1..close {
            if self.toks[j].k == K::Ident
                && self.text(j + 1) == ":"
                && j + 2 < close
                && matches!(self.text(j - 1), "{" | ",")
            {
                let end = (j + 2..close)
                    .find(|&x| matches!(self.text(x), "," | "}") || self.toks[x].k == K::RBrace)
                    .unwrap_or(close);
                if let Some(e) = self.simple_expr(j + 2, end) {
                    keywords.push((self.text(j).to_string(), e));
                }
            }
        }
        (args, keywords, idents)
    }
}

pub(super) fn extract(file: &SourceFile) -> RawModel {
    let python = file.language == LanguageId::Python;
    let src = file.content.as_str();
    let scanned = scan(src, python);
    let toks = if python {
        python_blocks(src, scanned)
    } else {
        scanned
            .into_iter()
            .map(|t| Tok { k: t.k, start: t.start, end: t.end, nl: t.line_start })
            .collect()
    };
    let mut raw = RawModel::default();
    if toks.is_empty() {
        return raw;
    }
    let mut lex = Lex { src, toks, mate: Vec::new(), python };
    lex.compute_mates();
    let blocks = lex.blocks();
    let n = lex.toks.len();

    let mut fn_opens = vec![false; n];
    let mut fn_names = vec![false; n];
    for b in &blocks {
        if let Kind::Function { name_tok, .. } = &b.kind {
            fn_opens[b.open] = true;
            if let Some(t) = name_tok {
                fn_names[*t] = true;
            }
        }
    }
    let block_span = |b: &Block, from: usize| lex.span(from, b.close.min(n - 1));
    let last_stmt_exits = |b: &Block| {
        lex.statements(b.open + 1, b.close.min(n))
            .last()
            .is_some_and(|(s, _)| matches!(lex.text(*s), "return" | "continue" | "break"))
    };

    for b in &blocks {
        match &b.kind {
            Kind::Function { name, start, is_async, .. } => {
                raw.functions.push(RawFunction {
                    name: name.clone(),
                    span: block_span(b, *start),
                    decorators: decorators(&lex, *start),
                    is_async: *is_async,
                });
            }
            Kind::Try => {
                let mut handlers = Vec::new();
                let mut next = b.next;
                while let Some(h) = next.map(|i| &blocks[i]) {
                    let Kind::Handler { breadth, types } = &h.kind else {
                        break;
                    };
                    let body_lo = h.open + 1;
                    let body_hi = h.close.min(n);
                    let stmts = lex
                        .statements(body_lo, body_hi)
                        .into_iter()
                        .map(|(s, e)| lex.statement(s, e))
                        .collect();
                    let visible = lex.skip_nested_functions(body_lo, body_hi, &fn_opens);
                    let deep_raise = visible.iter().any(|&i| matches!(lex.text(i), "raise" | "throw"));
                    let deep_return = visible
                        .iter()
                        .filter(|&&i| lex.text(i) == "return")
                        .find_map(|&i| lex.simple_expr(i + 1, lex.stmt_end(i, body_hi)));
                    handlers.push(RawHandler {
                        span: block_span(h, h.header),
                        body: block_span(h, h.open),
                        breadth: *breadth,
                        caught_types: types.clone(),
                        stmts,
                        deep_raise,
                        deep_return,
                    });
                    next = h.next;
                }
                raw.tries.push(RawTry { body: block_span(b, b.open), handlers });
            }
            Kind::If { words, negated, .. } => {
                let mut alts = Vec::new();
                let mut next = b.next;
                while let Some(a) = next.map(|i| &blocks[i]) {
                    if !matches!(a.kind, Kind::Else | Kind::If { elif: true, .. }) {
                        break;
                    }
                    alts.push(a);
                    next = a.next;
                }
                let else_span = match (alts.first(), alts.last()) {
                    (Some(f), Some(l)) => Some(Span::new(lex.toks[f.header].start, block_span(l, l.header).end)),
                    _ => None,
                };
                let end = else_span.map_or(block_span(b, b.header).end, |s| s.end);
                raw.conditions.push(RawCondition {
                    span: Span::new(lex.toks[b.header].start, end),
                    words: words.clone(),
                    negated: *negated,
                    then_span: block_span(b, b.open),
                    then_exits: last_stmt_exits(b),
                    else_span,
                    else_exits: alts.len() == 1 && alts[0].kind == Kind::Else && last_stmt_exits(alts[0]),
                });
            }
            Kind::Loop => raw.loops.push(RawLoop { span: block_span(b, b.header) }),
            _ => {}
        }
    }

    for i in 1..n {
        let t = lex.toks[i];
        if t.k == K::Ident && t.start < t.end && lex.text(i) == "return" {
            let end = lex.stmt_end(i, n);
            let last = end.saturating_sub(1).max(i);
            raw.returns.push(RawReturn { span: lex.span(i, last), value: lex.simple_expr(i + 1, end) });
        }
        if !(t.k == K::Open && lex.text(i) == "(" && lex.toks[i - 1].k == K::Ident) {
            continue;
        }
        let name_idx = i - 1;
        if fn_names[name_idx]
            || NOT_CALLEES.contains(&lex.text(name_idx))
            || matches!(lex.text_at(name_idx.checked_sub(1)), "def" | "function" | "class")
        {
            continue;
        }
        let mut j = name_idx;
        while j >= 2 && matches!(lex.text(j - 1), "." | "?.") {
            let k = j - 2;
            if lex.toks[k].k == K::Ident {
                j = k;
            } else if lex.toks[k].k == K::Close && lex.mate[k] < k && lex.mate[k] > 0 && lex.toks[lex.mate[k] - 1].k == K::Ident {
                j = lex.mate[k] - 1;
            } else {
                break;
            }
        }
        let is_constructor = lex.text_at(j.checked_sub(1)) == "new";
        let before = if is_constructor { j.checked_sub(2) } else { j.checked_sub(1) };
        let context = match before {
            _ if lex.toks[j].nl => CallContext::Statement,
            None => CallContext::Statement,
            Some(p) => match (lex.toks[p].k, lex.text(p)) {
                (_, "await") => CallContext::Awaited,
                (_, "=") => CallContext::Assigned(lex.text_at(p.checked_sub(1)).to_string()),
                (_, "return") | (_, "=>") => CallContext::Returned,
                (K::Open, _) | (_, ",") => CallContext::Argument,
                (K::Sep | K::LBrace | K::RBrace, _) => CallContext::Statement,
                _ => CallContext::Other,
            },
        };
        let close = if lex.mate[i] > i { lex.mate[i] } else { i };
        let mut chained = Vec::new();
        let mut k = close;
        while k + 3 < n && lex.text(k + 1) == "." && lex.toks[k + 2].k == K::Ident && lex.text(k + 3) == "(" {
            chained.push(lex.text(k + 2).to_string());
            k = if lex.mate[k + 3] > k + 3 { lex.mate[k + 3] } else { break };
        }
        let (args, keywords, arg_idents) = lex.call_args(i);
        raw.calls.push(RawCall {
            span: lex.span(j, close),
            callee: callee_text(lex.range_text(j, i)),
            is_constructor,
            context,
            chained,
            args,
            keywords,
            arg_idents,
        });
    }
    raw
}

/// Decorator callees written immediately before token `start`.
fn decorators(lex: &Lex, start: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut k = start;
    loop {
        while k > 0 && lex.toks[k - 1].k == K::Sep {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        let s = lex.stmt_start(k - 1);
        if s >= k || lex.text(s) != "@" {
            break;
        }
        out.insert(0, callee_text(lex.range_text(s + 1, k)));
        k = s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn lex(path: &str, src: &str) -> RawModel {
        let file = Arc::new(SourceFile::new(path, src.to_string()));
        extract(&file)
    }

    #[test]
    fn python_try_with_broad_handler() {
        let raw = lex(
            "a.py",
            "def f(x):\n    try:\n        g(x)\n    except Exception:\n        pass\n    if (\n",
        );
        assert_eq!(raw.functions.len(), 1);
        assert_eq!(raw.functions[0].name, "f");
        assert_eq!(raw.tries.len(), 1);
        let h = &raw.tries[0].handlers[0];
        assert_eq!(h.breadth, CaughtBreadth::Broad);
        assert_eq!(h.stmts, vec![Stmt::NoOp]);
        assert!(raw.calls.iter().any(|c| c.callee == "g"));
    }

    #[test]
    fn python_bare_and_narrow_handlers() {
        let raw = lex(
            "a.py",
            "try:\n    a()\nexcept ValueError as e:\n    log.warning(e)\nexcept:\n    return None\n",
        );
        let hs = &raw.tries[0].handlers;
        assert_eq!(hs.len(), 2);
        assert_eq!(hs[0].breadth, CaughtBreadth::Narrow);
        assert_eq!(hs[0].stmts, vec![Stmt::Log]);
        assert_eq!(hs[1].breadth, CaughtBreadth::Bare);
    }

    #[test]
    fn python_inline_suite_and_conditions() {
        let raw = lex("a.py", "def f(env):\n    if env == 'dev': return\n    verify(x)\n");
        assert_eq!(raw.conditions.len(), 1);
        assert!(raw.conditions[0].then_exits);
        assert!(raw.conditions[0].words.contains(&"dev".to_string()));
    }

    #[test]
    fn brace_language_blocks() {
        let raw = lex(
            "a.js",
            "async function save(x) {\n  try { await db.write(x) } catch (e) { console.error(e) }\n  if (!ok) {\n    return\n  } else {\n    verify(x)\n  }\n}\nconst h = async (y) => { send(y) }\n",
        );
        let names: Vec<&str> = raw.functions.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["save", "h"]);
        assert!(raw.functions[0].is_async);
        let h = &raw.tries[0].handlers[0];
        assert_eq!(h.breadth, CaughtBreadth::Broad);
        assert_eq!(h.stmts, vec![Stmt::Log]);
        let c = &raw.conditions[0];
        assert!(c.negated && c.then_exits && c.else_span.is_some());
        assert!(raw.calls.iter().any(|c| c.callee == "db.write" && c.context == CallContext::Awaited));
    }

    #[test]
    fn keyword_arguments_recovered() {
        let raw = lex("a.py", "client.create(temperature=0.7, model=m)\n");
        assert_eq!(raw.calls[0].keywords[0], ("temperature".to_string(), Expr::Number("0.7".into())));
        let raw = lex("a.js", "client.create({ temperature: 0.7 })\n");
        assert!(raw.calls[0].keywords.iter().any(|(k, _)| k == "temperature"));
    }

    #[test]
    fn python_decorators() {
        let raw = lex("a.py", "@retry(stop=3)\n@other\ndef send(x):\n    post(x)\n");
        assert_eq!(raw.functions[0].decorators, ["retry()", "other"]);
    }
}
