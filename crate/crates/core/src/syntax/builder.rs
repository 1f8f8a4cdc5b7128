//! Turns flat extractor output into a [`SyntaxModel`].
//!
//! Extractors only report sites with byte spans. Every containment relation
//! (enclosing function, enclosing handler, guarding `try`, branch membership)
//! is derived here from span nesting, so the full-parse and lexical paths share
//! one definition of those relations.

use std::sync::Arc;

use super::*;

#[derive(Debug, Default)]
pub(crate) struct RawModel {
    pub functions: Vec<RawFunction>,
    pub tries: Vec<RawTry>,
    pub calls: Vec<RawCall>,
    pub conditions: Vec<RawCondition>,
    pub returns: Vec<RawReturn>,
    pub loops: Vec<RawLoop>,
    pub defaults: Vec<RawDefault>,
    pub awaits: Vec<RawAwait>,
    pub tests: Vec<RawTest>,
}

#[derive(Debug)]
pub(crate) struct RawFunction {
    pub name: String,
    pub span: Span,
    pub decorators: Vec<String>,
    pub is_async: bool,
}

#[derive(Debug)]
pub(crate) struct RawTry {
    pub body: Span,
    pub handlers: Vec<RawHandler>,
}

/// Summary of one top-level statement of a handler body.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Stmt {
    NoOp,
    Log,
    Return(Option<Expr>),
    Raise,
    /// Assignment of a literal; carries the statement's byte offset.
    DefaultAssign(usize),
    Other,
}

#[derive(Debug)]
pub(crate) struct RawHandler {
    pub span: Span,
    pub body: Span,
    pub breadth: CaughtBreadth,
    pub caught_types: Vec<String>,
    pub stmts: Vec<Stmt>,
    /// A raise/throw anywhere in the body outside nested functions.
    pub deep_raise: bool,
    /// First value-returning `return` anywhere in the body outside nested functions.
    pub deep_return: Option<Expr>,
}

#[derive(Debug)]
pub(crate) struct RawCall {
    pub span: Span,
    pub callee: String,
    pub is_constructor: bool,
    pub context: CallContext,
    pub chained: Vec<String>,
    pub args: Vec<Expr>,
    pub keywords: Vec<(String, Expr)>,
    pub arg_idents: Vec<String>,
}

#[derive(Debug)]
pub(crate) struct RawCondition {
    pub span: Span,
    pub words: Vec<String>,
    pub negated: bool,
    pub then_span: Span,
    pub then_exits: bool,
    pub else_span: Option<Span>,
    pub else_exits: bool,
}

#[derive(Debug)]
pub(crate) struct RawReturn {
    pub span: Span,
    pub value: Option<Expr>,
}

#[derive(Debug)]
pub(crate) struct RawLoop {
    pub span: Span,
}

#[derive(Debug)]
pub(crate) struct RawDefault {
    pub span: Span,
    pub kind: DefaultKind,
}

#[derive(Debug)]
pub(crate) struct RawAwait {
    pub span: Span,
    pub target: Option<String>,
}

#[derive(Debug)]
pub(crate) struct RawTest {
    pub name: String,
    pub span: Span,
}

pub(crate) fn classify_body(stmts: &[Stmt], deep_raise: bool, deep_return: bool) -> BodyKind {
    if deep_raise {
        BodyKind::Reraises
    } else if deep_return {
        BodyKind::ReturnsValue
    } else if stmts.iter().all(|s| matches!(s, Stmt::NoOp | Stmt::Return(None))) {
        BodyKind::Empty
    } else if stmts.iter().all(|s| matches!(s, Stmt::NoOp | Stmt::Return(None) | Stmt::Log)) {
        BodyKind::LogOnly
    } else {
        BodyKind::Other
    }
}

const STARTUP_NAMES: &[&str] = &["main", "init", "initialize", "startup", "bootstrap", "setup"];

fn startup_name(name: &str) -> bool {
    if name.starts_with("__") {
        return false;
    }
    crate::lexicon::split_words(name)
        .iter()
        .any(|w| STARTUP_NAMES.contains(&w.as_str()))
}

struct LineIndex {
    starts: Vec<usize>,
    max_line: usize,
}

impl LineIndex {
    fn new(file: &SourceFile) -> Self {
        let mut starts = vec![0];
        starts.extend(
            file.content
                .bytes()
                .enumerate()
                .filter(|(_, b)| *b == b'\n')
                .map(|(i, _)| i + 1),
        );
        LineIndex { starts, max_line: file.line_count.max(1) }
    }

    fn line(&self, byte: usize) -> usize {
        self.starts.partition_point(|&s| s <= byte).clamp(1, self.max_line)
    }

    fn start_line(&self, span: Span) -> usize {
        self.line(span.start)
    }

    fn end_line(&self, span: Span) -> usize {
        self.line(if span.end > span.start { span.end - 1 } else { span.start })
    }
}

fn innermost_function(functions: &[FunctionUnit], span: &Span, exclude: Option<usize>) -> Option<usize> {
    functions
        .iter()
        .enumerate()
        .filter(|(i, f)| Some(*i) != exclude && f.span.contains(span) && f.span != *span)
        .max_by_key(|(_, f)| (f.span.start, std::cmp::Reverse(f.span.end)))
        .map(|(i, _)| i)
}

pub(super) fn build(file: Arc<SourceFile>, mode: ParseMode, mut raw: RawModel) -> SyntaxModel {
    let lines = LineIndex::new(&file);
    let file_startup = file.is_startup_like();
    let file_test = file.is_test_like();

    raw.functions.sort_by_key(|f| (f.span.start, std::cmp::Reverse(f.span.end)));
    raw.tries.sort_by_key(|t| (t.body.start, t.body.end));
    raw.calls.sort_by_key(|c| (c.span.start, c.span.end));
    raw.conditions.sort_by_key(|c| (c.span.start, c.span.end));
    raw.returns.sort_by_key(|r| (r.span.start, r.span.end));
    raw.loops.sort_by_key(|l| (l.span.start, l.span.end));
    raw.defaults.sort_by_key(|d| (d.span.start, d.span.end));
    raw.awaits.sort_by_key(|a| (a.span.start, a.span.end));
    raw.tests.sort_by_key(|t| (t.span.start, t.span.end));

    let mut functions: Vec<FunctionUnit> = raw
        .functions
        .iter()
        .map(|f| FunctionUnit {
            name: f.name.clone(),
            start_line: lines.start_line(f.span),
            end_line: lines.end_line(f.span),
            span: f.span,
            is_async: f.is_async,
            decorators: f.decorators.clone(),
            is_startup_like: file_startup || startup_name(&f.name),
            is_test_like: file_test || f.name.to_ascii_lowercase().starts_with("test"),
            parent: None,
            handlers: Vec::new(),
            returns: Vec::new(),
            calls: Vec::new(),
        })
        .collect();
    for i in 0..functions.len() {
        let span = functions[i].span;
        functions[i].parent = innermost_function(&functions, &span, Some(i));
    }
    let fn_of = |span: &Span| innermost_function(&functions, span, None);

    // Handlers, flattened in try order; remember which try each belongs to.
    let mut handlers = Vec::new();
    let mut try_handlers: Vec<(Span, Option<usize>, Vec<usize>)> = Vec::new();
    for t in &raw.tries {
        let mut ids = Vec::new();
        for h in &t.handlers {
            let logs = h.stmts.contains(&Stmt::Log);
            let default_assignment = h.stmts.iter().find_map(|s| match s {
                Stmt::DefaultAssign(at) => Some(lines.line(*at)),
                _ => None,
            });
            ids.push(handlers.len());
            handlers.push(HandlerBlock {
                line: lines.start_line(h.span),
                end_line: lines.end_line(h.span),
                span: h.span,
                body: h.body,
                protected: t.body,
                caught_breadth: h.breadth,
                caught_types: h.caught_types.clone(),
                body_kind: classify_body(&h.stmts, h.deep_raise, h.deep_return.is_some()),
                returned_expression: h.deep_return.clone(),
                logs,
                default_assignment,
                function: fn_of(&h.span),
            });
        }
        if !ids.is_empty() {
            try_handlers.push((t.body, fn_of(&t.body), ids));
        }
    }
    let handler_of = |span: &Span, function: Option<usize>| {
        handlers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.function == function && h.body.contains(span))
            .max_by_key(|(_, h)| h.body.start)
            .map(|(i, _)| i)
    };
    let guards_of = |span: &Span, function: Option<usize>| {
        try_handlers
            .iter()
            .filter(|(body, f, _)| *f == function && body.contains(span))
            .max_by_key(|(body, _, _)| body.start)
            .map(|(_, _, ids)| ids.clone())
            .unwrap_or_default()
    };

    let calls: Vec<CallSite> = raw
        .calls
        .into_iter()
        .map(|c| {
            let function = fn_of(&c.span);
            CallSite {
                line: lines.start_line(c.span),
                end_line: lines.end_line(c.span),
                span: c.span,
                name: super::tree::last_segment(&c.callee),
                callee: c.callee,
                is_constructor: c.is_constructor,
                context: c.context,
                chained: c.chained,
                args: c.args,
                keywords: c.keywords,
                arg_idents: c.arg_idents,
                function,
                handler: handler_of(&c.span, function),
                guarded_by: guards_of(&c.span, function),
            }
        })
        .collect();

    let calls_within = |span: &Span, function: Option<usize>| -> Vec<usize> {
        calls
            .iter()
            .enumerate()
            .filter(|(_, c)| c.function == function && span.contains(&c.span))
            .map(|(i, _)| i)
            .collect()
    };

    let conditionals: Vec<ConditionSite> = raw
        .conditions
        .iter()
        .map(|c| {
            let function = fn_of(&c.span);
            ConditionSite {
                line: lines.start_line(c.span),
                end_line: lines.end_line(c.span),
                span: c.span,
                words: c.words.clone(),
                negated: c.negated,
                then_branch: Branch {
                    span: c.then_span,
                    calls: calls_within(&c.then_span, function),
                    exits_early: c.then_exits,
                },
                else_branch: c.else_span.map(|s| Branch {
                    span: s,
                    calls: calls_within(&s, function),
                    exits_early: c.else_exits,
                }),
                function,
            }
        })
        .collect();

    let returns: Vec<ReturnSite> = raw
        .returns
        .into_iter()
        .map(|r| {
            let function = fn_of(&r.span);
            let in_error_branch = conditionals.iter().any(|c| {
                c.function == function && c.is_error_check() && c.then_branch.span.contains(&r.span)
            });
            ReturnSite {
                line: lines.start_line(r.span),
                span: r.span,
                value: r.value,
                function,
                handler: handler_of(&r.span, function),
                in_error_branch,
            }
        })
        .collect();

    let loops = raw
        .loops
        .iter()
        .map(|l| {
            let function = fn_of(&l.span);
            LoopSite {
                line: lines.start_line(l.span),
                end_line: lines.end_line(l.span),
                span: l.span,
                words: crate::lexicon::split_words(file.content.get(l.span.start..l.span.end).unwrap_or("")),
                calls: calls_within(&l.span, function),
                function,
            }
        })
        .collect();

    let defaults = raw
        .defaults
        .iter()
        .map(|d| DefaultSite {
            line: lines.start_line(d.span),
            span: d.span,
            kind: d.kind,
            function: fn_of(&d.span),
        })
        .collect();

    let awaits = raw
        .awaits
        .iter()
        .map(|a| AwaitSite {
            line: lines.start_line(a.span),
            span: a.span,
            target: a.target.clone(),
            function: fn_of(&a.span),
        })
        .collect();

    let mut tests: Vec<TestCase> = raw
        .tests
        .iter()
        .map(|t| TestCase {
            name: t.name.clone(),
            line: lines.start_line(t.span),
            end_line: lines.end_line(t.span),
            span: t.span,
        })
        .collect();
    for f in &functions {
        let named_test = f.name.to_ascii_lowercase().starts_with("test");
        if named_test && !raw.tests.iter().any(|t| t.span.contains(&f.span)) {
            tests.push(TestCase {
                name: f.name.clone(),
                line: f.start_line,
                end_line: f.end_line,
                span: f.span,
            });
        }
    }
    tests.sort_by_key(|t| (t.span.start, t.span.end));

    for (i, h) in handlers.iter().enumerate() {
        if let Some(f) = h.function {
            functions[f].handlers.push(i);
        }
    }
    for (i, r) in returns.iter().enumerate() {
        if let Some(f) = r.function {
            functions[f].returns.push(i);
        }
    }
    for (i, c) in calls.iter().enumerate() {
        if let Some(f) = c.function {
            functions[f].calls.push(i);
        }
    }

    // Keep handler order by position; remap indices held elsewhere.
    let mut order: Vec<usize> = (0..handlers.len()).collect();
    order.sort_by_key(|&i| (handlers[i].span.start, handlers[i].span.end));
    let mut remap = vec![0; handlers.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let handlers: Vec<HandlerBlock> = order.iter().map(|&i| handlers[i].clone()).collect();
    let calls = calls
        .into_iter()
        .map(|mut c| {
            c.handler = c.handler.map(|h| remap[h]);
            c.guarded_by = c.guarded_by.iter().map(|h| remap[*h]).collect();
            c
        })
        .collect();
    let returns = returns
        .into_iter()
        .map(|mut r| {
            r.handler = r.handler.map(|h| remap[h]);
            r
        })
        .collect();
    for f in &mut functions {
        f.handlers = f.handlers.iter().map(|h| remap[*h]).collect();
        f.handlers.sort_unstable();
    }

    SyntaxModel {
        file,
        mode,
        functions,
        handlers,
        calls,
        conditionals,
        returns,
        loops,
        defaults,
        awaits,
        tests,
    }
}

/// Words in a condition's text: identifiers and string literal contents.
pub(crate) fn condition_words(text: &str) -> Vec<String> {
    crate::lexicon::split_words(text)
}
