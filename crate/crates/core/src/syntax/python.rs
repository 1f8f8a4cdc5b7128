use tree_sitter::Node;

use super::builder::*;
use super::expr::{text_words, Expr, MAX_DEPTH, MAX_WIDTH};
use super::tree::{callee_text, children, descendants, named_children, span, Src};
use super::{CallContext, CaughtBreadth, DefaultKind, Span};

const SCOPE_KINDS: &[&str] = &["function_definition", "lambda", "class_definition"];
const BROAD_TYPES: &[&str] = &["Exception", "BaseException"];
const LOG_RECEIVERS: &[&str] = &["log", "logger", "logging", "_log", "_logger", "console"];
const LOG_METHODS: &[&str] = &[
    "debug", "info", "warning", "warn", "error", "exception", "critical", "fatal", "log", "trace",
];

pub(super) fn extract(root: Node, src: Src, raw: &mut RawModel) {
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_named() {
            visit(node, src, raw);
        }
        for child in children(node).into_iter().rev() {
            stack.push(child);
        }
    }
}

fn visit(node: Node, src: Src, raw: &mut RawModel) {
    match node.kind() {
        "function_definition" => raw.functions.push(function(node, src)),
        "lambda" => raw.functions.push(RawFunction {
            name: "<lambda>".into(),
            span: span(node),
            decorators: Vec::new(),
            is_async: false,
        }),
        "try_statement" => raw.tries.push(try_block(node, src)),
        "call" => raw.calls.push(call(node, src)),
        "if_statement" | "elif_clause" => raw.conditions.push(condition(node, src)),
        "for_statement" | "while_statement" => raw.loops.push(RawLoop { span: span(node) }),
        "return_statement" => raw.returns.push(RawReturn {
            span: span(node),
            value: return_value(node, src),
        }),
        "boolean_operator" => {
            if is_or_default(node, src) {
                raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::OrDefault });
            }
        }
        "await" => raw.awaits.push(RawAwait {
            span: span(node),
            target: named_children(node)
                .first()
                .filter(|n| matches!(n.kind(), "identifier" | "attribute"))
                .map(|n| src.of(*n).to_string()),
        }),
        _ => {}
    }
    if node.kind() == "call" && is_get_with_default(node, src) {
        raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::GetWithDefault });
    }
}

fn function(node: Node, src: Src) -> RawFunction {
    let name = node
        .child_by_field_name("name")
        .map(|n| src.of(n).to_string())
        .unwrap_or_default();
    let is_async = children(node).first().is_some_and(|c| c.kind() == "async");
    let decorators = node
        .parent()
        .filter(|p| p.kind() == "decorated_definition")
        .map(|p| {
            named_children(p)
                .into_iter()
                .filter(|c| c.kind() == "decorator")
                .map(|d| callee_text(src.of(d).trim_start_matches('@')))
                .collect()
        })
        .unwrap_or_default();
    RawFunction { name, span: span(node), decorators, is_async }
}

fn try_block(node: Node, src: Src) -> RawTry {
    let body = node.child_by_field_name("body").map(span).unwrap_or(span(node));
    let handlers = children(node)
        .into_iter()
        .filter(|c| matches!(c.kind(), "except_clause" | "except_group_clause"))
        .map(|c| handler(c, src))
        .collect();
    RawTry { body, handlers }
}

fn handler(node: Node, src: Src) -> RawHandler {
    let parts = named_children(node);
    let block = parts.iter().rev().find(|c| c.kind() == "block").copied();
    let type_expr = parts
        .iter()
        .find(|c| c.kind() != "block")
        .map(|c| {
            if c.kind() == "as_pattern" {
                named_children(*c).first().copied().unwrap_or(*c)
            } else {
                *c
            }
        });
    let caught_types: Vec<String> = match type_expr {
        None => Vec::new(),
        Some(t) if matches!(t.kind(), "tuple" | "parenthesized_expression") => named_children(t)
            .iter()
            .flat_map(|e| {
                if e.kind() == "tuple" {
                    named_children(*e).iter().map(|x| src.of(*x).to_string()).collect()
                } else {
                    vec![src.of(*e).to_string()]
                }
            })
            .collect(),
        Some(t) => vec![src.of(t).to_string()],
    };
    let breadth = if type_expr.is_none() {
        CaughtBreadth::Bare
    } else if caught_types.iter().any(|t| {
        let last = t.rsplit('.').next().unwrap_or(t);
        BROAD_TYPES.contains(&last)
    }) {
        CaughtBreadth::Broad
    } else {
        CaughtBreadth::Narrow
    };
    let (body, stmts, deep_raise, deep_return) = match block {
        Some(b) => {
            let stmts = named_children(b).into_iter().map(|s| statement(s, src)).collect();
            let raises = !descendants(b, &["raise_statement"], SCOPE_KINDS).is_empty();
            let deep_return = descendants(b, &["return_statement"], SCOPE_KINDS)
                .into_iter()
                .find_map(|r| return_value(r, src));
            (span(b), stmts, raises, deep_return)
        }
        None => (span(node), Vec::new(), false, None),
    };
    RawHandler {
        span: span(node),
        body,
        breadth,
        caught_types,
        stmts,
        deep_raise,
        deep_return,
    }
}

fn statement(node: Node, src: Src) -> Stmt {
    match node.kind() {
        "pass_statement" | "continue_statement" | "break_statement" => Stmt::NoOp,
        "raise_statement" => Stmt::Raise,
        "return_statement" => Stmt::Return(return_value(node, src)),
        "expression_statement" => {
            let inner = named_children(node);
            let Some(first) = inner.first().copied() else {
                return Stmt::NoOp;
            };
            match first.kind() {
                "ellipsis" | "string" | "concatenated_string" => Stmt::NoOp,
                "call" if is_log_call(first, src) => Stmt::Log,
                "await" => match named_children(first).first() {
                    Some(c) if c.kind() == "call" && is_log_call(*c, src) => Stmt::Log,
                    _ => Stmt::Other,
                },
                "assignment" => {
                    let right = first.child_by_field_name("right");
                    match right.map(|r| expr(r, src, 0)) {
                        Some(e) if e.is_literal() => Stmt::DefaultAssign(node.start_byte()),
                        _ => Stmt::Other,
                    }
                }
                _ => Stmt::Other,
            }
        }
        _ => Stmt::Other,
    }
}

pub(super) fn is_log_callee(callee: &str) -> bool {
    let mut segments: Vec<&str> = callee.split('.').collect();
    let last = segments.pop().unwrap_or("");
    if segments.is_empty() {
        return matches!(last, "print" | "log" | "warn" | "warning" | "debug" | "info");
    }
    let receiver_is_logger = segments.iter().any(|s| {
        let s = s.trim_end_matches("()");
        LOG_RECEIVERS.contains(&s.to_ascii_lowercase().as_str())
            || s.to_ascii_lowercase().ends_with("logger")
            || s.to_ascii_lowercase().ends_with("_log")
    });
    let self_method = matches!(segments.as_slice(), ["self"] | ["this"] | ["cls"]);
    (receiver_is_logger || self_method) && LOG_METHODS.contains(&last.to_ascii_lowercase().as_str())
        || receiver_is_logger && !segments.is_empty() && last.starts_with("log")
}

fn is_log_call(node: Node, src: Src) -> bool {
    node.child_by_field_name("function")
        .is_some_and(|f| is_log_callee(&callee_text(src.of(f))))
}

fn return_value(node: Node, src: Src) -> Option<Expr> {
    named_children(node).first().map(|v| expr(*v, src, 0))
}

fn call(node: Node, src: Src) -> RawCall {
    let function = node.child_by_field_name("function");
    let callee = function.map(|f| callee_text(src.of(f))).unwrap_or_default();
    let (args, keywords, arg_idents) = arguments(node, src);
    let (context, chained) = call_context(node, src);
    RawCall {
        span: span(node),
        callee,
        is_constructor: false,
        context,
        chained,
        args,
        keywords,
        arg_idents,
    }
}

fn arguments(node: Node, src: Src) -> (Vec<Expr>, Vec<(String, Expr)>, Vec<String>) {
    let mut args = Vec::new();
    let mut keywords = Vec::new();
    let mut idents = Vec::new();
    let Some(list) = node.child_by_field_name("arguments") else {
        return (args, keywords, idents);
    };
    for a in named_children(list).into_iter().take(MAX_WIDTH) {
        match a.kind() {
            "keyword_argument" => {
                let name = a.child_by_field_name("name").map(|n| src.of(n).to_string());
                let value = a.child_by_field_name("value").map(|v| expr(v, src, 1));
                if let (Some(n), Some(v)) = (name, value) {
                    keywords.push((n, v));
                }
            }
            "identifier" => {
                idents.push(src.of(a).to_string());
                args.push(expr(a, src, 1));
            }
            "list_splat" | "dictionary_splat" => {
                if let Some(inner) = named_children(a).first() {
                    if inner.kind() == "identifier" {
                        idents.push(src.of(*inner).to_string());
                    }
                }
            }
            "list" | "tuple" => {
                idents.extend(
                    named_children(a)
                        .into_iter()
                        .filter(|e| e.kind() == "identifier")
                        .map(|e| src.of(e).to_string()),
                );
                args.push(expr(a, src, 1));
            }
            _ => args.push(expr(a, src, 1)),
        }
    }
    (args, keywords, idents)
}

fn call_context(node: Node, src: Src) -> (CallContext, Vec<String>) {
    let mut chained = Vec::new();
    let mut cur = node;
    loop {
        let Some(parent) = cur.parent() else {
            return (CallContext::Other, chained);
        };
        let is_field = |field: &str| parent.child_by_field_name(field) == Some(cur);
        let ctx = match parent.kind() {
            "attribute" if is_field("object") => {
                let gp = parent.parent();
                match gp {
                    Some(g) if g.kind() == "call" && g.child_by_field_name("function") == Some(parent) => {
                        if let Some(attr) = parent.child_by_field_name("attribute") {
                            chained.push(src.of(attr).to_string());
                        }
                        cur = g;
                        continue;
                    }
                    _ => CallContext::Other,
                }
            }
            "parenthesized_expression" => {
                cur = parent;
                continue;
            }
            "await" => CallContext::Awaited,
            "assignment" | "augmented_assignment" if is_field("right") => CallContext::Assigned(
                parent
                    .child_by_field_name("left")
                    .map(|l| src.of(l).to_string())
                    .unwrap_or_default(),
            ),
            "argument_list" | "keyword_argument" | "list" | "tuple" | "list_splat" => CallContext::Argument,
            "return_statement" | "yield" | "lambda" => CallContext::Returned,
            "expression_statement" => CallContext::Statement,
            _ => CallContext::Other,
        };
        return (ctx, chained);
    }
}

fn condition(node: Node, src: Src) -> RawCondition {
    let cond = node.child_by_field_name("condition");
    let consequence = node.child_by_field_name("consequence");
    let then_span = consequence.map(span).unwrap_or_else(|| span(node));
    let then_exits = consequence.is_some_and(exits_early);
    // `if` owns all its alternatives; an `elif` owns the clauses that follow it.
    let alternatives: Vec<Node> = if node.kind() == "if_statement" {
        children(node)
            .into_iter()
            .filter(|c| matches!(c.kind(), "elif_clause" | "else_clause"))
            .collect()
    } else {
        let mut rest = Vec::new();
        let mut sib = node.next_sibling();
        while let Some(s) = sib {
            if matches!(s.kind(), "elif_clause" | "else_clause") {
                rest.push(s);
            }
            sib = s.next_sibling();
        }
        rest
    };
    let else_span = match (alternatives.first(), alternatives.last()) {
        (Some(a), Some(b)) => Some(Span::new(a.start_byte(), b.end_byte())),
        _ => None,
    };
    let else_exits = alternatives.len() == 1
        && alternatives[0].kind() == "else_clause"
        && alternatives[0].child_by_field_name("body").is_some_and(exits_early);
    let span_end = consequence.map(|c| c.end_byte()).unwrap_or(node.end_byte());
    let span_end = else_span.map(|e| e.end.max(span_end)).unwrap_or(span_end);
    RawCondition {
        span: Span::new(node.start_byte(), span_end),
        words: cond.map(|c| super::builder::condition_words(src.of(c))).unwrap_or_default(),
        negated: cond.is_some_and(|c| c.kind() == "not_operator"),
        then_span,
        then_exits,
        else_span,
        else_exits,
    }
}

fn exits_early(block: Node) -> bool {
    let last = named_children(block).last().copied();
    last.is_some_and(|s| matches!(s.kind(), "return_statement" | "continue_statement" | "break_statement"))
}

fn in_condition(node: Node) -> bool {
    let mut cur = node;
    while let Some(parent) = cur.parent() {
        match parent.kind() {
            "if_statement" | "elif_clause" | "while_statement" | "conditional_expression" => {
                return parent.child_by_field_name("condition") == Some(cur)
                    || (parent.kind() == "conditional_expression" && named_children(parent).get(1) == Some(&cur));
            }
            "expression_statement" | "block" | "module" => return false,
            _ => cur = parent,
        }
    }
    false
}

fn is_or_default(node: Node, src: Src) -> bool {
    let op = node.child_by_field_name("operator").map(|o| src.of(o));
    if op != Some("or") || in_condition(node) {
        return false;
    }
    node.child_by_field_name("right").is_some_and(|r| {
        let e = expr(r, src, 0);
        matches!(e, Expr::Str(_) | Expr::Number(_) | Expr::Object(_) | Expr::Array(_))
    })
}

fn is_get_with_default(node: Node, src: Src) -> bool {
    let Some(function) = node.child_by_field_name("function") else {
        return false;
    };
    let callee = callee_text(src.of(function));
    let positional = node
        .child_by_field_name("arguments")
        .map(|a| {
            named_children(a)
                .into_iter()
                .filter(|c| !matches!(c.kind(), "keyword_argument" | "list_splat" | "dictionary_splat"))
                .count()
        })
        .unwrap_or(0);
    get_with_default_shape(&callee, positional)
}

/// `d.get(k, default)`, `getattr(o, n, default)`, `os.getenv(k, default)`,
/// `_.get(o, path, default)`.
pub(super) fn get_with_default_shape(callee: &str, positional: usize) -> bool {
    const NETWORK_RECEIVERS: &[&str] =
        &["requests", "http", "httpx", "client", "session", "axios", "api", "router", "app", "fetch"];
    let (receiver, name) = match callee.rsplit_once('.') {
        Some((r, n)) => (Some(r), n),
        None => (None, callee),
    };
    match name {
        "getattr" => positional == 3,
        "getenv" => positional == 2,
        "get" => match receiver {
            Some("_") | Some("lodash") => positional == 3,
            Some(r) => {
                let words = crate::lexicon::split_words(r);
                positional == 2 && !words.iter().any(|w| NETWORK_RECEIVERS.contains(&w.as_str()))
            }
            None => false,
        },
        _ => false,
    }
}

fn string_content(node: Node, src: Src) -> String {
    let parts: Vec<Node> = named_children(node)
        .into_iter()
        .filter(|c| c.kind() == "string_content")
        .collect();
    if parts.is_empty() {
        let text = src.of(node);
        let trimmed = text.trim_start_matches(|c: char| c.is_ascii_alphabetic());
        trimmed.trim_matches(|c| c == '"' || c == '\'').to_string()
    } else {
        parts.iter().map(|p| src.of(*p)).collect()
    }
}

pub(super) fn expr(node: Node, src: Src, depth: usize) -> Expr {
    if depth > MAX_DEPTH {
        return Expr::Other(text_words(src.of(node)));
    }
    match node.kind() {
        "none" => Expr::Null,
        "true" => Expr::Bool(true),
        "false" => Expr::Bool(false),
        "integer" | "float" => Expr::Number(src.of(node).to_string()),
        "string" => Expr::Str(string_content(node, src)),
        "concatenated_string" => Expr::Str(
            named_children(node).into_iter().map(|s| string_content(s, src)).collect(),
        ),
        "identifier" => Expr::Ident(src.of(node).to_string()),
        "attribute" => Expr::Member(callee_text(src.of(node))),
        "dictionary" => Expr::Object(
            named_children(node)
                .into_iter()
                .filter(|p| p.kind() == "pair")
                .take(MAX_WIDTH)
                .map(|p| {
                    let key = p
                        .child_by_field_name("key")
                        .map(|k| match k.kind() {
                            "string" => string_content(k, src),
                            _ => src.of(k).to_string(),
                        })
                        .unwrap_or_default();
                    let value = p
                        .child_by_field_name("value")
                        .map(|v| expr(v, src, depth + 1))
                        .unwrap_or(Expr::Null);
                    (key, value)
                })
                .collect(),
        ),
        "list" | "tuple" | "set" | "expression_list" => Expr::Array(
            named_children(node)
                .into_iter()
                .take(MAX_WIDTH)
                .map(|e| expr(e, src, depth + 1))
                .collect(),
        ),
        "call" => {
            let callee = node
                .child_by_field_name("function")
                .map(|f| callee_text(src.of(f)))
                .unwrap_or_default();
            let (mut args, keywords, _) = arguments(node, src);
            // Fold arguments of chained receivers: `Response(x).with_status(200)`.
            if let Some(inner) = node
                .child_by_field_name("function")
                .filter(|f| f.kind() == "attribute")
                .and_then(|f| f.child_by_field_name("object"))
                .filter(|o| o.kind() == "call")
            {
                if let Expr::Call { args: more, .. } = expr(inner, src, depth + 1) {
                    args.extend(more);
                }
            }
            Expr::Call { callee, args, keywords }
        }
        "parenthesized_expression" | "await" => named_children(node)
            .first()
            .map(|c| expr(*c, src, depth))
            .unwrap_or(Expr::Other(Vec::new())),
        "unary_operator" => {
            let text = src.of(node);
            match named_children(node).first() {
                Some(n) if matches!(n.kind(), "integer" | "float") && text.starts_with('-') => {
                    Expr::Number(format!("-{}", src.of(*n)))
                }
                _ => Expr::Other(text_words(text)),
            }
        }
        _ => Expr::Other(text_words(src.of(node))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_callees() {
        assert!(is_log_callee("log.warning"));
        assert!(is_log_callee("logging.exception"));
        assert!(is_log_callee("self.logger.error"));
        assert!(is_log_callee("print"));
        assert!(is_log_callee("console.error"));
        assert!(is_log_callee("self.log"));
        assert!(!is_log_callee("self.handle_error"));
        assert!(!is_log_callee("persist"));
        assert!(!is_log_callee("audit.record_event"));
    }

    #[test]
    fn get_with_default_shapes() {
        assert!(get_with_default_shape("cfg.get", 2));
        assert!(get_with_default_shape("os.environ.get", 2));
        assert!(!get_with_default_shape("cfg.get", 1));
        assert!(!get_with_default_shape("requests.get", 2));
        assert!(get_with_default_shape("getattr", 3));
        assert!(get_with_default_shape("os.getenv", 2));
        assert!(get_with_default_shape("_.get", 3));
    }
}
