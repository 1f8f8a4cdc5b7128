use tree_sitter::Node;

use super::builder::*;
use super::expr::{text_words, Expr, MAX_DEPTH, MAX_WIDTH};
use super::python::{get_with_default_shape, is_log_callee};
use super::tree::{callee_text, children, descendants, named_children, span, Src};
use super::{CallContext, CaughtBreadth, DefaultKind};

const FUNCTION_KINDS: &[&str] = &[
    "function_declaration",
    "generator_function_declaration",
    "function_expression",
    "function",
    "generator_function",
    "arrow_function",
    "method_definition",
];
const SCOPE_KINDS: &[&str] = &[
    "function_declaration",
    "generator_function_declaration",
    "function_expression",
    "function",
    "generator_function",
    "arrow_function",
    "method_definition",
    "class_declaration",
    "class",
];
const TRANSPARENT: &[&str] = &[
    "parenthesized_expression",
    "as_expression",
    "non_null_expression",
    "satisfies_expression",
    "type_assertion",
];
const TEST_CALLEES: &[&str] = &["it", "test"];

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
    let kind = node.kind();
    if FUNCTION_KINDS.contains(&kind) {
        raw.functions.push(function(node, src));
        return;
    }
    match kind {
        "try_statement" => {
            if let Some(t) = try_block(node, src) {
                raw.tries.push(t);
            }
        }
        "call_expression" | "new_expression" => {
            let c = call(node, src);
            if let Some(test) = test_case(&c, node, src) {
                raw.tests.push(test);
            }
            let positional = node
                .child_by_field_name("arguments")
                .map(|l| named_children(l).iter().filter(|a| a.kind() != "spread_element").count())
                .unwrap_or(0);
            if get_with_default_shape(&c.callee, positional) {
                raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::GetWithDefault });
            }
            raw.calls.push(c);
        }
        "if_statement" => raw.conditions.push(condition(node, src)),
        "for_statement" | "for_in_statement" | "while_statement" | "do_statement" => {
            raw.loops.push(RawLoop { span: span(node) })
        }
        "return_statement" => raw.returns.push(RawReturn {
            span: span(node),
            value: return_value(node, src),
        }),
        "binary_expression" => {
            let op = node.child_by_field_name("operator").map(|o| src.of(o));
            let right = node.child_by_field_name("right").map(|r| expr(r, src, 0));
            match op {
                Some("??") => raw.defaults.push(RawDefault {
                    span: span(node),
                    kind: DefaultKind::NullCoalescing,
                }),
                Some("||")
                    if !in_condition(node)
                        && matches!(
                            right,
                            Some(Expr::Str(_) | Expr::Number(_) | Expr::Object(_) | Expr::Array(_))
                        ) =>
                {
                    raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::OrDefault })
                }
                _ => {}
            }
        }
        "augmented_assignment_expression" => {
            let op = node.child_by_field_name("operator").map(|o| src.of(o));
            if op == Some("??=") {
                raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::NullCoalescing });
            } else if op == Some("||=") {
                raw.defaults.push(RawDefault { span: span(node), kind: DefaultKind::OrDefault });
            }
        }
        "await_expression" => raw.awaits.push(RawAwait {
            span: span(node),
            target: named_children(node)
                .first()
                .map(|n| strip(*n))
                .filter(|n| matches!(n.kind(), "identifier" | "member_expression"))
                .map(|n| src.of(n).to_string()),
        }),
        _ => {}
    }
}

fn strip(mut node: Node) -> Node {
    while TRANSPARENT.contains(&node.kind()) {
        match named_children(node).first() {
            Some(inner) => node = *inner,
            None => break,
        }
    }
    node
}

fn function(node: Node, src: Src) -> RawFunction {
    let own_name = node.child_by_field_name("name").map(|n| src.of(n).to_string());
    let name = own_name.unwrap_or_else(|| {
        let mut parent = node.parent();
        while let Some(p) = parent.filter(|p| TRANSPARENT.contains(&p.kind())) {
            parent = p.parent();
        }
        match parent {
            Some(p) if p.kind() == "variable_declarator" => {
                p.child_by_field_name("name").map(|n| src.of(n).to_string())
            }
            Some(p) if p.kind() == "assignment_expression" => {
                p.child_by_field_name("left").map(|n| callee_text(src.of(n)))
            }
            Some(p) if p.kind() == "pair" => p.child_by_field_name("key").map(|k| src.of(k).to_string()),
            Some(p) if p.kind() == "public_field_definition" || p.kind() == "field_definition" => p
                .child_by_field_name("name")
                .or_else(|| p.child_by_field_name("property"))
                .map(|n| src.of(n).to_string()),
            _ => None,
        }
        .unwrap_or_else(|| "<anonymous>".to_string())
    });
    let is_async = children(node).iter().any(|c| c.kind() == "async");
    let mut decorators: Vec<String> = children(node)
        .into_iter()
        .filter(|c| c.kind() == "decorator")
        .map(|d| callee_text(src.of(d).trim_start_matches('@')))
        .collect();
    let mut prev = node.prev_named_sibling();
    while let Some(p) = prev.filter(|p| p.kind() == "decorator") {
        decorators.insert(0, callee_text(src.of(p).trim_start_matches('@')));
        prev = p.prev_named_sibling();
    }
    RawFunction { name, span: span(node), decorators, is_async }
}

fn try_block(node: Node, src: Src) -> Option<RawTry> {
    let body = node.child_by_field_name("body").map(span)?;
    let handlers = node
        .child_by_field_name("handler")
        .map(|h| vec![handler(h, src)])
        .unwrap_or_default();
    Some(RawTry { body, handlers })
}

fn handler(node: Node, src: Src) -> RawHandler {
    let param = node.child_by_field_name("parameter");
    let caught_types: Vec<String> = node
        .child_by_field_name("type")
        .map(|t| vec![src.of(t).trim_start_matches(':').trim().to_string()])
        .unwrap_or_default();
    let breadth = if param.is_none() { CaughtBreadth::Bare } else { CaughtBreadth::Broad };
    let (body, stmts, deep_raise, deep_return) = match node.child_by_field_name("body") {
        Some(b) => {
            let stmts = named_children(b).into_iter().map(|s| statement(s, src)).collect();
            let raises = !descendants(b, &["throw_statement"], SCOPE_KINDS).is_empty();
            let deep_return = descendants(b, &["return_statement"], SCOPE_KINDS)
                .into_iter()
                .find_map(|r| return_value(r, src));
            (span(b), stmts, raises, deep_return)
        }
        None => (span(node), Vec::new(), false, None),
    };
    RawHandler { span: span(node), body, breadth, caught_types, stmts, deep_raise, deep_return }
}

fn statement(node: Node, src: Src) -> Stmt {
    match node.kind() {
        "empty_statement" | "continue_statement" | "break_statement" => Stmt::NoOp,
        "throw_statement" => Stmt::Raise,
        "return_statement" => Stmt::Return(return_value(node, src)),
        "expression_statement" => {
            let Some(first) = named_children(node).first().map(|n| strip(*n)) else {
                return Stmt::NoOp;
            };
            let first = if first.kind() == "await_expression" {
                named_children(first).first().map(|n| strip(*n)).unwrap_or(first)
            } else {
                first
            };
            match first.kind() {
                "string" | "template_string" => Stmt::NoOp,
                "call_expression" => {
                    let callee = first
                        .child_by_field_name("function")
                        .map(|f| callee_text(src.of(f)))
                        .unwrap_or_default();
                    if is_log_callee(&callee) {
                        Stmt::Log
                    } else {
                        Stmt::Other
                    }
                }
                "assignment_expression" => match first.child_by_field_name("right").map(|r| expr(r, src, 0)) {
                    Some(e) if e.is_literal() => Stmt::DefaultAssign(node.start_byte()),
                    _ => Stmt::Other,
                },
                _ => Stmt::Other,
            }
        }
        _ => Stmt::Other,
    }
}

fn return_value(node: Node, src: Src) -> Option<Expr> {
    named_children(node).first().map(|v| expr(*v, src, 0))
}

fn call(node: Node, src: Src) -> RawCall {
    let is_constructor = node.kind() == "new_expression";
    let target = node
        .child_by_field_name("function")
        .or_else(|| node.child_by_field_name("constructor"));
    let callee = target.map(|f| callee_text(src.of(strip(f)))).unwrap_or_default();
    let (args, arg_idents) = arguments(node, src);
    let (context, chained) = call_context(node, src);
    RawCall {
        span: span(node),
        callee,
        is_constructor,
        context,
        chained,
        args,
        keywords: Vec::new(),
        arg_idents,
    }
}

fn arguments(node: Node, src: Src) -> (Vec<Expr>, Vec<String>) {
    let mut args = Vec::new();
    let mut idents = Vec::new();
    let Some(list) = node.child_by_field_name("arguments") else {
        return (args, idents);
    };
    if list.kind() == "template_string" {
        return (vec![expr(list, src, 1)], idents);
    }
    for a in named_children(list).into_iter().take(MAX_WIDTH) {
        let a = strip(a);
        match a.kind() {
            "identifier" => {
                idents.push(src.of(a).to_string());
                args.push(expr(a, src, 1));
            }
            "spread_element" => {
                if let Some(inner) = named_children(a).first().filter(|i| i.kind() == "identifier") {
                    idents.push(src.of(*inner).to_string());
                }
            }
            "array" => {
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
    (args, idents)
}

fn call_context(node: Node, src: Src) -> (CallContext, Vec<String>) {
    let mut chained = Vec::new();
    let mut cur = node;
    loop {
        let Some(parent) = cur.parent() else {
            return (CallContext::Other, chained);
        };
        let is_field = |field: &str| parent.child_by_field_name(field) == Some(cur);
        if TRANSPARENT.contains(&parent.kind()) {
            cur = parent;
            continue;
        }
        let ctx = match parent.kind() {
            "member_expression" if is_field("object") => match parent.parent() {
                Some(g) if g.kind() == "call_expression" && g.child_by_field_name("function") == Some(parent) => {
                    if let Some(p) = parent.child_by_field_name("property") {
                        chained.push(src.of(p).to_string());
                    }
                    cur = g;
                    continue;
                }
                _ => CallContext::Other,
            },
            "await_expression" => CallContext::Awaited,
            "variable_declarator" if is_field("value") => CallContext::Assigned(
                parent
                    .child_by_field_name("name")
                    .map(|n| src.of(n).to_string())
                    .unwrap_or_default(),
            ),
            "assignment_expression" if is_field("right") => CallContext::Assigned(
                parent
                    .child_by_field_name("left")
                    .map(|n| src.of(n).to_string())
                    .unwrap_or_default(),
            ),
            "arguments" | "array" | "pair" | "spread_element" => CallContext::Argument,
            "return_statement" | "yield_expression" => CallContext::Returned,
            "arrow_function" if is_field("body") => CallContext::Returned,
            "expression_statement" => CallContext::Statement,
            _ => CallContext::Other,
        };
        return (ctx, chained);
    }
}

fn test_case(call: &RawCall, node: Node, src: Src) -> Option<RawTest> {
    let head = call.callee.split('.').next().unwrap_or("");
    if call.is_constructor || !TEST_CALLEES.contains(&head) {
        return None;
    }
    let list = node.child_by_field_name("arguments")?;
    let args = named_children(list);
    let has_body = args
        .iter()
        .any(|a| matches!(strip(*a).kind(), "arrow_function" | "function_expression" | "function"));
    if !has_body {
        return None;
    }
    let name = match args.first().map(|a| expr(*a, src, 1)) {
        Some(Expr::Str(s)) => s,
        _ => call.callee.clone(),
    };
    Some(RawTest { name, span: span(node) })
}

fn condition(node: Node, src: Src) -> RawCondition {
    let cond = node.child_by_field_name("condition");
    let consequence = node.child_by_field_name("consequence");
    let alternative = node.child_by_field_name("alternative");
    let inner = cond.map(strip);
    let negated = inner.is_some_and(|c| {
        c.kind() == "unary_expression" && c.child_by_field_name("operator").map(|o| src.of(o)) == Some("!")
    });
    let else_body = alternative.and_then(|a| named_children(a).first().copied());
    RawCondition {
        span: span(node),
        words: cond.map(|c| condition_words(src.of(c))).unwrap_or_default(),
        negated,
        then_span: consequence.map(span).unwrap_or_else(|| span(node)),
        then_exits: consequence.is_some_and(exits_early),
        else_span: alternative.map(span),
        else_exits: else_body.is_some_and(|b| b.kind() != "if_statement" && exits_early(b)),
    }
}

fn exits_early(stmt: Node) -> bool {
    let last = if stmt.kind() == "statement_block" {
        named_children(stmt).last().copied()
    } else {
        Some(stmt)
    };
    last.is_some_and(|s| matches!(s.kind(), "return_statement" | "continue_statement" | "break_statement"))
}

fn in_condition(node: Node) -> bool {
    let mut cur = node;
    while let Some(parent) = cur.parent() {
        match parent.kind() {
            "if_statement" | "while_statement" | "do_statement" | "ternary_expression" | "for_statement" => {
                return parent.child_by_field_name("condition") == Some(cur);
            }
            "expression_statement" | "statement_block" | "program" | "lexical_declaration"
            | "variable_declaration" | "return_statement" => return false,
            _ => cur = parent,
        }
    }
    false
}

fn string_text(node: Node, src: Src) -> String {
    let fragments: Vec<Node> = named_children(node)
        .into_iter()
        .filter(|c| matches!(c.kind(), "string_fragment" | "escape_sequence"))
        .collect();
    if fragments.is_empty() {
        src.of(node).trim_matches(|c| c == '"' || c == '\'' || c == '`').to_string()
    } else {
        fragments.iter().map(|f| src.of(*f)).collect()
    }
}

pub(super) fn expr(node: Node, src: Src, depth: usize) -> Expr {
    let node = strip(node);
    if depth > MAX_DEPTH {
        return Expr::Other(text_words(src.of(node)));
    }
    match node.kind() {
        "null" | "undefined" => Expr::Null,
        "true" => Expr::Bool(true),
        "false" => Expr::Bool(false),
        "number" => Expr::Number(src.of(node).to_string()),
        "string" => Expr::Str(string_text(node, src)),
        "template_string" if !named_children(node).iter().any(|c| c.kind() == "template_substitution") => {
            Expr::Str(string_text(node, src))
        }
        "identifier" | "this" => Expr::Ident(src.of(node).to_string()),
        "member_expression" => Expr::Member(callee_text(src.of(node))),
        "object" => Expr::Object(
            named_children(node)
                .into_iter()
                .take(MAX_WIDTH)
                .filter_map(|p| match p.kind() {
                    "pair" => {
                        let key = p.child_by_field_name("key").map(|k| match k.kind() {
                            "string" => string_text(k, src),
                            _ => src.of(k).to_string(),
                        })?;
                        let value = p
                            .child_by_field_name("value")
                            .map(|v| expr(v, src, depth + 1))
                            .unwrap_or(Expr::Null);
                        Some((key, value))
                    }
                    "shorthand_property_identifier" => {
                        let name = src.of(p).to_string();
                        Some((name.clone(), Expr::Ident(name)))
                    }
                    _ => None,
                })
                .collect(),
        ),
        "array" => Expr::Array(
            named_children(node)
                .into_iter()
                .take(MAX_WIDTH)
                .map(|e| expr(e, src, depth + 1))
                .collect(),
        ),
        "call_expression" | "new_expression" => {
            let target = node
                .child_by_field_name("function")
                .or_else(|| node.child_by_field_name("constructor"));
            let callee = target.map(|f| callee_text(src.of(strip(f)))).unwrap_or_default();
            let mut args: Vec<Expr> = node
                .child_by_field_name("arguments")
                .map(|l| {
                    named_children(l)
                        .into_iter()
                        .take(MAX_WIDTH)
                        .map(|a| expr(a, src, depth + 1))
                        .collect()
                })
                .unwrap_or_default();
            // Fold arguments of chained receivers: `res.status(200).json(body)`.
            if let Some(inner) = target
                .map(strip)
                .filter(|f| f.kind() == "member_expression")
                .and_then(|f| f.child_by_field_name("object"))
                .map(strip)
                .filter(|o| matches!(o.kind(), "call_expression" | "new_expression"))
            {
                if let Expr::Call { args: more, .. } = expr(inner, src, depth + 1) {
                    args.extend(more);
                }
            }
            Expr::Call { callee, args, keywords: Vec::new() }
        }
        "await_expression" => named_children(node)
            .first()
            .map(|c| expr(*c, src, depth))
            .unwrap_or(Expr::Other(Vec::new())),
        "unary_expression" => {
            let op = node.child_by_field_name("operator").map(|o| src.of(o));
            match (op, node.child_by_field_name("argument")) {
                (Some("-"), Some(a)) if a.kind() == "number" => Expr::Number(format!("-{}", src.of(a))),
                (Some("void"), _) => Expr::Null,
                _ => Expr::Other(text_words(src.of(node))),
            }
        }
        _ => Expr::Other(text_words(src.of(node))),
    }
}
