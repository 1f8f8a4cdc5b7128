use std::collections::BTreeSet;

use super::{CheckId, Finding, Severity};
use crate::lexicon::{split_words, Lexicon, Lexicons};
use crate::syntax::{BodyKind, CallContext, CallSite, ConditionSite, DefaultKind, Expr, SyntaxModel};

pub(super) fn evaluate(check: CheckId, model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    match check {
        CheckId::C01 => success_after_failure(model, lex),
        CheckId::C02 => audit_integrity(model, lex),
        CheckId::C03 => swallowed_exceptions(model),
        CheckId::C04 => fallback_defaults(model),
        CheckId::C05 => guard_skips(model, lex, &lex.bypass, CheckId::C05),
        CheckId::C06 => return_contracts(model),
        CheckId::C08 => background_tasks(model, lex),
        CheckId::C09 => guard_skips(model, lex, &lex.environment, CheckId::C09),
        CheckId::C10 => startup_integrity(model),
        CheckId::C11 => determinism(model, lex),
        CheckId::C13 => confidence_opacity(model, lex),
        CheckId::C14 => test_symmetry(model, lex),
        CheckId::C15 => idempotency(model, lex),
        CheckId::C07 | CheckId::C12 => Vec::new(),
    }
}

fn is_success_number(e: &Expr) -> bool {
    e.as_number().is_some_and(|n| n.fract() == 0.0 && (200.0..300.0).contains(&n))
}

fn is_success_name(name: &str, lex: &Lexicons, bare: bool) -> bool {
    let last = name.rsplit('.').next().unwrap_or(name);
    // A bare identifier only counts when written as a constant (`SUCCESS`).
    if bare && last.chars().any(|c| c.is_ascii_lowercase()) {
        return false;
    }
    lex.success_status.matches_exactly(last)
}

fn is_success_value(e: &Expr, lex: &Lexicons) -> bool {
    match e {
        Expr::Bool(true) => true,
        Expr::Str(s) => lex.success_status.matches_exactly(s),
        Expr::Number(_) => is_success_number(e),
        Expr::Ident(s) => is_success_name(s, lex, true),
        Expr::Member(s) => is_success_name(s, lex, false),
        _ => false,
    }
}

fn success_pair(key: &str, value: &Expr, lex: &Lexicons) -> bool {
    (lex.status_keys.matches_exactly(key) && is_success_value(value, lex))
        || (lex.success_flags.matches_exactly(key) && *value == Expr::Bool(true))
}

/// Values that announce success to the caller.
pub(crate) fn success_coded(e: &Expr, lex: &Lexicons) -> bool {
    match e {
        Expr::Object(pairs) => pairs.iter().any(|(k, v)| success_pair(k, v, lex)),
        Expr::Array(items) => items.iter().any(|v| success_coded(v, lex)),
        Expr::Call { args, keywords, .. } => {
            args.iter().any(|v| success_coded(v, lex)) || keywords.iter().any(|(k, v)| success_pair(k, v, lex))
        }
        other => is_success_value(other, lex),
    }
}

fn finding(check: CheckId, severity: Severity, model: &SyntaxModel, line: usize, trigger: &str, issue: String) -> Finding {
    Finding::new(check, severity, model, line, trigger, issue)
}

fn success_after_failure(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    model
        .returns
        .iter()
        .filter_map(|r| {
            let h = &model.handlers[r.handler?];
            if h.body_kind == BodyKind::Reraises || !success_coded(r.value.as_ref()?, lex) {
                return None;
            }
            Some(finding(
                CheckId::C01,
                Severity::High,
                model,
                r.line,
                "success_return_in_handler",
                format!("Handler opened at line {} returns a success value instead of propagating the failure", h.line),
            ))
        })
        .collect()
}

fn callee_hits(lexicon: &Lexicon, call: &CallSite) -> bool {
    lexicon.matches_words(&split_words(&call.callee))
}

fn name_hits(lexicon: &Lexicon, call: &CallSite) -> bool {
    lexicon.matches_words(&split_words(&call.name))
}

fn audit_integrity(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    model
        .calls
        .iter()
        .filter(|c| callee_hits(&lex.audit, c))
        .filter_map(|c| {
            let guarded = c.guarded_by.iter().find(|&&h| model.handlers[h].swallows());
            let inside = c.handler.filter(|&h| model.handlers[h].swallows());
            let (trigger, h) = match (guarded, inside) {
                (Some(&h), _) => ("audit_call_guarded_by_swallowing_handler", h),
                (None, Some(h)) => ("audit_call_in_swallowing_handler", h),
                _ => return None,
            };
            Some(finding(
                CheckId::C02,
                Severity::High,
                model,
                c.line,
                trigger,
                format!(
                    "Audit call `{}` can fail without surfacing: handler at line {} does not propagate",
                    c.callee, model.handlers[h].line
                ),
            ))
        })
        .collect()
}

fn swallowed_exceptions(model: &SyntaxModel) -> Vec<Finding> {
    model
        .handlers
        .iter()
        .filter(|h| h.is_broad())
        .filter_map(|h| {
            let (severity, trigger, what) = match h.body_kind {
                BodyKind::Empty => (Severity::High, "broad_catch_empty", "discards it"),
                BodyKind::LogOnly => (Severity::Medium, "broad_catch_log_only", "only logs it"),
                BodyKind::ReturnsValue => (Severity::Medium, "broad_catch_returns_value", "returns a value instead"),
                BodyKind::Reraises | BodyKind::Other => return None,
            };
            Some(finding(
                CheckId::C03,
                severity,
                model,
                h.line,
                trigger,
                format!("Broad exception handler catches every failure and {what}"),
            ))
        })
        .collect()
}

fn fallback_defaults(model: &SyntaxModel) -> Vec<Finding> {
    let mut out: Vec<Finding> = model
        .defaults
        .iter()
        .map(|d| {
            let issue = match d.kind {
                DefaultKind::NullCoalescing => "Null-coalescing default masks a missing value",
                DefaultKind::OrDefault => "Falsy value silently replaced by a literal default",
                DefaultKind::GetWithDefault => "Lookup falls back to a default instead of failing",
                DefaultKind::HandlerDefault => "Handler assigns a default after a failure",
            };
            finding(CheckId::C04, Severity::Low, model, d.line, d.kind.as_str(), issue.to_string())
        })
        .collect();
    for h in &model.handlers {
        if let Some(line) = h.default_assignment.filter(|_| h.body_kind != BodyKind::Reraises) {
            out.push(finding(
                CheckId::C04,
                Severity::Low,
                model,
                line,
                DefaultKind::HandlerDefault.as_str(),
                "Handler assigns a default after a failure".to_string(),
            ));
        }
    }
    out
}

/// A branch of `cond` skips guard calls that the other path performs.
fn skips_guard(model: &SyntaxModel, cond: &ConditionSite, lex: &Lexicons) -> bool {
    let is_guard = |i: &usize| name_hits(&lex.guard, &model.calls[*i]);
    let then_guarded = cond.then_branch.calls.iter().any(is_guard);
    let else_guarded = cond.else_branch.as_ref().is_some_and(|b| b.calls.iter().any(is_guard));
    if then_guarded != else_guarded {
        return true;
    }
    let exits = cond.then_branch.exits_early || cond.else_branch.as_ref().is_some_and(|b| b.exits_early);
    exits
        && model
            .calls
            .iter()
            .any(|c| c.function == cond.function && c.span.start >= cond.span.end && name_hits(&lex.guard, c))
}

fn guard_skips(model: &SyntaxModel, lex: &Lexicons, lexicon: &Lexicon, check: CheckId) -> Vec<Finding> {
    let (trigger, subject) = match check {
        CheckId::C05 => ("bypass_flag_skips_guard", "Bypass flag"),
        _ => ("environment_branch_skips_guard", "Environment condition"),
    };
    model
        .conditionals
        .iter()
        .filter(|c| lexicon.matches_words(&c.words) && skips_guard(model, c, lex))
        .map(|c| {
            finding(
                check,
                Severity::High,
                model,
                c.line,
                trigger,
                format!("{subject} selects a path that skips validation or authorization"),
            )
        })
        .collect()
}

fn return_contracts(model: &SyntaxModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for (i, _) in model.functions.iter().enumerate() {
        let returns: Vec<_> = model.returns.iter().filter(|r| r.function == Some(i)).collect();
        let failure_null = returns
            .iter()
            .find(|r| r.returns_null() && (r.handler.is_some() || r.in_error_branch));
        let has_value = returns.iter().any(|r| r.value.as_ref().is_some_and(|v| !v.is_null()));
        if let (Some(r), true) = (failure_null, has_value) {
            out.push(finding(
                CheckId::C06,
                Severity::Medium,
                model,
                r.line,
                "null_on_failure_path",
                format!(
                    "`{}` returns null on a failure path but a value otherwise; callers cannot tell failure from absence",
                    model.functions[i].name
                ),
            ));
        }
    }
    out
}

fn supervised(model: &SyntaxModel, idx: usize, call: &CallSite, lex: &Lexicons) -> bool {
    if call.chained.iter().any(|m| lex.continuation.matches_exactly(m)) {
        return true;
    }
    let name = match &call.context {
        CallContext::Statement => return false,
        CallContext::Assigned(name) if !name.is_empty() => name,
        _ => return true,
    };
    let later = |start: usize| start >= call.span.end;
    let prefix = format!("{name}.");
    let continued = model.calls.iter().enumerate().any(|(j, c)| {
        j != idx
            && later(c.span.start)
            && c.function == call.function
            && ((c.callee.starts_with(&prefix) && lex.continuation.matches_exactly(&c.name))
                || c.arg_idents.iter().any(|a| a == name))
    });
    let awaited = model
        .awaits
        .iter()
        .any(|a| later(a.span.start) && a.function == call.function && a.target.as_deref() == Some(name));
    let returned = model.returns.iter().any(|r| {
        later(r.span.start)
            && r.function == call.function
            && matches!(&r.value, Some(Expr::Ident(v)) | Some(Expr::Member(v)) if v == name)
    });
    continued || awaited || returned
}

fn background_tasks(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    model
        .calls
        .iter()
        .enumerate()
        .filter(|(_, c)| lex.spawn.matches_exactly(&c.name))
        .filter(|(i, c)| !supervised(model, *i, c, lex))
        .map(|(_, c)| {
            finding(
                CheckId::C08,
                Severity::Medium,
                model,
                c.line,
                "unsupervised_spawn",
                format!("`{}` starts background work whose failure is never observed", c.callee),
            )
        })
        .collect()
}

fn startup_integrity(model: &SyntaxModel) -> Vec<Finding> {
    model
        .handlers
        .iter()
        .filter(|h| h.swallows())
        .filter(|h| match model.function(h.function) {
            Some(f) => f.is_startup_like,
            None => model.file.is_startup_like(),
        })
        .map(|h| {
            finding(
                CheckId::C10,
                Severity::High,
                model,
                h.line,
                "startup_continues_after_failure",
                "Initialization failure is caught and startup continues".to_string(),
            )
        })
        .collect()
}

fn positive(e: &Expr) -> bool {
    e.as_number().is_some_and(|n| n > 0.0)
}

fn temperature(call: &CallSite, lex: &Lexicons) -> bool {
    let hit = |(k, v): &(String, Expr)| lex.sampling_params.matches_exactly(k) && positive(v);
    call.keywords.iter().any(hit)
        || call.args.iter().any(|a| match a {
            Expr::Object(pairs) => pairs.iter().any(hit),
            _ => false,
        })
}

fn determinism(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    if model.calls.iter().any(|c| callee_hits(&lex.seed, c)) {
        return Vec::new();
    }
    model
        .calls
        .iter()
        .filter(|c| {
            !model
                .function(c.function)
                .map_or(model.file.is_test_like(), |f| f.is_test_like)
        })
        .filter_map(|c| {
            let (trigger, issue) = if callee_hits(&lex.random, c) {
                ("unseeded_random", format!("`{}` draws randomness with no seed set in this file", c.callee))
            } else if temperature(c, lex) {
                ("positive_temperature", format!("`{}` samples with temperature above zero and no seed", c.callee))
            } else {
                return None;
            };
            Some(finding(CheckId::C11, Severity::High, model, c.line, trigger, issue))
        })
        .collect()
}

fn confidence_opacity(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    model
        .returns
        .iter()
        .filter(|r| r.handler.is_some())
        .filter_map(|r| {
            let v = r.value.as_ref()?;
            let fallback = v.is_empty_literal() || lex.fallback.matches_words(&v.name_words());
            let posture = v.keys().iter().any(|k| lex.posture.matches(k));
            (fallback && !posture).then(|| {
                finding(
                    CheckId::C13,
                    Severity::Medium,
                    model,
                    r.line,
                    "fallback_without_posture",
                    "Handler returns a fallback value without marking it as degraded".to_string(),
                )
            })
        })
        .collect()
}

fn test_symmetry(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    if !model.file.is_test_like() || model.tests.is_empty() {
        return Vec::new();
    }
    let failure = model
        .tests
        .iter()
        .filter(|t| {
            model
                .calls
                .iter()
                .any(|c| t.span.contains(&c.span) && callee_hits(&lex.failure_assert, c))
        })
        .count();
    let happy = model.tests.len() - failure;
    let line = model.tests[0].line;
    let (severity, trigger) = if failure == 0 && happy >= 3 {
        (Severity::High, "no_failure_path_tests")
    } else if happy > 0 && (failure as f64) / (happy as f64) < 0.25 {
        (Severity::Medium, "failure_path_tests_scarce")
    } else {
        return Vec::new();
    };
    vec![finding(
        CheckId::C14,
        severity,
        model,
        line,
        trigger,
        format!("{failure} failure-path test(s) against {happy} happy-path test(s)"),
    )]
}

fn idempotency(model: &SyntaxModel, lex: &Lexicons) -> Vec<Finding> {
    let retry_words = |s: &str| lex.retry.matches_words(&split_words(s));
    // (construct span, enclosing function, construct call index)
    let mut constructs = Vec::new();
    for (i, f) in model.functions.iter().enumerate() {
        if f.decorators.iter().any(|d| retry_words(d)) {
            constructs.push((f.span, Some(i), None, "retry_decorator"));
        }
    }
    for (i, c) in model.calls.iter().enumerate() {
        if callee_hits(&lex.retry, c) {
            constructs.push((c.span, c.function, Some(i), "retry_wrapper"));
        }
    }
    for l in &model.loops {
        let sleeps = l.calls.iter().any(|&i| callee_hits(&lex.sleep, &model.calls[i]));
        if lex.attempt.matches_words(&l.words) && sleeps {
            constructs.push((l.span, l.function, None, "retry_loop"));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (span, function, own, trigger) in constructs {
        if lex.idempotency.matches_words(&model.scope_words(function)) {
            continue;
        }
        for (i, c) in model.calls.iter().enumerate() {
            if Some(i) == own || !span.contains(&c.span) || !name_hits(&lex.write, c) || callee_hits(&lex.sleep, c) {
                continue;
            }
            if seen.insert(i) {
                out.push(finding(
                    CheckId::C15,
                    Severity::High,
                    model,
                    c.line,
                    trigger,
                    format!("`{}` is retried with no idempotency key; a retry can repeat the write", c.callee),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_coding() {
        let lex = Lexicons::default();
        let ok = |e: Expr| success_coded(&e, &lex);
        assert!(ok(Expr::Bool(true)));
        assert!(ok(Expr::Str("ok".into())));
        assert!(ok(Expr::Number("204".into())));
        assert!(!ok(Expr::Number("500".into())));
        assert!(ok(Expr::Object(vec![("status".into(), Expr::Str("ok".into()))])));
        assert!(ok(Expr::Object(vec![("success".into(), Expr::Bool(true))])));
        assert!(!ok(Expr::Object(vec![("success".into(), Expr::Bool(false))])));
        assert!(!ok(Expr::Object(vec![("status".into(), Expr::Str("error".into()))])));
        assert!(ok(Expr::Member("HTTPStatus.OK".into())));
        assert!(ok(Expr::Ident("SUCCESS".into())));
        assert!(!ok(Expr::Ident("ok".into())));
        assert!(ok(Expr::Call {
            callee: "Response".into(),
            args: vec![],
            keywords: vec![("status_code".into(), Expr::Number("200".into()))],
        }));
        assert!(!ok(Expr::Null));
    }
}
