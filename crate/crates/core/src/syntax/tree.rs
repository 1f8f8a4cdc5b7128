//! Shared plumbing for the tree-sitter backed extractors.

use tree_sitter::{Language, Node, Parser};

use super::builder::RawModel;
use super::{LanguageId, SourceFile, Span};

/// Full grammar pass. `None` when the grammar does not accept the file.
pub(super) fn extract(file: &SourceFile) -> Option<RawModel> {
    let language: Language = match file.language {
        LanguageId::Python => tree_sitter_python::LANGUAGE.into(),
        LanguageId::Javascript => tree_sitter_javascript::LANGUAGE.into(),
        LanguageId::Typescript => tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into(),
        LanguageId::JsxTsx => {
            if file.relative_path.to_ascii_lowercase().ends_with(".jsx") {
                tree_sitter_javascript::LANGUAGE.into()
            } else {
                tree_sitter_typescript::LANGUAGE_TSX.into()
            }
        }
        LanguageId::Unsupported => return None,
    };
    let mut parser = Parser::new();
    parser.set_language(&language).ok()?;
    let tree = parser.parse(&file.content, None)?;
    let root = tree.root_node();
    if root.has_error() {
        return None;
    }
    let src = Src { text: &file.content };
    let mut raw = RawModel::default();
    match file.language {
        LanguageId::Python => super::python::extract(root, src, &mut raw),
        _ => super::ecma::extract(root, src, &mut raw),
    }
    Some(raw)
}

#[derive(Clone, Copy)]
pub(super) struct Src<'a> {
    pub text: &'a str,
}

impl<'a> Src<'a> {
    pub fn of(&self, node: Node) -> &'a str {
        self.text.get(node.byte_range()).unwrap_or("")
    }
}

pub(super) fn span(node: Node) -> Span {
    Span::new(node.start_byte(), node.end_byte())
}

pub(super) fn named_children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor)
        .filter(|c| c.kind() != "comment")
        .collect()
}

pub(super) fn children(node: Node) -> Vec<Node> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

/// Callee text with argument lists removed and whitespace dropped:
/// `expect(fn()).rejects.toThrow` becomes `expect().rejects.toThrow`.
pub(super) fn callee_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '(' => {
                if depth == 0 {
                    out.push('(');
                }
                depth += 1;
            }
            ')' => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    out.push(')');
                }
            }
            '?' if depth == 0 => {}
            c if depth == 0 && !c.is_whitespace() => out.push(c),
            _ => {}
        }
    }
    out
}

pub(super) fn last_segment(callee: &str) -> String {
    let tail = callee.rsplit('.').next().unwrap_or(callee);
    if tail.is_empty() || tail.ends_with(')') || tail.ends_with(']') {
        "<dynamic>".to_string()
    } else {
        tail.to_string()
    }
}

/// Find descendants of `node` whose kind is in `kinds`, not descending into
/// nodes whose kind is in `stop`.
pub(super) fn descendants<'t>(node: Node<'t>, kinds: &[&str], stop: &[&str]) -> Vec<Node<'t>> {
    let mut found = Vec::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        for child in children(n).into_iter().rev() {
            if kinds.contains(&child.kind()) {
                found.push(child);
            }
            if !stop.contains(&child.kind()) {
                stack.push(child);
            }
        }
    }
    found.sort_by_key(|n| n.start_byte());
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn callee_text_strips_arguments() {
        assert_eq!(callee_text("expect(f(x)).rejects.toThrow"), "expect().rejects.toThrow");
        assert_eq!(callee_text("a?.b.c"), "a.b.c");
        assert_eq!(callee_text("self.log\n  .warning"), "self.log.warning");
        assert_eq!(last_segment("a.b.c"), "c");
        assert_eq!(last_segment("make()"), "<dynamic>");
        assert_eq!(last_segment("persist"), "persist");
    }
}
