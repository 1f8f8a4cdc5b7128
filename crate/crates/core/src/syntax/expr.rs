use serde::{Deserialize, Serialize};

use crate::lexicon::split_words;

/// Shallow, language-neutral summary of an expression.
///
/// Trees are cut at a fixed depth and width; anything that does not map onto a
/// literal, name, collection or call becomes [`Expr::Other`] carrying the
/// identifier words found in its text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Null,
    Bool(bool),
    /// Numeric literal as written (sign included).
    Number(String),
    Str(String),
    Ident(String),
    /// Dotted member access, e.g. `Status.OK`.
    Member(String),
    Object(Vec<(String, Expr)>),
    Array(Vec<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
        keywords: Vec<(String, Expr)>,
    },
    Other(Vec<String>),
}

pub(crate) const MAX_DEPTH: usize = 4;
pub(crate) const MAX_WIDTH: usize = 16;

impl Expr {
    pub fn is_null(&self) -> bool {
        matches!(self, Expr::Null)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Expr::Number(text) => parse_number(text),
            _ => None,
        }
    }

    /// Literal collection with no elements, or the empty string.
    pub fn is_empty_literal(&self) -> bool {
        match self {
            Expr::Object(pairs) => pairs.is_empty(),
            Expr::Array(items) => items.is_empty(),
            Expr::Str(s) => s.is_empty(),
            _ => false,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self,
            Expr::Null | Expr::Bool(_) | Expr::Number(_) | Expr::Str(_) | Expr::Object(_) | Expr::Array(_)
        )
    }

    /// Words of every name reachable in the expression: identifiers, member
    /// paths and callees. Object keys and string contents are excluded.
    pub fn name_words(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_name_words(&mut out);
        out
    }

    fn collect_name_words(&self, out: &mut Vec<String>) {
        match self {
            Expr::Ident(s) | Expr::Member(s) => out.extend(split_words(s)),
            Expr::Object(pairs) => pairs.iter().for_each(|(_, v)| v.collect_name_words(out)),
            Expr::Array(items) => items.iter().for_each(|v| v.collect_name_words(out)),
            Expr::Call { callee, args, keywords } => {
                out.extend(split_words(callee));
                args.iter().for_each(|v| v.collect_name_words(out));
                keywords.iter().for_each(|(_, v)| v.collect_name_words(out));
            }
            Expr::Other(words) => out.extend(words.iter().cloned()),
            Expr::Null | Expr::Bool(_) | Expr::Number(_) | Expr::Str(_) => {}
        }
    }

    /// Every object key at any depth, including call keyword names.
    pub fn keys(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_keys(&mut out);
        out
    }

    fn collect_keys<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Object(pairs) => {
                for (k, v) in pairs {
                    out.push(k);
                    v.collect_keys(out);
                }
            }
            Expr::Array(items) => items.iter().for_each(|v| v.collect_keys(out)),
            Expr::Call { args, keywords, .. } => {
                args.iter().for_each(|v| v.collect_keys(out));
                for (k, v) in keywords {
                    out.push(k);
                    v.collect_keys(out);
                }
            }
            _ => {}
        }
    }
}

pub(crate) fn parse_number(text: &str) -> Option<f64> {
    let cleaned: String = text.chars().filter(|c| *c != '_').collect();
    let cleaned = cleaned.trim_end_matches(['n', 'j', 'J', 'l', 'L']);
    if let Some(hex) = cleaned.strip_prefix("0x").or_else(|| cleaned.strip_prefix("0X")) {
        return i64::from_str_radix(hex, 16).ok().map(|v| v as f64);
    }
    cleaned.parse::<f64>().ok()
}

/// Identifier-like words in arbitrary source text, bounded.
pub(crate) fn text_words(text: &str) -> Vec<String> {
    split_words(text).into_iter().take(32).collect()
}
